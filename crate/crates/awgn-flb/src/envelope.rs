//! Average-power machinery: the implicit boundary equation, the threshold
//! cardinality, and the convex envelope of f via two-point chords.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ht_core::{f_exact, TestParams};
use crate::logspace::{ln_add, LogValue, Prob, SignedLogSum};
use crate::special_fn::{ln_bessel_i, marcum};

/// Adds q1 − q0 to `acc` (scaled by e^{ln_scale}) choosing the
/// representation that avoids cancellation.
fn add_difference(acc: &mut SignedLogSum, q1: Prob, q0: Prob, ln_scale: f64) {
    if q1.ln_p.max(q0.ln_p) < -std::f64::consts::LN_2 {
        acc.add(true, q1.ln_p + ln_scale);
        acc.add(false, q0.ln_p + ln_scale);
    } else {
        acc.add(true, q0.ln_q + ln_scale);
        acc.add(false, q1.ln_q + ln_scale);
    }
}

struct Xi {
    xi1: SignedLogSum,
    xi2: SignedLogSum,
    ln_xi3: f64,
}

fn xi_parts(p: &TestParams, t: f64) -> Xi {
    let n = p.nf();
    let m = p.m();
    let d = p.delta();
    let (s2, t2, g) = (p.sigma2, p.theta2, p.gamma);
    let ngd2 = n * g / (d * d);

    let mut xi1 = SignedLogSum::default();
    let c1 = (t * t / s2 - ngd2 * t2).max(0.0).sqrt();
    add_difference(&mut xi1, p.alpha_at(t), marcum(m, 0.0, c1), 0.0);

    let mut xi2 = SignedLogSum::default();
    let ln_c = n * (p.theta() / p.sigma()).ln() + 0.5 * (n * g / d - d * t * t / (s2 * t2));
    let c2 = (t * t / t2 - ngd2 * s2).max(0.0).sqrt();
    add_difference(&mut xi2, marcum(m, 0.0, c2), marcum(m, p.a_bar(), t / p.theta()), ln_c);

    let ln_xi3 = if t == 0.0 {
        f64::NEG_INFINITY
    } else {
        let sng = (n * g).sqrt();
        (n * g / (2.0 * d)).ln() + m * (t * d / (s2 * sng)).ln() - 0.5 * (ngd2 * s2 + t * t / s2)
            + ln_bessel_i(m, sng * t / d)
    };
    Xi { xi1, xi2, ln_xi3 }
}

fn boundary_params(gamma: f64, n: u32, sigma2: f64, theta2: f64) -> Result<TestParams> {
    let p = TestParams::new(n, gamma, sigma2, theta2)?;
    if !(gamma > 0.0) {
        return Err(Error::Domain("boundary machinery requires gamma > 0".into()));
    }
    Ok(p)
}

/// The three terms of the first-order boundary condition at threshold t.
pub fn xi_terms(t: f64, gamma: f64, n: u32, sigma2: f64, theta2: f64) -> Result<(f64, f64, f64)> {
    let p = boundary_params(gamma, n, sigma2, theta2)?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t = {t}")));
    }
    let x = xi_parts(&p, t);
    Ok((x.xi1.value(), x.xi2.value(), x.ln_xi3.exp()))
}

/// Sign of ξ₁+ξ₂+ξ₃ and ln of its magnitude and of the largest term.
pub(crate) fn xi_sum(p: &TestParams, t: f64) -> (f64, f64, f64) {
    let x = xi_parts(p, t);
    let mut acc = SignedLogSum::default();
    for part in [&x.xi1, &x.xi2] {
        let (s, l) = part.result();
        if s != 0.0 {
            acc.add(s > 0.0, l);
        }
    }
    acc.add(true, x.ln_xi3);
    let scale = x.xi1.ln_scale().max(x.xi2.ln_scale()).max(x.ln_xi3);
    let (s, l) = acc.result();
    (s, l, scale)
}

/// Sign of the boundary sum, treating values lost in rounding as zero.
fn xi_sign(p: &TestParams, t: f64) -> f64 {
    let (s, l, scale) = xi_sum(p, t);
    if s == 0.0 || l < scale - 13.0 * std::f64::consts::LN_10 {
        0.0
    } else {
        s
    }
}

const SCAN_POINTS: usize = 1_000;

/// Bracketed refinement of a +→− crossing of the boundary sum: Illinois
/// steps on the sum scaled by a fixed reference, bisection as a fallback.
fn refine_root(p: &TestParams, mut lo: f64, mut hi: f64) -> f64 {
    let (_, _, reference) = xi_sum(p, lo);
    let value = |t: f64| {
        let (s, l, _) = xi_sum(p, t);
        (s * (l - reference).exp(), s * l.exp())
    };
    let (mut flo, _) = value(lo);
    let (mut fhi, _) = value(hi);
    let mut side = 0;
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let secant = (lo * fhi - hi * flo) / (fhi - flo);
        let t = if secant.is_finite() && secant > lo && secant < hi && flo > 0.0 && fhi < 0.0 {
            secant
        } else {
            0.5 * (lo + hi)
        };
        let (f, raw) = value(t);
        if f == 0.0 || (raw.abs() <= 1e-11 && hi - lo <= 1e-10 * hi) {
            return t;
        }
        if f > 0.0 {
            lo = t;
            flo = f;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        } else {
            hi = t;
            fhi = f;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        }
    }
    0.5 * (lo + hi)
}

fn scan_for_root(p: &TestParams) -> Result<(f64, usize)> {
    let points = SCAN_POINTS;
    let theta = p.theta();
    let t_min = 1e-6 * theta;
    let t_max = 1e3 * theta * p.nf().sqrt();
    let ratio = (t_max / t_min).powf(1.0 / points as f64);
    let mut prev: Option<(f64, f64)> = None;
    let mut first: Option<(f64, f64)> = None;
    let mut changes = 0;
    let mut t = t_min;
    for _ in 0..=points {
        let s = xi_sign(p, t);
        if s != 0.0 {
            if let Some((tp, sp)) = prev {
                if sp != s {
                    changes += 1;
                    if first.is_none() && sp > 0.0 {
                        first = Some((tp, t));
                    }
                }
            }
            prev = Some((t, s));
        }
        t *= ratio;
    }
    match first {
        Some((lo, hi)) => Ok((refine_root(p, lo, hi), changes)),
        None => Err(Error::NoRoot(format!(
            "no sign change of the boundary sum on [{t_min:e}, {t_max:e}] (n={}, gamma={}, theta2={})",
            p.n, p.gamma, p.theta2
        ))),
    }
}

/// Smallest positive root t₀ of ξ₁+ξ₂+ξ₃ = 0.
pub fn solve_t0(gamma: f64, n: u32, sigma2: f64, theta2: f64) -> Result<f64> {
    let p = boundary_params(gamma, n, sigma2, theta2)?;
    Ok(scan_for_root(&p)?.0)
}

/// Local search for t₀ starting from a nearby guess; falls back to the
/// full scan when the walk does not bracket a +→− crossing quickly.
fn solve_t0_near(p: &TestParams, guess: f64) -> Result<(f64, usize)> {
    const STEP: f64 = 1.02;
    let mut s0 = xi_sign(p, guess);
    if s0 == 0.0 {
        let (below, above) = (xi_sign(p, guess / STEP), xi_sign(p, guess * STEP));
        if below > 0.0 && above < 0.0 {
            return Ok((refine_root(p, guess / STEP, guess * STEP), 0));
        }
        s0 = if below < 0.0 { -1.0 } else { above };
    }
    if s0 != 0.0 {
        let mut t = guess;
        for _ in 0..80 {
            let next = if s0 > 0.0 { t * STEP } else { t / STEP };
            let s = xi_sign(p, next);
            if s != 0.0 && s != s0 {
                let (lo, hi) = if s0 > 0.0 { (t, next) } else { (next, t) };
                return Ok((refine_root(p, lo, hi), 0));
            }
            t = next;
        }
    }
    if s0 > 0.0 {
        // the guess may sit past the second crossing: walk down through
        // the negative band to the first one
        let mut t = guess;
        let mut seen_negative = false;
        for _ in 0..200 {
            let next = t / STEP;
            let s = xi_sign(p, next);
            if s < 0.0 {
                seen_negative = true;
            } else if s > 0.0 && seen_negative {
                return Ok((refine_root(p, next, t), 0));
            }
            t = next;
        }
    }
    scan_for_root(p)
}

/// Boundary point of the envelope at energy γ and its origin partner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Boundary {
    pub gamma: f64,
    pub t0: f64,
    pub beta0: Prob,
    pub bar_t_star: f64,
    pub bar_beta: Prob,
    /// f(β₀, γ)
    pub f_shell: Prob,
    /// f(β̄, 0)
    pub f_origin: Prob,
    /// Sign changes seen by the full scan (0 when warm-started).
    pub sign_changes: usize,
}

fn boundary_from_t0(p: &TestParams, t0: f64, sign_changes: usize) -> Boundary {
    let n = p.nf();
    let d = p.delta();
    let bar_t = (t0 * t0 - n * p.gamma * p.sigma2 * p.theta2 / (d * d)).max(0.0).sqrt();
    Boundary {
        gamma: p.gamma,
        t0,
        beta0: p.beta_at(t0),
        bar_t_star: bar_t,
        bar_beta: marcum(p.m(), 0.0, bar_t / p.theta()).flip(),
        f_shell: p.alpha_at(t0),
        f_origin: marcum(p.m(), 0.0, bar_t / p.sigma()),
        sign_changes,
    }
}

/// Endpoints (β₀, β̄, t₀, t̄⋆) of the chord anchored at energy γ.
pub fn envelope_endpoints(gamma: f64, n: u32, sigma2: f64, theta2: f64) -> Result<Boundary> {
    let p = boundary_params(gamma, n, sigma2, theta2)?;
    let (t0, changes) = scan_for_root(&p)?;
    Ok(boundary_from_t0(&p, t0, changes))
}

/// Boundary points along increasing energies. The first is found by the
/// full scan, later ones by a local search seeded from their neighbor.
pub fn boundary_curve(n: u32, sigma2: f64, theta2: f64, gammas: &[f64]) -> Result<Vec<Boundary>> {
    let mut out: Vec<Boundary> = Vec::with_capacity(gammas.len());
    for &g in gammas {
        let p = boundary_params(g, n, sigma2, theta2)?;
        let b = match out.last() {
            Some(prev) => {
                let (t0, changes) = solve_t0_near(&p, prev.t0)?;
                boundary_from_t0(&p, t0, changes)
            }
            None => {
                let (t0, changes) = scan_for_root(&p)?;
                boundary_from_t0(&p, t0, changes)
            }
        };
        out.push(b);
    }
    Ok(out)
}

/// Threshold cardinality M̄ₙ = 1/β₀(Υ) and the matching rate in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MBar {
    pub m_bar: f64,
    pub rate_bits: f64,
}

pub fn m_bar(n: u32, upsilon: f64, sigma2: f64, theta2: f64) -> Result<MBar> {
    let b = envelope_endpoints(upsilon, n, sigma2, theta2)?;
    let ln_m = -b.beta0.ln_p;
    Ok(MBar {
        m_bar: ln_m.exp(),
        rate_bits: ln_m / std::f64::consts::LN_2 / f64::from(n),
    })
}

/// Envelope value at (β, Υ) with the chord that realizes it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeSolution {
    pub t0: f64,
    pub gamma0: f64,
    pub beta0: Prob,
    pub bar_t_star: f64,
    pub bar_beta: Prob,
    pub lambda: f64,
    pub value: Prob,
    pub on_boundary_or_above: bool,
    pub warnings: Vec<String>,
}

fn chord_beta(b: &Boundary, upsilon: f64) -> f64 {
    let lam = upsilon / b.gamma;
    lam * b.beta0.value() + (1.0 - lam) * b.bar_beta.value()
}

/// Convex envelope of f at (β, Υ), reusing a precomputed boundary at Υ.
pub fn f_envelope_with_boundary(
    n: u32,
    upsilon: f64,
    sigma2: f64,
    theta2: f64,
    at_upsilon: &Boundary,
    beta: LogValue,
) -> Result<EnvelopeSolution> {
    let p = boundary_params(upsilon, n, sigma2, theta2)?;
    let lb = beta.ln();
    if !(lb < 0.0 && lb > f64::NEG_INFINITY) {
        return Err(Error::Domain(format!("ln beta = {lb}")));
    }
    if lb >= at_upsilon.beta0.ln_p {
        return Ok(EnvelopeSolution {
            t0: at_upsilon.t0,
            gamma0: upsilon,
            beta0: at_upsilon.beta0,
            bar_t_star: at_upsilon.bar_t_star,
            bar_beta: at_upsilon.bar_beta,
            lambda: 1.0,
            value: f_exact(&p, beta)?,
            on_boundary_or_above: true,
            warnings: Vec::new(),
        });
    }
    let target = beta.value();
    let mut warnings = Vec::new();
    let mut seeds: Vec<(f64, f64)> = vec![(upsilon.ln(), at_upsilon.t0)];
    let mut at = |g: f64| -> Result<Boundary> {
        let pg = p.with_gamma(g);
        let lg = g.ln();
        let guess = seeds
            .iter()
            .min_by(|a, b| (a.0 - lg).abs().total_cmp(&(b.0 - lg).abs()))
            .map_or(at_upsilon.t0, |s| s.1);
        let (t0, _) = solve_t0_near(&pg, guess)?;
        seeds.push((lg, t0));
        Ok(boundary_from_t0(&pg, t0, 0))
    };
    // chord β decreases from β₀(Υ) as γ₀ grows
    let mut lo = (upsilon, chord_beta(at_upsilon, upsilon) / target - 1.0);
    let mut hi_g = 4.0 * upsilon;
    let mut hi;
    loop {
        let b = at(hi_g)?;
        let g = chord_beta(&b, upsilon) / target - 1.0;
        if g > lo.1 {
            warnings.push(format!("chord beta not monotone near gamma0 = {hi_g}"));
        }
        if g <= 0.0 {
            hi = (hi_g, g, b);
            break;
        }
        lo = (hi_g, g);
        hi_g *= 2.0;
        if hi_g > 1e6 * upsilon {
            return Err(Error::NoBracket(format!(
                "chord constraint has no sign change up to gamma0 = {hi_g} (beta = {target:e})"
            )));
        }
    }
    // Illinois iteration in ln γ₀
    let mut best = hi.2;
    let mut side = 0;
    let (mut ulo, mut glo) = (lo.0.ln(), lo.1);
    let (mut uhi, mut ghi) = (hi.0.ln(), hi.1);
    for _ in 0..100 {
        if ghi.abs() <= 1e-12 {
            break;
        }
        let u = (ulo * ghi - uhi * glo) / (ghi - glo);
        let u = if u.is_finite() && u > ulo && u < uhi { u } else { 0.5 * (ulo + uhi) };
        let b = at(u.exp())?;
        let g = chord_beta(&b, upsilon) / target - 1.0;
        best = b;
        if g.abs() <= 1e-12 || (uhi - ulo) < 1e-15 {
            break;
        }
        if g > 0.0 {
            ulo = u;
            glo = g;
            if side == 1 {
                ghi /= 2.0;
            }
            side = 1;
        } else {
            uhi = u;
            ghi = g;
            if side == -1 {
                glo /= 2.0;
            }
            side = -1;
        }
        hi = (uhi.exp(), ghi, b);
    }
    let _ = hi;
    let lam = upsilon / best.gamma;
    let ln_value = ln_add(lam.ln() + best.f_shell.ln_p, (-lam).ln_1p() + best.f_origin.ln_p);
    Ok(EnvelopeSolution {
        t0: best.t0,
        gamma0: best.gamma,
        beta0: best.beta0,
        bar_t_star: best.bar_t_star,
        bar_beta: best.bar_beta,
        lambda: lam,
        value: Prob::from_ln(ln_value.min(0.0)),
        on_boundary_or_above: false,
        warnings,
    })
}

/// Convex envelope f̲(β, Υ).
pub fn f_envelope(n: u32, upsilon: f64, sigma2: f64, theta2: f64, beta: LogValue) -> Result<EnvelopeSolution> {
    let b = envelope_endpoints(upsilon, n, sigma2, theta2)?;
    f_envelope_with_boundary(n, upsilon, sigma2, theta2, &b, beta)
}

/// Two-mass input distribution realizing the envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InputMixture {
    pub origin_mass: f64,
    pub shell_energy: f64,
    pub shell_mass: f64,
}

pub fn optimal_input(n: u32, upsilon: f64, sigma2: f64, theta2: f64, beta: LogValue) -> Result<InputMixture> {
    let sol = f_envelope(n, upsilon, sigma2, theta2, beta)?;
    Ok(InputMixture {
        origin_mass: 1.0 - sol.lambda,
        shell_energy: sol.gamma0,
        shell_mass: sol.lambda,
    })
}
