//! User-facing converse bounds: hypothesis-testing bounds under the three
//! power constraints, constraint transforms, the cone-packing bound and
//! sweep drivers.

use rayon::prelude::*;
use serde::Serialize;

use crate::envelope::{envelope_endpoints, f_envelope_with_boundary};
use crate::error::{Error, Result};
use crate::ht_core::{f_exact, f_nonparametric, solve_t_for_beta, NpMode, TestParams};
use crate::logspace::{LogValue, Prob};
use crate::optim::{bisect, scan_then_golden};
use crate::quad::integrate_panels;
use crate::saddlepoint::{f_saddlepoint, f_saddlepoint_exponent, sphere_packing, SpVariant};
use crate::special_fn::{gamma_q, reg_inc_beta};

/// Noise variance; every query is normalized to it.
pub const SIGMA2: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Constraint {
    Equal,
    Maximal,
    Average,
}

/// Code size, either as a cardinality or as a rate in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CodeSize {
    Cardinality(f64),
    RateBits(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ThetaPolicy {
    /// θ² = Υ + σ²
    Capacity,
    /// θ̃ₛ² at the maximizer of the sphere-packing exponent
    ExponentAsymptotic,
    /// θ̃ₛ² at the maximizer of the finite-n saddlepoint bound
    ExponentFiniteN,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Auto,
    Exact,
    SaddlepointFull,
    SaddlepointHat,
    VerduHan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundQuery {
    pub constraint: Constraint,
    pub n: u32,
    pub size: CodeSize,
    pub snr_db: f64,
    pub theta_policy: ThetaPolicy,
    pub method: Method,
}

impl BoundQuery {
    pub fn new(constraint: Constraint, n: u32, size: CodeSize, snr_db: f64) -> Self {
        BoundQuery {
            constraint,
            n,
            size,
            snr_db,
            theta_policy: ThetaPolicy::Capacity,
            method: Method::Auto,
        }
    }

    pub fn upsilon(&self) -> f64 {
        snr_to_upsilon(self.snr_db)
    }

    /// ln β = −ln M = −nR ln 2.
    pub fn ln_beta(&self) -> f64 {
        match self.size {
            CodeSize::Cardinality(m) => -m.ln(),
            CodeSize::RateBits(r) => -f64::from(self.n) * r * std::f64::consts::LN_2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let size_ok = match self.size {
            CodeSize::Cardinality(m) => m > 1.0 && m.is_finite(),
            CodeSize::RateBits(r) => r > 0.0 && r.is_finite(),
        };
        if self.n == 0 {
            return Err(Error::InvalidParams("blocklength must be positive".into()));
        }
        if !size_ok {
            return Err(Error::InvalidParams(format!(
                "code size {:?}: need more than one codeword and a finite positive rate",
                self.size
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidParams(format!("snr_db = {}", self.snr_db)));
        }
        if let ThetaPolicy::Fixed(t2) = self.theta_policy {
            if !(t2 > SIGMA2 && t2.is_finite()) {
                return Err(Error::InvalidParams(format!("theta2 = {t2} must exceed the noise variance")));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for Constraint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(Constraint::Equal),
            "maximal" => Ok(Constraint::Maximal),
            "average" => Ok(Constraint::Average),
            other => Err(Error::InvalidParams(format!("constraint `{other}`: expected equal, maximal or average"))),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Method::Auto),
            "exact" => Ok(Method::Exact),
            "sp-full" => Ok(Method::SaddlepointFull),
            "sp-hat" => Ok(Method::SaddlepointHat),
            "vh" => Ok(Method::VerduHan),
            other => Err(Error::InvalidParams(format!("method `{other}`: expected auto, exact, sp-full, sp-hat or vh"))),
        }
    }
}

/// `capacity`, `exponent-asymptotic`, `exponent-finite-n` or `fixed:<θ²>`.
impl std::str::FromStr for ThetaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "capacity" => Ok(ThetaPolicy::Capacity),
            "exponent-asymptotic" => Ok(ThetaPolicy::ExponentAsymptotic),
            "exponent-finite-n" => Ok(ThetaPolicy::ExponentFiniteN),
            other => other
                .strip_prefix("fixed:")
                .and_then(|v| v.parse::<f64>().ok())
                .map(ThetaPolicy::Fixed)
                .ok_or_else(|| {
                    Error::InvalidParams(format!(
                        "theta policy `{other}`: expected capacity, exponent-asymptotic, exponent-finite-n or fixed:<theta2>"
                    ))
                }),
        }
    }
}

pub fn snr_to_upsilon(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0) * SIGMA2
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub value: Prob,
    pub bound_name: String,
    pub method_used: Method,
    pub s_star: Option<f64>,
    pub t_star: Option<f64>,
    pub theta2_used: Option<f64>,
    pub warnings: Vec<String>,
}

impl BoundResult {
    fn plain(value: Prob, name: &str) -> Self {
        BoundResult {
            value,
            bound_name: name.to_string(),
            method_used: Method::Exact,
            s_star: None,
            t_star: None,
            theta2_used: None,
            warnings: Vec::new(),
        }
    }
}

fn attach<T>(r: Result<T>, q: &BoundQuery) -> Result<T> {
    r.map_err(|e| match e {
        Error::InvalidParams(m) => Error::InvalidParams(format!("{m} [query {q:?}]")),
        Error::Domain(m) => Error::Domain(format!("{m} [query {q:?}]")),
        Error::NoRoot(m) => Error::NoRoot(format!("{m} [query {q:?}]")),
        Error::NoBracket(m) => Error::NoBracket(format!("{m} [query {q:?}]")),
        other => other,
    })
}

fn resolve_theta2(q: &BoundQuery, upsilon: f64, beta: LogValue) -> Result<(f64, Vec<String>)> {
    let cap = upsilon + SIGMA2;
    let mut warnings = Vec::new();
    let t2 = match q.theta_policy {
        ThetaPolicy::Capacity => cap,
        ThetaPolicy::Fixed(t2) => t2,
        ThetaPolicy::ExponentAsymptotic => {
            let rate = -beta.ln() / f64::from(q.n);
            let rep = sphere_packing(rate, upsilon, SIGMA2)?;
            if rep.s_star >= 1.0 {
                warnings.push("rate at or above capacity: exponent policy reduces to the capacity variance".into());
            }
            rep.theta_tilde2
        }
        ThetaPolicy::ExponentFiniteN => {
            let sp = f_saddlepoint_exponent(q.n, upsilon, SIGMA2, beta)?;
            if sp.value.ln_p == f64::NEG_INFINITY {
                // the expansion is vacuous for every tilt; its maximizer means nothing
                warnings.push("finite-n exponent expansion is vacuous here: using the capacity variance".into());
                cap
            } else {
                sp.theta2
            }
        }
    };
    Ok((t2, warnings))
}

struct Evaluated {
    value: Prob,
    method: Method,
    s_star: Option<f64>,
    t_star: Option<f64>,
}

fn eval_f(p: &TestParams, beta: LogValue, method: Method) -> Result<Evaluated> {
    let method = match method {
        Method::Auto if p.n <= 1000 => Method::Exact,
        Method::Auto => Method::SaddlepointFull,
        m => m,
    };
    Ok(match method {
        Method::Exact | Method::Auto => Evaluated {
            value: f_exact(p, beta)?,
            method: Method::Exact,
            s_star: None,
            t_star: Some(solve_t_for_beta(p, beta)?),
        },
        Method::SaddlepointFull | Method::SaddlepointHat => {
            let variant = if method == Method::SaddlepointFull { SpVariant::Full } else { SpVariant::Hat };
            let r = f_saddlepoint(p, beta, variant)?;
            Evaluated { value: r.value, method, s_star: Some(r.s_star), t_star: None }
        }
        Method::VerduHan => Evaluated {
            value: f_nonparametric(p, beta, NpMode::VerduHan)?,
            method,
            s_star: None,
            t_star: None,
        },
    })
}

fn compute_inner(q: &BoundQuery) -> Result<BoundResult> {
    q.validate()?;
    let upsilon = q.upsilon();
    let beta = LogValue::from_ln(q.ln_beta());
    let (mut t2, mut warnings) = resolve_theta2(q, upsilon, beta)?;
    let params = TestParams::new(q.n, upsilon, SIGMA2, t2)?;
    let mut ev = eval_f(&params, beta, q.method)?;
    if q.theta_policy == ThetaPolicy::ExponentFiniteN && t2 != upsilon + SIGMA2 {
        // any variance gives a valid bound; keep the capacity one when larger
        let cap = TestParams::new(q.n, upsilon, SIGMA2, upsilon + SIGMA2)?;
        let alt = eval_f(&cap, beta, q.method)?;
        if alt.value.ln_p > ev.value.ln_p {
            warnings.push("capacity variance dominates the finite-n exponent variance here".into());
            ev = alt;
            t2 = upsilon + SIGMA2;
        }
    }
    let mut name = match q.constraint {
        Constraint::Equal => "equal-power meta-converse",
        Constraint::Maximal => "maximal-power meta-converse",
        Constraint::Average => "average-power meta-converse (below threshold size)",
    };
    let mut value = ev.value;
    if q.constraint == Constraint::Average {
        let b = envelope_endpoints(upsilon, q.n, SIGMA2, t2)?;
        if beta.ln() < b.beta0.ln_p {
            if ev.method != Method::Exact {
                warnings.push("convex envelope is evaluated on the exact path".into());
            }
            let sol = f_envelope_with_boundary(q.n, upsilon, SIGMA2, t2, &b, beta)?;
            warnings.extend(sol.warnings);
            value = sol.value;
            name = "average-power meta-converse (convex envelope)";
            ev.method = Method::Exact;
            ev.t_star = Some(sol.t0);
        }
    }
    Ok(BoundResult {
        value,
        bound_name: name.to_string(),
        method_used: ev.method,
        s_star: ev.s_star,
        t_star: ev.t_star,
        theta2_used: Some(t2),
        warnings,
    })
}

/// Converse bound on the error probability of a code described by `q`.
pub fn compute_bound(q: &BoundQuery) -> Result<BoundResult> {
    attach(compute_inner(q), q)
}

/// Ways of turning a bound for one power constraint into one for another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// base(n+1, M, nΥ/(n+1))
    EqualToMaximalTight,
    /// base(n+1, M, Υ)
    EqualToMaximal,
    /// max over s of s·base(n, sM, Υ/(1−s))
    MaximalToAverage,
}

/// Applies a constraint transform to a bound evaluator `base(n, M, Υ)`.
pub fn constraint_transform<B>(
    kind: TransformKind,
    base: B,
    n: u32,
    m: f64,
    upsilon: f64,
    s: Option<f64>,
) -> Result<BoundResult>
where
    B: Fn(u32, f64, f64) -> Result<BoundResult>,
{
    if !(m > 1.0 && upsilon > 0.0) || n == 0 {
        return Err(Error::InvalidParams(format!("transform(n={n}, M={m}, upsilon={upsilon})")));
    }
    let nf = f64::from(n);
    match kind {
        TransformKind::EqualToMaximalTight => base(n + 1, m, nf * upsilon / (nf + 1.0)),
        TransformKind::EqualToMaximal => base(n + 1, m, upsilon),
        TransformKind::MaximalToAverage => {
            let at = |s: f64| -> Result<BoundResult> {
                let mut r = base(n, s * m, upsilon / (1.0 - s))?;
                r.value = Prob::from_ln((s.ln() + r.value.ln_p).min(0.0));
                r.s_star = Some(s);
                Ok(r)
            };
            let s = match s {
                Some(s) if s > 1.0 / m && s < 1.0 => s,
                Some(s) => return Err(Error::InvalidParams(format!("s = {s} outside (1/M, 1)"))),
                None => {
                    let lo = (1.0 + 1e-9) / m;
                    let key = |u: f64| at(u).map_or(f64::NEG_INFINITY, |r| r.value.ln_p);
                    scan_then_golden(key, lo, 1.0 - 1e-9, 40, 1e-9).0
                }
            };
            let mut r = at(s)?;
            r.bound_name = format!("{} (maximal-to-average transform)", r.bound_name);
            Ok(r)
        }
    }
}

/// Half-angle of a cone whose solid angle is a fraction 1/M of the sphere.
pub fn half_angle(n: u32, m: f64) -> Result<f64> {
    if n < 2 || !(m > 1.0) {
        return Err(Error::Domain(format!("half_angle(n={n}, M={m})")));
    }
    if n == 2 {
        return Ok(std::f64::consts::PI / m);
    }
    let p = (f64::from(n) - 1.0) / 2.0;
    let frac = |th: f64| -> f64 {
        let s2 = th.sin().powi(2);
        let half = 0.5 * reg_inc_beta(s2, p, 0.5).unwrap_or(f64::NAN);
        if th <= std::f64::consts::FRAC_PI_2 {
            half
        } else {
            1.0 - half
        }
    };
    let target = 1.0 / m;
    Ok(bisect(|th| frac(th) - target, 0.0, std::f64::consts::PI, 1e-12, 200))
}

/// Gaussian lower tail Pr[N(0,1) ≤ x].
fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that noise of per-dimension variance `noise_var_ratio`
/// moves the point (1,…,1) outside the cone of half-angle θ around it.
pub fn phi_n(n: u32, theta: f64, noise_var_ratio: f64) -> Result<Prob> {
    if n < 2 || !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) || !(noise_var_ratio > 0.0) {
        return Err(Error::Domain(format!("phi_n(n={n}, theta={theta}, var={noise_var_ratio})")));
    }
    let sd = noise_var_ratio.sqrt();
    let rn = f64::from(n).sqrt();
    let behind = normal_cdf(-rn / sd);
    if theta >= std::f64::consts::FRAC_PI_2 {
        return Ok(Prob::new(behind));
    }
    let tan2 = theta.tan().powi(2);
    let shape = (f64::from(n) - 1.0) / 2.0;
    let g = |u: f64| {
        let z = u / sd;
        let dens = (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let x = (rn + u).powi(2) * tan2 / noise_var_ratio;
        dens * gamma_q(shape, x / 2.0).map_or(f64::NAN, |p| p.value())
    };
    let lo = (-rn).max(-12.0 * sd);
    let hi = 12.0 * sd;
    let panels = 24;
    let breaks: Vec<f64> = (0..=panels).map(|k| lo + (hi - lo) * f64::from(k) / f64::from(panels)).collect();
    let inside = integrate_panels(&g, &breaks, 1e-13, 1e-12)?;
    Ok(Prob::new((behind + inside).clamp(0.0, 1.0)))
}

/// Cone-packing bound for codes on the sphere of energy nΥ.
pub fn cone_packing(n: u32, m: f64, upsilon: f64, sigma2: f64) -> Result<BoundResult> {
    let th = half_angle(n, m)?;
    let mut r = BoundResult::plain(phi_n(n, th, sigma2 / upsilon)?, "cone-packing (equal power)");
    r.t_star = Some(th);
    Ok(r)
}

/// Cone-packing bound lifted to the maximal power constraint by embedding
/// in one extra dimension.
pub fn cone_packing_maximal(n: u32, m: f64, upsilon: f64, sigma2: f64) -> Result<BoundResult> {
    let nf = f64::from(n);
    let th = half_angle(n + 1, m)?;
    let v = phi_n(n + 1, th, (nf + 1.0) * sigma2 / (nf * upsilon))?;
    let mut r = BoundResult::plain(v, "cone-packing (maximal power)");
    r.t_star = Some(th);
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    ErrorVsN,
    MaxrateVsN,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: u32,
    pub rate_bits: Option<f64>,
    pub m: Option<f64>,
    pub value: Option<Prob>,
    pub bound_name: Option<String>,
    pub method: Option<Method>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

fn sweep_point(mode: SweepMode, n: u32, template: &BoundQuery, target_eps: Option<f64>) -> SweepRow {
    let mut q = *template;
    q.n = n;
    let mut row = SweepRow {
        n,
        rate_bits: None,
        m: None,
        value: None,
        bound_name: None,
        method: None,
        error: None,
        warnings: Vec::new(),
    };
    match mode {
        SweepMode::ErrorVsN => {
            match q.size {
                CodeSize::Cardinality(m) => row.m = Some(m),
                CodeSize::RateBits(r) => row.rate_bits = Some(r),
            }
            match compute_bound(&q) {
                Ok(r) => {
                    row.value = Some(r.value);
                    row.bound_name = Some(r.bound_name);
                    row.method = Some(r.method_used);
                    row.warnings = r.warnings;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
        }
        SweepMode::MaxrateVsN => match maxrate(&q, target_eps) {
            Ok((r, res)) => {
                row.rate_bits = Some(r);
                row.value = Some(res.value);
                row.bound_name = Some(res.bound_name);
                row.method = Some(res.method_used);
                row.warnings = res.warnings;
            }
            Err(e) => row.error = Some(e.to_string()),
        },
    }
    row
}

/// Largest rate whose bound stays at or below ε, by bisection on R.
fn maxrate(q: &BoundQuery, target_eps: Option<f64>) -> Result<(f64, BoundResult)> {
    let eps = target_eps.ok_or_else(|| Error::InvalidParams("maxrate sweep needs a target error probability".into()))?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParams(format!("target eps = {eps}")));
    }
    let cap_bits = 0.5 * (q.upsilon() / SIGMA2).ln_1p() / std::f64::consts::LN_2;
    let ln_eps = eps.ln();
    let at = |r: f64| -> Result<BoundResult> {
        let mut qq = *q;
        qq.size = CodeSize::RateBits(r);
        compute_bound(&qq)
    };
    let (mut lo, mut hi) = (0.05 * cap_bits, 2.0 * cap_bits);
    let top = at(hi)?;
    if top.value.ln_p < ln_eps {
        return Err(Error::NoBracket(format!("bound stays below eps = {eps} up to R = {hi} bits")));
    }
    let mut bottom = at(lo)?;
    while bottom.value.ln_p > ln_eps {
        hi = lo;
        lo /= 4.0;
        if lo < 1e-6 * cap_bits {
            return Err(Error::NoBracket(format!("bound exceeds eps = {eps} already at R = {lo} bits")));
        }
        bottom = at(lo)?;
    }
    let mut best = bottom;
    let mut warnings = Vec::new();
    let mut last_lo_val = best.value.ln_p;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = at(mid)?;
        let v = r.value.ln_p;
        if (v - ln_eps).abs() <= 1e-4 * ln_eps.abs() {
            best = r;
            lo = mid;
            break;
        }
        if v <= ln_eps {
            if v < last_lo_val {
                warnings.push(format!("bound not monotone in R near {mid} bits"));
            }
            last_lo_val = v;
            lo = mid;
            best = r;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    best.warnings.extend(warnings);
    Ok((lo, best))
}

/// Bound values (or maximal rates at level ε) along a list of blocklengths.
/// Rows come back in the order of `ns` whatever the worker count.
pub fn sweep(
    mode: SweepMode,
    ns: &[u32],
    template: &BoundQuery,
    target_eps: Option<f64>,
    workers: usize,
) -> Result<Vec<SweepRow>> {
    if mode == SweepMode::MaxrateVsN && target_eps.is_none() {
        return Err(Error::InvalidParams("maxrate sweep needs a target error probability".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    Ok(pool.install(|| ns.par_iter().map(|&n| sweep_point(mode, n, template, target_eps)).collect()))
}
