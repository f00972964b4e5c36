//! Generalized Marcum-Q as a Poisson mixture of gamma tails.
//!
//! Q_m(a,b) = Σ_k w_k Q(m+k, b²/2) with w_k = e^{−λ} λ^k / k!, λ = a²/2.
//! The smaller tail is summed directly; gamma tails are advanced in their
//! stable direction (upper tail upward in k, lower tail downward).

use super::bessel::{asymptotic_ok, scaled_asymptotic};
use super::gamma::{ln_gamma_pq, ln_poisson_term};
use crate::logspace::{ln_add, Prob};
use crate::quad::integrate;

const LN_NEGLIGIBLE: f64 = 46.0;

fn ln_weight(k: f64, lambda: f64) -> f64 {
    ln_poisson_term(k, lambda)
}

/// Upper tail Σ_k w_k Q(m+k, x).
fn ln_upper(m: f64, lambda: f64, x: f64) -> f64 {
    let spread = 40.0 * lambda.sqrt() + 50.0;
    let k0 = (lambda - spread).max(0.0).max(rise_index(m, lambda, x)).floor();
    let (_, mut lq) = ln_gamma_pq(m + k0, x);
    let mut k = k0;
    let mut sum = f64::NEG_INFINITY;
    loop {
        let lw = ln_weight(k, lambda);
        sum = ln_add(sum, lw + lq);
        if k > lambda {
            // Poisson mass left, with Q ≤ 1
            let mut tail = lw + (lambda / (k + 1.0)).ln() - (1.0 - lambda / (k + 2.0)).ln();
            // Q(a+1,x)/Q(a,x) ≤ 1 + x/a bounds the term ratio; once it is
            // below one the rest is dominated by a geometric series
            let r = lambda / (k + 1.0) * (1.0 + x / (m + k));
            if r < 1.0 {
                tail = tail.min(lw + lq + r.ln() - (-r).ln_1p());
            }
            if tail < sum - LN_NEGLIGIBLE || tail == f64::NEG_INFINITY {
                break;
            }
        }
        lq = ln_add(lq, ln_poisson_term(m + k, x));
        k += 1.0;
    }
    sum
}

/// Index past which Σ w_k P(m+k, x) is negligible. P(a+1,x) ≤ x/(a+1)·P(a,x)
/// gives T_{k+1}/T_k ≤ λx/((k+1)(m+k+1)), so the terms shrink at least
/// this fast once the bound drops below one.
fn decay_index(m: f64, lambda: f64, x: f64) -> f64 {
    let c = lambda * x;
    // (k+1)(k+m+1) = c
    let s = m + 2.0;
    let k_s = ((-s + (s * s - 4.0 * (m + 1.0 - c)).max(0.0).sqrt()) / 2.0).max(0.0).ceil();
    let mut k = k_s;
    let mut acc = 0.0;
    while acc > -(LN_NEGLIGIBLE + 20.0) {
        acc += (c / ((k + 1.0) * (m + k + 1.0))).ln();
        k += 1.0;
    }
    k
}

/// Index below which Σ w_k Q(m+k, x) is negligible when x is far in the
/// upper tail. With Q(a,x) ≤ Γ(a)⁻¹x^a e^{−x}/(x−a+1) the terms obey
/// T_k/T_{k+1} ≤ (k+1)(m+k)/(λ(x−m−k+1)), which is below one under the peak.
fn rise_index(m: f64, lambda: f64, x: f64) -> f64 {
    let ratio = |k: f64| (k + 1.0) * (m + k) / (lambda * (x - m - k + 1.0));
    // largest k with ratio ≤ 1, by bisection on the increasing ratio
    let (mut lo, mut hi) = (0.0f64, (x - m).max(0.0));
    if hi < 1.0 || ratio(lo) > 1.0 {
        return 0.0;
    }
    while hi - lo > 1.0 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut k = lo.floor();
    let mut acc = 0.0;
    while k > 0.0 && acc > -(LN_NEGLIGIBLE + 20.0) {
        k -= 1.0;
        acc += ratio(k).ln();
    }
    k
}

/// Lower tail Σ_k w_k P(m+k, x).
fn ln_lower(m: f64, lambda: f64, x: f64) -> f64 {
    let spread = 40.0 * lambda.sqrt() + 50.0;
    let k_top = (lambda + spread).min(decay_index(m, lambda, x)).ceil();
    let (mut lp, _) = ln_gamma_pq(m + k_top, x);
    let mut k = k_top;
    let mut sum = f64::NEG_INFINITY;
    loop {
        let lw = ln_weight(k, lambda);
        sum = ln_add(sum, lw + lp);
        if k == 0.0 {
            break;
        }
        if k < lambda {
            let tail = lw - (1.0 - k / lambda).ln();
            if tail < sum - LN_NEGLIGIBLE {
                break;
            }
        }
        k -= 1.0;
        lp = ln_add(lp, ln_poisson_term(m + k, x));
    }
    sum
}

/// Whether the Poisson mixture is too wide to sum and the Bessel factor is
/// far enough in its asymptotic regime.
fn use_large_lambda(m: f64, a: f64, b: f64) -> bool {
    a * a / 2.0 >= 1e8 && a * b >= 1e6 && asymptotic_ok(m - 1.0, a * b)
}

/// Large-λ evaluation. With I_ν(z) = e^z S(z)/√(2πz) the defining integral
/// is ∫ φ(t−a)(t/a)^{m−½} S(at) dt, concentrated near t = a. The smaller
/// side is integrated with φ(b−a) factored out; None if quadrature fails.
fn marcum_large_lambda(m: f64, a: f64, b: f64) -> Option<Prob> {
    let c = b - a;
    let dir = c.signum();
    let (p, nu) = (m - 0.5, m - 1.0);
    // the weight e^{−|c|v − v²/2} is below e^{−70} past v_max
    let v_max = (140.0 / ((c * c + 140.0).sqrt() + c.abs())).min(b);
    let g = |v: f64| {
        let t = b + dir * v;
        (-c.abs() * v - 0.5 * v * v + p * ((c + dir * v) / a).ln_1p()).exp() * scaled_asymptotic(nu, a * t)
    };
    let integral = integrate(g, 0.0, v_max, 0.0, 1e-14).ok()?;
    let ln_small = -0.5 * c * c - 0.5 * (2.0 * std::f64::consts::PI).ln() + integral.ln();
    Some(if c >= 0.0 { Prob::from_ln(ln_small) } else { Prob::from_ln_complement(ln_small) })
}

/// Q_m(a,b) and its complement without argument checks.
pub(crate) fn marcum(m: f64, a: f64, b: f64) -> Prob {
    if a > 0.0 && b > 0.0 && b.is_finite() && use_large_lambda(m, a, b) {
        if let Some(q) = marcum_large_lambda(m, a, b) {
            return q;
        }
    }
    marcum_series(m, a, b)
}

fn marcum_series(m: f64, a: f64, b: f64) -> Prob {
    if b == 0.0 {
        return Prob::ONE;
    }
    if b.is_infinite() {
        return Prob::ZERO;
    }
    let x = b * b / 2.0;
    if a == 0.0 {
        let (lp, lq) = ln_gamma_pq(m, x);
        return Prob { ln_p: lq, ln_q: lp };
    }
    let lambda = a * a / 2.0;
    if x > m + lambda {
        Prob::from_ln(ln_upper(m, lambda, x))
    } else {
        Prob::from_ln_complement(ln_lower(m, lambda, x))
    }
}
