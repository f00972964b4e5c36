//! Modified Bessel function of the first kind, in log form.

use std::f64::consts::PI;

use super::gamma::ln_poisson_term;
use crate::logspace::ln_add;

/// Rough location of the largest term of the power series.
fn series_peak(nu: f64, x: f64) -> f64 {
    ((nu * nu + x * x).sqrt() - nu) / 2.0
}

fn ln_series(nu: f64, x: f64) -> f64 {
    let y = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= y / (k * (nu + k));
        sum += term;
        if term < sum * 1e-17 && k > y.sqrt() {
            break;
        }
    }
    // (x/2)^ν / Γ(ν+1) = e^{x/2} · poisson_term(ν, x/2)
    let lead = if nu > -1.0 && nu < 0.0 {
        nu * (x / 2.0).ln() - super::gamma::ln_gamma(nu + 1.0)
    } else {
        ln_poisson_term(nu, x / 2.0) + x / 2.0
    };
    lead + sum.ln()
}

/// Continued-fraction / Wronskian evaluation for x ≥ 2 and ν ≥ 0.
fn ln_cf(nu: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-16;
    const FPMIN: f64 = 1e-300;
    let nl = (nu + 0.5).floor();
    let xmu = nu - nl;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    // I'_ν / I_ν
    let mut h = (nu * xi).max(FPMIN);
    let mut b = xi2 * nu;
    let mut d = 0.0;
    let mut c = h;
    for _ in 0..50_000_000u64 {
        b += xi2;
        d = 1.0 / (b + d);
        c = b + 1.0 / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }

    // Downward recurrence to order μ with rescaling.
    let mut ril = 1.0f64;
    let mut ripl = h;
    let mut ln_scale = 0.0;
    let mut fact = nu * xi;
    let mut l = nl;
    while l >= 1.0 {
        let ritemp = fact * ril + ripl;
        fact -= xi;
        ripl = fact * ritemp + ril;
        ril = ritemp;
        if ril.abs() > 1e250 {
            ril *= 1e-250;
            ripl *= 1e-250;
            ln_scale += 250.0 * std::f64::consts::LN_10;
        }
        l -= 1.0;
    }
    let f = ripl / ril;

    // Steed's CF2 for K_μ, K_{μ+1}, both scaled by e^{x}.
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - xmu2;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..100_000 {
        let fi = f64::from(i);
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let kmu = (PI / (2.0 * x)).sqrt() / s;
    let k1 = kmu * (xmu + x + 0.5 - h) * xi;
    let kmup = xmu * xi * kmu - k1;
    let ln_imu = x - x.ln() - (f * kmu - kmup).ln();
    ln_imu - ril.abs().ln() - ln_scale
}

/// √(2πx)·e^{−x}·I_ν(x) from the Hankel asymptotic series.
pub(super) fn scaled_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 1..40 {
        let odd = 2.0 * f64::from(k) - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * f64::from(k) * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Whether the Hankel series is accurate to rounding: consecutive terms
/// shrink by at least 2000 and the neglected e^{−2x} part is invisible.
pub(super) fn asymptotic_ok(nu: f64, x: f64) -> bool {
    x >= 1e4_f64.max(1e3 * nu * nu)
}

/// ln I_ν(x) for ν > −1, x ≥ 0 (no argument checks).
pub(crate) fn ln_bessel_i(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 {
            0.0
        } else if nu > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
    }
    if asymptotic_ok(nu, x) {
        return x - 0.5 * (2.0 * PI * x).ln() + scaled_asymptotic(nu, x).ln();
    }
    if x < 2.0 || series_peak(nu, x) < 60.0 {
        return ln_series(nu, x);
    }
    if nu < 0.0 {
        // I_ν = I_{ν+2} + 2(ν+1)/x · I_{ν+1}, all terms positive for ν > −1.
        let i1 = ln_bessel_i(nu + 1.0, x);
        let i2 = ln_bessel_i(nu + 2.0, x);
        return ln_add(i2, (2.0 * (nu + 1.0) / x).ln() + i1);
    }
    ln_cf(nu, x)
}
