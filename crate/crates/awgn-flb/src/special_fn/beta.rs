//! Regularized incomplete beta function.

use super::gamma::ln_gamma;

fn betacf(p: f64, q: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = p + q;
    let qap = p + 1.0;
    let qam = p - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..100_000 {
        let m = f64::from(m);
        let m2 = 2.0 * m;
        let aa = m * (q - m) * x / ((qam + m2) * (p + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(p + m) * (qab + m) * x / ((p + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// I_x(p, q) without argument checks.
pub(crate) fn inc_beta(x: f64, p: f64, q: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(p + q) - ln_gamma(p) - ln_gamma(q) + p * x.ln() + q * (-x).ln_1p();
    if x < (p + 1.0) / (p + q + 2.0) {
        (ln_front + betacf(p, q, x).ln()).exp() / p
    } else {
        1.0 - (ln_front + betacf(q, p, 1.0 - x).ln()).exp() / q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arcsine_law() {
        for &x in &[0.1, 0.25, 0.5, 0.9] {
            let want = 2.0 / std::f64::consts::PI * f64::sqrt(x).asin();
            assert!((inc_beta(x, 0.5, 0.5) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn integer_parameters() {
        // I_x(1, q) = 1 − (1−x)^q
        for &x in &[0.05, 0.4, 0.8] {
            let want = 1.0 - (1.0f64 - x).powi(5);
            assert!((inc_beta(x, 1.0, 5.0) - want).abs() < 1e-14);
        }
    }
}
