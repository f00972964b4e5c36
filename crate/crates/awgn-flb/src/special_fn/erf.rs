//! Scaled Gaussian tail Ψ(λ) = Q(|λ|) e^{λ²/2}.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// e^{z²} erfc(z) for z ≥ 0.
#[must_use]
pub fn erfcx(z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z < 10.0 {
        let hi = z * z;
        let lo = z.mul_add(z, -hi);
        libm::erfc(z) * hi.exp() * (1.0 + lo)
    } else {
        // Laplace continued fraction, evaluated bottom-up.
        let mut frac = 0.0;
        for k in (1..=60).rev() {
            frac = (f64::from(k) / 2.0) / (z + frac);
        }
        1.0 / ((z + frac) * PI.sqrt())
    }
}

/// Ψ(λ) = Q(|λ|) e^{λ²/2}; never overflows.
#[must_use]
pub fn psi_stable(lambda: f64) -> f64 {
    0.5 * erfcx(lambda.abs() * FRAC_1_SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches_meet() {
        let z: f64 = 10.0;
        let cf = {
            let mut frac = 0.0;
            for k in (1..=60).rev() {
                frac = (f64::from(k) / 2.0) / (z + frac);
            }
            1.0 / ((z + frac) * PI.sqrt())
        };
        let direct = libm::erfc(z) * (z * z).exp();
        assert!((cf / direct - 1.0).abs() < 1e-13);
    }

    #[test]
    fn psi_limits() {
        assert_eq!(psi_stable(0.0), 0.5);
        assert_eq!(psi_stable(-3.0), psi_stable(3.0));
        let l = 1e6;
        let want = 1.0 / (l * (2.0 * PI).sqrt());
        assert!((psi_stable(l) / want - 1.0).abs() < 1e-11);
    }
}
