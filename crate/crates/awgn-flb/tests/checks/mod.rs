//! Worst-case gaps between the crate and the reference computations in
//! `common`, shared by the oracle tests and the acceptance runner.

#![allow(dead_code)]

use crate::common;
use awgn_flb::envelope::f_envelope;
use awgn_flb::ht_core::{f_derivatives, f_exact, solve_t_for_beta, FDerivatives, TestParams};
use awgn_flb::special_fn::marcum_q;
use awgn_flb::LogValue;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest error seen and where.
#[derive(Debug, Default)]
pub struct Worst {
    pub err: f64,
    pub at: String,
}

impl Worst {
    pub fn record(&mut self, err: f64, at: impl FnOnce() -> String) {
        if err.is_nan() || err > self.err {
            self.err = err;
            self.at = at();
        }
    }
}

impl std::fmt::Display for Worst {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "worst {:.3e} at {}", self.err, self.at)
    }
}

/// Relative error of `marcum_q` against the defining integral on random
/// triples m ∈ [0.5, 12], a ∈ [0, 12] (one in ten at a = 0), b ∈ [0.1, 20].
pub fn marcum_vs_integral(count: usize) -> Worst {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut w = Worst::default();
    for _ in 0..count {
        let m = rng.gen_range(0.5..12.0);
        let a = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..12.0) };
        let b = rng.gen_range(0.1..20.0);
        let got = marcum_q(m, a, b).unwrap().value();
        let want = common::marcum_q(m, a, b);
        w.record((got / want - 1.0).abs(), || format!("Q_{m}({a}, {b}): {got:e} vs {want:e}"));
    }
    w
}

/// Relative error of `f_exact` against the noncentral χ² oracle, n ≤ 8.
pub fn f_exact_vs_oracle() -> Worst {
    let mut w = Worst::default();
    for n in 1..=8u32 {
        for &(gamma, theta2) in &[(0.0, 1.5), (0.3, 1.3), (2.0, 3.0), (2.0, 1.4), (10.0, 11.0)] {
            let p = TestParams::new(n, gamma, 1.0, theta2).unwrap();
            for &beta in &[0.3, 1e-2, 1e-5, 1e-10] {
                let got = f_exact(&p, LogValue::new(beta)).unwrap().value();
                let want = common::f_oracle(n, gamma, 1.0, theta2, beta);
                w.record((got / want - 1.0).abs(), || {
                    format!("n={n} gamma={gamma} theta2={theta2} beta={beta}: {got:e} vs {want:e}")
                });
            }
        }
    }
    w
}

fn f_clamped(n: u32, gamma: f64, s2: f64, t2: f64, beta: f64) -> f64 {
    if beta <= 0.0 {
        return 1.0;
    }
    if beta >= 1.0 {
        return 0.0;
    }
    f_exact(&TestParams::new(n, gamma, s2, t2).unwrap(), LogValue::new(beta)).unwrap().value()
}

/// 200 × 200 samples: a β = 0 column plus log-spaced β down to 1e-12, and a
/// γ = 0 row plus energies up to 20.
pub fn hull_oracle(n: u32, s2: f64, t2: f64) -> common::HullOracle {
    let mut betas = vec![0.0];
    betas.extend((0..199).map(|i| 10f64.powf(-12.0 + 12.0 * f64::from(i) / 198.0)));
    let mut gammas = vec![0.0];
    gammas.extend((0..199).map(|j| 20.0 * (f64::from(j + 1) / 199.0).powi(2)));
    let values = gammas.iter().map(|&g| betas.iter().map(|&b| f_clamped(n, g, s2, t2, b)).collect()).collect();
    common::HullOracle { betas, gammas, values }
}

/// Absolute gap between `f_envelope` and the grid hull at n = 6, σ² = 1, θ² = 2.
pub fn envelope_vs_hull() -> Worst {
    let (n, s2, t2) = (6, 1.0, 2.0);
    let oracle = hull_oracle(n, s2, t2);
    let mut w = Worst::default();
    for &u in &[0.25, 0.5, 1.0, 2.0, 4.0] {
        for k in 1..=16 {
            let beta = 10f64.powf(-0.5 * f64::from(k));
            let got = f_envelope(n, u, s2, t2, LogValue::new(beta)).unwrap().value.value();
            let want = oracle.envelope(beta, u);
            w.record((got - want).abs(), || format!("upsilon={u} beta={beta:e}: {got} vs {want}"));
        }
    }
    w
}

/// f, or −(1−f) when `complement` is set; both have the derivatives of f,
/// the second keeps full precision when f is near one.
fn f_repr(n: u32, gamma: f64, theta2: f64, beta: f64, complement: bool) -> f64 {
    let p = f_exact(&TestParams::new(n, gamma, 1.0, theta2).unwrap(), LogValue::new(beta)).unwrap();
    if complement {
        -p.ln_q.exp()
    } else {
        p.value()
    }
}

fn t_star(n: u32, gamma: f64, theta2: f64, beta: f64) -> f64 {
    solve_t_for_beta(&TestParams::new(n, gamma, 1.0, theta2).unwrap(), LogValue::new(beta)).unwrap()
}

fn derivs(n: u32, gamma: f64, theta2: f64, beta: f64) -> FDerivatives {
    f_derivatives(&TestParams::new(n, gamma, 1.0, theta2).unwrap(), LogValue::new(beta)).unwrap()
}

/// Central difference with one Richardson step.
fn central<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
    let d2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h;
    (4.0 * d2 - d1) / 3.0
}

/// One-sided second-order forward difference with one Richardson step.
fn forward<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let d = |h: f64| (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Second β-derivative through f_β = −exp(A − c·t²/2), A independent of β:
/// f_ββ = −(c/2)·f_β·d(t²)/dβ, with the threshold differenced instead of f_β.
fn d2_beta_via_threshold(n: u32, gamma: f64, theta2: f64, beta: f64, df_dbeta: f64) -> f64 {
    let c = (theta2 - 1.0) / theta2;
    let dt2 = central(|b| t_star(n, gamma, theta2, b).powi(2), beta, 1e-3 * beta);
    -0.5 * c * df_dbeta * dt2
}

/// Whether a central difference of f_β with step h resolves f_ββ to well
/// below 1e-6 in double precision.
fn resolvable(df: f64, d2: f64, h: f64) -> bool {
    8.0 * f64::EPSILON * df.abs() / (d2.abs() * h) < 1e-8
}

/// Relative gaps of every closed-form derivative against differences. At
/// γ = 0 the γ-differences are one-sided.
pub fn derivatives_vs_differences(at_origin: bool) -> Worst {
    let mut w = Worst::default();
    let cases: &[(f64, f64)] =
        if at_origin { &[(0.0, 1.5), (0.0, 4.0)] } else { &[(0.7, 1.9), (3.0, 4.0), (10.0, 11.0)] };
    for &n in &[1u32, 2, 5, 12] {
        for &(gamma, theta2) in cases {
            for &beta in &[0.2, 1e-3, 1e-6] {
                let d = derivs(n, gamma, theta2, beta);
                assert_eq!(d.at_origin, at_origin);
                let hb = 1e-3 * beta;
                let q = f_repr(n, gamma, theta2, beta, false) > 0.5;
                let dgamma = |f: &dyn Fn(f64) -> f64| {
                    if at_origin {
                        forward(f, 0.0, 1e-4)
                    } else {
                        central(f, gamma, 1e-3 * gamma)
                    }
                };
                let mut pairs = vec![
                    ("df/dbeta", d.df_dbeta, central(|b| f_repr(n, gamma, theta2, b, q), beta, hb)),
                    ("df/dgamma", d.df_dgamma, dgamma(&|g| f_repr(n, g, theta2, beta, q))),
                    ("d2f/dbeta2 via threshold", d.d2f_dbeta2, d2_beta_via_threshold(n, gamma, theta2, beta, d.df_dbeta)),
                    ("d2f/dgamma2", d.d2f_dgamma2, dgamma(&|g| derivs(n, g, theta2, beta).df_dgamma)),
                    ("d2f/dbeta dgamma", d.d2f_dbeta_dgamma, dgamma(&|g| derivs(n, g, theta2, beta).df_dbeta)),
                ];
                if resolvable(d.df_dbeta, d.d2f_dbeta2, hb) {
                    pairs.push(("d2f/dbeta2", d.d2f_dbeta2, central(|b| derivs(n, gamma, theta2, b).df_dbeta, beta, hb)));
                }
                for (name, got, want) in pairs {
                    w.record(((got - want) / want).abs(), || {
                        format!("{name} n={n} gamma={gamma} theta2={theta2} beta={beta}: {got:e} vs {want:e}")
                    });
                }
            }
        }
    }
    w
}
