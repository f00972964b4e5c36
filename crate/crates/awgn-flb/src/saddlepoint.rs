//! Cumulant function of the log-likelihood ratio, the uniform saddlepoint
//! expansion of f(β, γ), the exponent-achieving variance and the
//! sphere-packing exponent.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ht_core::{order_key, TestParams};
use crate::logspace::{LogValue, Prob, SignedLogSum};
use crate::optim::{bisect, scan_then_golden};
use crate::special_fn::psi_stable;

/// κ(s) and its first three derivatives, plus the expansion factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddlepointState {
    pub s: f64,
    pub kappa: f64,
    pub dkappa: f64,
    pub d2kappa: f64,
    pub d3kappa: f64,
    pub eta: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub a_corr: f64,
    pub b_corr: f64,
}

/// Which correction factors enter the expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpVariant {
    Full,
    Hat,
}

pub fn kappa_set(s: f64, gamma: f64, sigma2: f64, theta2: f64) -> Result<SaddlepointState> {
    let delta = theta2 - sigma2;
    let eta = s * theta2 + (1.0 - s) * sigma2;
    if !(eta > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("eta(s={s}) = {eta}")));
    }
    let kappa = gamma * s * (s - 1.0) / (2.0 * eta)
        + 0.5 * (s * theta2.ln() + (1.0 - s) * sigma2.ln() - eta.ln());
    let dkappa = gamma * (s * s * theta2 - (1.0 - s).powi(2) * sigma2) / (2.0 * eta * eta) - delta / (2.0 * eta)
        + 0.5 * (theta2 / sigma2).ln();
    let d2kappa = gamma * theta2 * sigma2 / eta.powi(3) + delta * delta / (2.0 * eta * eta);
    let d3kappa = -(3.0 * gamma * theta2 * sigma2 * delta / eta.powi(4) + delta.powi(3) / eta.powi(3));
    Ok(SaddlepointState {
        s,
        kappa,
        dkappa,
        d2kappa,
        d3kappa,
        eta,
        lambda_a: 0.0,
        lambda_b: 0.0,
        a_corr: 0.0,
        b_corr: 0.0,
    })
}

fn sgn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Correction factor sgn(u)·(Ψ(λ) + c·n u³/6·((λ⁻¹ − λ⁻³)/√(2π) − Ψ(λ))·κ‴)
/// with λ = |u|√(nκ″) and c = ±1. The u³λ⁻³ product is coded in closed
/// form so that u = 0 yields the limit consistent with sgn(0) = 1.
fn corr_factor(u: f64, c: f64, n: f64, k2: f64, k3: f64, variant: SpVariant) -> (f64, f64) {
    let su = sgn(u);
    let root = (n * k2).sqrt();
    let lambda = u.abs() * root;
    let psi = psi_stable(lambda);
    let val = match variant {
        SpVariant::Hat => su * psi,
        SpVariant::Full => {
            let u3_poly = (u * u * su / root - su / (root * root * root)) / (2.0 * PI).sqrt();
            su * (psi + c * n * k3 / 6.0 * (u3_poly - u.powi(3) * psi))
        }
    };
    (lambda, val)
}

fn with_corrections(mut st: SaddlepointState, n: f64, variant: SpVariant) -> SaddlepointState {
    // (s−1)³ = −(1−s)³ for the a factor
    let (la, a) = corr_factor(1.0 - st.s, -1.0, n, st.d2kappa, st.d3kappa, variant);
    let (lb, b) = corr_factor(st.s, 1.0, n, st.d2kappa, st.d3kappa, variant);
    st.lambda_a = la;
    st.lambda_b = lb;
    st.a_corr = a;
    st.b_corr = b;
    st
}

/// Objective of the expansion at one s, as a signed log sum.
fn sp_objective(st: &SaddlepointState, n: f64, ln_beta: f64) -> SignedLogSum {
    let mut acc = SignedLogSum::default();
    let e1 = n * (st.kappa + (1.0 - st.s) * st.dkappa);
    let e2 = n * st.dkappa;
    acc.add_value(st.a_corr + st.b_corr, e1);
    if st.s > 1.0 {
        acc.add(true, 0.0);
    }
    if st.s < 0.0 {
        acc.add(true, e2);
    }
    acc.add(false, ln_beta + e2);
    acc
}

/// Result of a maximization over the tilt s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpResult {
    pub value: Prob,
    pub s_star: f64,
    pub theta2: f64,
}

fn maximize_over_s<F: Fn(f64) -> f64>(key: F, s_min: f64, lo0: f64, hi0: f64) -> Result<(f64, f64)> {
    let mut lo = lo0.max(s_min + 1e-9 * (1.0 + s_min.abs()));
    let mut hi = hi0;
    for _ in 0..60 {
        let pts = ((hi - lo) * 150.0).clamp(300.0, 3000.0) as usize;
        let (s, k) = scan_then_golden(&key, lo, hi, pts, 1e-11);
        let span = hi - lo;
        let at_hi = hi - s < 2.0 * span / pts as f64;
        let at_lo = s - lo < 2.0 * span / pts as f64 && lo > s_min + 1e-9 * (1.0 + s_min.abs());
        if at_hi && hi < 1e4 {
            hi = 1.0 + 2.0 * (hi - 1.0).max(1.0);
            continue;
        }
        if at_lo {
            let next = if lo > -1e4 { -2.0 * lo.abs().max(1.0) } else { lo };
            let floor = s_min + 1e-9 * (1.0 + s_min.abs());
            let next = next.max(floor);
            if next < lo {
                lo = next;
                continue;
            }
        }
        if !k.is_finite() && k < 0.0 {
            return Err(Error::NoConvergence { iterations: 0, lo, hi });
        }
        return Ok((s, k));
    }
    Err(Error::NoConvergence { iterations: 60, lo, hi })
}

fn key_to_prob(k: f64) -> Prob {
    if k <= -1e199 {
        Prob::ZERO
    } else {
        Prob::from_ln(k.min(0.0))
    }
}

/// Saddlepoint approximation of f(β, γ) maximized over s.
pub fn f_saddlepoint(params: &TestParams, beta: LogValue, variant: SpVariant) -> Result<SpResult> {
    params.validate()?;
    let lb = beta.ln();
    if !(lb < 0.0 && lb > f64::NEG_INFINITY) {
        return Err(Error::Domain(format!("ln beta = {lb}")));
    }
    let n = params.nf();
    let (g, s2, t2) = (params.gamma, params.sigma2, params.theta2);
    let key = |s: f64| match kappa_set(s, g, s2, t2) {
        Ok(st) => {
            let st = with_corrections(st, n, variant);
            let (sg, l) = sp_objective(&st, n, lb).result();
            order_key(sg, l)
        }
        Err(_) => f64::NEG_INFINITY,
    };
    let s_min = -s2 / params.delta();
    let (s, k) = maximize_over_s(key, s_min, -1.0, 2.0)?;
    Ok(SpResult { value: key_to_prob(k), s_star: s, theta2: t2 })
}

/// Exponent-achieving output variance θ̃ₛ².
pub fn theta_tilde(s: f64, gamma: f64, sigma2: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("theta_tilde(s={s})")));
    }
    let h = gamma / 2.0 - sigma2 / (2.0 * s);
    Ok(sigma2 + h + (h * h + gamma * sigma2).sqrt())
}

fn theta_tilde_unchecked(s: f64, gamma: f64, sigma2: f64) -> f64 {
    let h = gamma / 2.0 - sigma2 / (2.0 * s);
    // σ² + h + √(h² + γσ²), written to avoid cancellation when h ≪ 0
    if h < 0.0 {
        sigma2 + gamma * sigma2 / ((h * h + gamma * sigma2).sqrt() - h)
    } else {
        sigma2 + h + (h * h + gamma * sigma2).sqrt()
    }
}

/// Saddlepoint expansion with θ = θ̃ₛ substituted at every s.
pub fn f_saddlepoint_exponent(n: u32, gamma: f64, sigma2: f64, beta: LogValue) -> Result<SpResult> {
    let lb = beta.ln();
    if !(lb < 0.0 && lb > f64::NEG_INFINITY) || n == 0 || !(sigma2 > 0.0) || !(gamma > 0.0) {
        return Err(Error::Domain(format!("f_saddlepoint_exponent(n={n}, gamma={gamma}, ln beta={lb})")));
    }
    let nf = f64::from(n);
    let key = |s: f64| {
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let t2 = theta_tilde_unchecked(s, gamma, sigma2);
        match kappa_set(s, gamma, sigma2, t2) {
            Ok(st) => {
                let st = with_corrections(st, nf, SpVariant::Full);
                let (sg, l) = sp_objective(&st, nf, lb).result();
                order_key(sg, l)
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let (s, k) = maximize_over_s(key, 0.0, 1e-6, 2.0)?;
    Ok(SpResult {
        value: key_to_prob(k),
        s_star: s,
        theta2: theta_tilde_unchecked(s, gamma, sigma2),
    })
}

/// Augustin capacity C_s in nats.
pub fn augustin_capacity(s: f64, upsilon: f64, sigma2: f64) -> f64 {
    if s == 1.0 {
        return 0.5 * (upsilon / sigma2).ln_1p();
    }
    let t2 = theta_tilde_unchecked(s, upsilon, sigma2);
    let eta = s * t2 + (1.0 - s) * sigma2;
    s * upsilon / (2.0 * eta) + 0.5 * (s * t2.ln() + (1.0 - s) * sigma2.ln() - eta.ln()) / (s - 1.0)
}

/// Sphere-packing exponent report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentReport {
    pub rate_nats: f64,
    pub s_star: f64,
    pub esp: f64,
    pub theta_tilde2: f64,
    pub augustin: f64,
    pub critical_rate_nats: f64,
}

fn esp_argmax(rate: f64, upsilon: f64, sigma2: f64) -> (f64, f64) {
    let h = |s: f64| (1.0 - s) / s * (augustin_capacity(s, upsilon, sigma2) - rate);
    let (s, v) = scan_then_golden(h, 1e-9, 1.0 - 1e-9, 200, 1e-10);
    (s, v.max(0.0))
}

/// Rate at which the sphere-packing maximizer sits at s = 1/2.
pub fn critical_rate(upsilon: f64, sigma2: f64) -> f64 {
    let cap = 0.5 * (upsilon / sigma2).ln_1p();
    bisect(|r| esp_argmax(r, upsilon, sigma2).0 - 0.5, 1e-9, cap - 1e-9, 1e-7, 200)
}

pub fn sphere_packing(rate_nats: f64, upsilon: f64, sigma2: f64) -> Result<ExponentReport> {
    if !(rate_nats > 0.0 && upsilon > 0.0 && sigma2 > 0.0) {
        return Err(Error::Domain(format!("sphere_packing(R={rate_nats}, upsilon={upsilon})")));
    }
    let cap = 0.5 * (upsilon / sigma2).ln_1p();
    let rcr = critical_rate(upsilon, sigma2);
    if rate_nats >= cap {
        return Ok(ExponentReport {
            rate_nats,
            s_star: 1.0,
            esp: 0.0,
            theta_tilde2: upsilon + sigma2,
            augustin: cap,
            critical_rate_nats: rcr,
        });
    }
    let (s, esp) = esp_argmax(rate_nats, upsilon, sigma2);
    Ok(ExponentReport {
        rate_nats,
        s_star: s,
        esp,
        theta_tilde2: theta_tilde_unchecked(s, upsilon, sigma2),
        augustin: augustin_capacity(s, upsilon, sigma2),
        critical_rate_nats: rcr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_vanishes_at_zero_and_one() {
        for &(g, t2) in &[(2.0, 3.0), (10.0, 11.0), (0.0, 1.5)] {
            assert_eq!(kappa_set(0.0, g, 1.0, t2).unwrap().kappa, 0.0);
            assert!(kappa_set(1.0, g, 1.0, t2).unwrap().kappa.abs() < 1e-15);
        }
        assert!(kappa_set(-0.6, 2.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn theta_tilde_examples() {
        assert!((theta_tilde(1.0, 7.0, 1.0).unwrap() - 8.0).abs() < 1e-14);
        assert!((theta_tilde(0.3, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((theta_tilde(0.5, 2.0, 1.0).unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-14);
        assert!(theta_tilde(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn capacity_anchors() {
        let bits = |x: f64| x / 2f64.ln();
        let c10 = bits(0.5 * 11f64.ln());
        assert!((c10 - 1.73).abs() < 0.005);
        let u5 = 10f64.powf(0.5);
        let rep = sphere_packing(0.1, u5, 1.0).unwrap();
        assert!((bits(rep.critical_rate_nats) - 0.577).abs() < 0.005, "{}", bits(rep.critical_rate_nats));
        let at_cap = sphere_packing(0.5 * u5.ln_1p(), u5, 1.0).unwrap();
        assert_eq!(at_cap.esp, 0.0);
    }

    #[test]
    fn augustin_continuous_at_one() {
        let u = 10.0;
        let near = augustin_capacity(1.0 - 1e-7, u, 1.0);
        assert!((near - augustin_capacity(1.0, u, 1.0)).abs() < 1e-6);
    }
}
