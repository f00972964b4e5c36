//! Binary test between i.i.d. N(√γ, σ²) and N(0, θ²): the trade-off
//! f(β, γ) in parametric and non-parametric form, its derivatives, and the
//! decision-sphere geometry.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::logspace::{LogValue, Prob, SignedLogSum};
use crate::optim::{golden_max, scan_then_golden};
use crate::special_fn::{ln_bessel_i, ln_gamma, marcum};

/// Parameters (n, γ, σ², θ²) of the binary test; requires θ² > σ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestParams {
    pub n: u32,
    pub gamma: f64,
    pub sigma2: f64,
    pub theta2: f64,
}

impl TestParams {
    pub fn new(n: u32, gamma: f64, sigma2: f64, theta2: f64) -> Result<Self> {
        let p = TestParams { n, gamma, sigma2, theta2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams("n must be positive".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidParams(format!("gamma = {}", self.gamma)));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::InvalidParams(format!("sigma2 = {}", self.sigma2)));
        }
        if !(self.theta2.is_finite() && self.theta2 > self.sigma2) {
            return Err(Error::InvalidParams(format!(
                "theta2 = {} must exceed sigma2 = {}",
                self.theta2, self.sigma2
            )));
        }
        Ok(())
    }

    #[must_use]
    pub fn with_gamma(&self, gamma: f64) -> Self {
        TestParams { gamma, ..*self }
    }

    #[must_use]
    pub fn delta(&self) -> f64 {
        self.theta2 - self.sigma2
    }

    pub(crate) fn nf(&self) -> f64 {
        f64::from(self.n)
    }

    pub(crate) fn m(&self) -> f64 {
        self.nf() / 2.0
    }

    pub(crate) fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub(crate) fn theta(&self) -> f64 {
        self.theta2.sqrt()
    }

    /// Noncentrality of the statistic under the channel hypothesis.
    pub(crate) fn a(&self) -> f64 {
        (self.nf() * self.gamma).sqrt() * self.sigma() / self.delta()
    }

    /// Noncentrality under the auxiliary hypothesis.
    pub(crate) fn a_bar(&self) -> f64 {
        (self.nf() * self.gamma).sqrt() * self.theta() / self.delta()
    }

    pub(crate) fn alpha_at(&self, t: f64) -> Prob {
        marcum(self.m(), self.a(), t / self.sigma())
    }

    pub(crate) fn beta_at(&self, t: f64) -> Prob {
        marcum(self.m(), self.a_bar(), t / self.theta()).flip()
    }

    /// Log-likelihood threshold t′ associated with t.
    #[must_use]
    pub fn t_prime(&self, t: f64) -> f64 {
        let n = self.nf();
        let d = self.delta();
        n * (self.theta() / self.sigma()).ln() + 0.5 * n * self.gamma / d
            - d * t * t / (2.0 * self.sigma2 * self.theta2)
    }

    /// ln dβ/dt.
    pub(crate) fn ln_dbeta_dt(&self, t: f64) -> f64 {
        let m = self.m();
        let bb = t / self.theta();
        let lth = self.theta().ln();
        if self.gamma == 0.0 {
            return -lth + (2.0 * m - 1.0) * bb.ln() - (m - 1.0) * 2f64.ln() - bb * bb / 2.0 - ln_gamma(m);
        }
        let ab = self.a_bar();
        -lth + m * bb.ln() - (m - 1.0) * ab.ln() - (ab * ab + bb * bb) / 2.0 + ln_bessel_i(m - 1.0, ab * bb)
    }
}

/// A point (α, β) of the trade-off at threshold t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub t: f64,
    pub t_prime: f64,
    pub alpha: Prob,
    pub beta: Prob,
}

pub fn tradeoff_at(params: &TestParams, t: f64) -> Result<TradeoffPoint> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t = {t}")));
    }
    Ok(TradeoffPoint {
        t,
        t_prime: params.t_prime(t),
        alpha: params.alpha_at(t),
        beta: params.beta_at(t),
    })
}

/// Threshold t⋆ with β(γ, t⋆) = β, by doubling and safeguarded Newton in ln t.
pub fn solve_t_for_beta(params: &TestParams, beta: LogValue) -> Result<f64> {
    params.validate()?;
    let target = beta.ln();
    if target.is_nan() || target > 0.0 {
        return Err(Error::Domain(format!("ln beta = {target}")));
    }
    if target == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if target == 0.0 {
        return Ok(f64::INFINITY);
    }
    let g = |t: f64| params.beta_at(t).ln_p - target;

    let mut t = params.theta() * (params.a_bar() + params.nf().sqrt());
    let mut gt = g(t);
    let (mut lo, mut hi);
    if gt < 0.0 {
        lo = t;
        hi = t;
        loop {
            hi *= 2.0;
            let gh = g(hi);
            if gh >= 0.0 {
                break;
            }
            lo = hi;
            if hi > 1e300 {
                return Err(Error::NoConvergence { iterations: 0, lo, hi });
            }
        }
    } else {
        hi = t;
        lo = t;
        loop {
            lo /= 2.0;
            let gl = g(lo);
            if gl < 0.0 {
                break;
            }
            hi = lo;
            if lo < 1e-300 {
                return Err(Error::NoConvergence { iterations: 0, lo, hi });
            }
        }
    }
    t = (lo * hi).sqrt();
    gt = g(t);
    for it in 0..200 {
        if gt.abs() <= 1e-13 {
            return Ok(t);
        }
        if gt < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if (hi - lo) <= 4.0 * f64::EPSILON * hi {
            return Ok(t);
        }
        let slope = t * (params.ln_dbeta_dt(t) - params.beta_at(t).ln_p).exp();
        let mut next = if slope.is_finite() && slope > 0.0 {
            t * (-gt / slope).exp()
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        }
        if it > 100 {
            next = 0.5 * (lo + hi);
        }
        t = next;
        gt = g(t);
        if gt.is_nan() {
            return Err(Error::NoConvergence { iterations: it, lo, hi });
        }
    }
    Err(Error::NoConvergence { iterations: 200, lo, hi })
}

/// f(β, γ) = α(γ, t⋆).
pub fn f_exact(params: &TestParams, beta: LogValue) -> Result<Prob> {
    params.validate()?;
    if beta.ln() >= 0.0 {
        return Ok(Prob::ZERO);
    }
    if beta.ln() == f64::NEG_INFINITY {
        return Ok(Prob::ONE);
    }
    let t = solve_t_for_beta(params, beta)?;
    Ok(params.alpha_at(t))
}

/// Objective of the non-parametric form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NpMode {
    ExactMax,
    VerduHan,
}

fn np_objective(params: &TestParams, beta: LogValue, mode: NpMode, t: f64) -> SignedLogSum {
    let mut acc = SignedLogSum::default();
    acc.add(true, params.alpha_at(t).ln_p);
    let tp = params.t_prime(t);
    if mode == NpMode::ExactMax {
        acc.add(true, tp + params.beta_at(t).ln_p);
    }
    acc.add(false, tp + beta.ln());
    acc
}

/// Monotone real key for comparing signed log-domain values.
pub(crate) fn order_key(sign: f64, ln_abs: f64) -> f64 {
    if sign > 0.0 {
        ln_abs
    } else if sign == 0.0 {
        -1e200
    } else {
        -1e200 - ln_abs.clamp(-1e6, 1e6) * 1e190
    }
}

/// f(β, γ) as a maximization over the threshold t ≥ 0.
pub fn f_nonparametric(params: &TestParams, beta: LogValue, mode: NpMode) -> Result<Prob> {
    params.validate()?;
    let lb = beta.ln();
    if !(lb < 0.0) {
        return Err(Error::Domain(format!("ln beta = {lb}")));
    }
    let key = |u: f64| {
        let (s, l) = np_objective(params, beta, mode, u.exp()).result();
        order_key(s, l)
    };
    // first threshold past the level, by doubling from a small start
    let mut hi = params.theta() * 1e-3;
    let mut steps = 0;
    while params.beta_at(hi).ln_p < lb {
        hi *= 2.0;
        steps += 1;
        if steps > 2000 {
            return Err(Error::NoConvergence { iterations: steps, lo: hi / 2.0, hi });
        }
    }
    let (u, k) = match mode {
        NpMode::ExactMax => {
            let lo = if steps == 0 { hi * 1e-12 } else { hi / 2.0 };
            golden_max(key, lo.ln(), hi.ln(), 1e-13)
        }
        NpMode::VerduHan => scan_then_golden(key, (hi * 1e-3).ln(), (hi * 30.0).ln(), 400, 1e-12),
    };
    let _ = u;
    if k <= -1e199 {
        return Ok(Prob::ZERO);
    }
    Ok(Prob::from_ln(k.min(0.0)))
}

/// First and second partial derivatives of f(β, γ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FDerivatives {
    pub df_dgamma: f64,
    pub df_dbeta: f64,
    pub d2f_dbeta_dgamma: f64,
    pub d2f_dbeta2: f64,
    pub d2f_dgamma2: f64,
    pub at_origin: bool,
}

pub fn f_derivatives(params: &TestParams, beta: LogValue) -> Result<FDerivatives> {
    params.validate()?;
    let lb = beta.ln();
    if !(lb < 0.0 && lb > f64::NEG_INFINITY) {
        return Err(Error::Domain(format!("ln beta = {lb}")));
    }
    let t = solve_t_for_beta(params, beta)?;
    let n = params.nf();
    let m = params.m();
    let d = params.delta();
    let s2 = params.sigma2;
    let th2 = params.theta2;
    let c = d / (s2 * th2);
    let ln_ratio = n * (params.theta() / params.sigma()).ln();
    let ln2 = 2f64.ln();

    if params.gamma == 0.0 {
        let ln_t = t.ln();
        let ln_dfb = ln_ratio - 0.5 * t * t * c;
        let df_dbeta = -ln_dfb.exp();
        let ln_core = n * ln_t - m * s2.ln() - t * t / (2.0 * s2) - m * ln2;
        let df_dgamma = -(ln_core - ln_gamma(m)).exp() / d;
        let d2f_dbeta_dgamma = df_dbeta * (n / (2.0 * d) - t * t / (2.0 * d * s2));
        let d2f_dbeta2 = (ln_ratio + (n - 2.0) * (params.theta() * 2f64.sqrt() / t).ln() + (d / s2).ln() + ln_gamma(m)
            - 0.5 * t * t * (d - s2) / (th2 * s2))
            .exp();
        let d2f_dgamma2 = -(n / (4.0 * d))
            * (ln_core - ln_gamma(m + 1.0)).exp()
            * (n / d + (n / (n + 2.0) - th2 / s2) * t * t / (d * d));
        return Ok(FDerivatives {
            df_dgamma,
            df_dbeta,
            d2f_dbeta_dgamma,
            d2f_dbeta2,
            d2f_dgamma2,
            at_origin: true,
        });
    }

    let g = params.gamma;
    let sng = (n * g).sqrt();
    let x = sng * t / d;
    let li_m = ln_bessel_i(m, x);
    let li_m1 = ln_bessel_i(m - 1.0, x);
    let ratio = (li_m - li_m1).exp();
    let ln_pref = m * (t * d / (s2 * sng)).ln() - 0.5 * (n * g * s2 / (d * d) + t * t / s2) + li_m;
    let df_dgamma = -(n / (2.0 * d)) * ln_pref.exp();
    let ln_dfb = ln_ratio + 0.5 * (n * g / d - t * t * c);
    let df_dbeta = -ln_dfb.exp();
    let dt_dgamma = th2 / (2.0 * d) * (n / g).sqrt() * ratio;
    let d2f_dbeta_dgamma = df_dbeta * (n / (2.0 * d) - t * c * dt_dgamma);
    let d2f_dbeta2 = (ln_dfb + t.ln() + c.ln() - params.ln_dbeta_dt(t)).exp();
    let d2f_dgamma2 = 0.5
        * df_dgamma
        * (n / d - n / g + (n / g).sqrt() * (t / d) * (1.0 / ratio - th2 / s2 * ratio));
    Ok(FDerivatives {
        df_dgamma,
        df_dbeta,
        d2f_dbeta_dgamma,
        d2f_dbeta2,
        d2f_dgamma2,
        at_origin: false,
    })
}

/// Center scale and squared radius of the decision sphere for θ² = Υ + σ².
#[must_use]
pub fn decision_sphere(upsilon: f64, sigma2: f64, n: u32, t: f64) -> (f64, f64) {
    let nf = f64::from(n);
    let scale = 1.0 + sigma2 / upsilon;
    let r2 = nf * sigma2 * scale * (1.0 - 2.0 * t / nf + (upsilon / sigma2).ln_1p());
    (scale, r2)
}
