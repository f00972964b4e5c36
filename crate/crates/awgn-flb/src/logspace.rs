//! Log-domain carriers for quantities spanning hundreds of decades.

use serde::Serialize;

/// Natural log of a nonnegative quantity; `-inf` encodes zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct LogValue {
    pub log_magnitude: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue { log_magnitude: f64::NEG_INFINITY };
    pub const ONE: LogValue = LogValue { log_magnitude: 0.0 };

    #[must_use]
    pub fn from_ln(ln: f64) -> Self {
        LogValue { log_magnitude: ln }
    }

    /// Panics in debug builds on negative input.
    #[must_use]
    pub fn new(x: f64) -> Self {
        debug_assert!(x >= 0.0, "LogValue::new({x})");
        LogValue { log_magnitude: x.ln() }
    }

    #[must_use]
    pub fn ln(self) -> f64 {
        self.log_magnitude
    }

    #[must_use]
    pub fn value(self) -> f64 {
        self.log_magnitude.exp()
    }

    #[must_use]
    pub fn log10(self) -> f64 {
        self.log_magnitude / std::f64::consts::LN_10
    }
}

/// A probability together with its complement, both in log form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prob {
    pub ln_p: f64,
    pub ln_q: f64,
}

impl Prob {
    #[must_use]
    pub fn from_ln(ln_p: f64) -> Self {
        Prob { ln_p, ln_q: ln_one_minus_exp(ln_p) }
    }

    #[must_use]
    pub fn from_ln_complement(ln_q: f64) -> Self {
        Prob { ln_p: ln_one_minus_exp(ln_q), ln_q }
    }

    #[must_use]
    pub fn new(p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        if p <= 0.5 {
            Prob::from_ln(p.ln())
        } else {
            Prob::from_ln_complement((1.0 - p).ln())
        }
    }

    pub const ZERO: Prob = Prob { ln_p: f64::NEG_INFINITY, ln_q: 0.0 };
    pub const ONE: Prob = Prob { ln_p: 0.0, ln_q: f64::NEG_INFINITY };

    #[must_use]
    pub fn value(self) -> f64 {
        self.ln_p.exp()
    }

    #[must_use]
    pub fn complement(self) -> f64 {
        self.ln_q.exp()
    }

    #[must_use]
    pub fn log(self) -> LogValue {
        LogValue::from_ln(self.ln_p)
    }

    #[must_use]
    pub fn flip(self) -> Self {
        Prob { ln_p: self.ln_q, ln_q: self.ln_p }
    }
}

/// ln(1 - e^x) for x <= 0, accurate at both ends.
#[must_use]
pub fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// ln(e^a + e^b).
#[must_use]
pub fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    if hi == f64::INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// ln(e^a - e^b) for a >= b.
#[must_use]
pub fn ln_sub(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + ln_one_minus_exp(b - a)
}

/// Signed accumulator of terms given as (sign, ln|term|).
#[derive(Debug, Clone, Copy)]
pub struct SignedLogSum {
    pos: f64,
    neg: f64,
}

impl Default for SignedLogSum {
    fn default() -> Self {
        SignedLogSum { pos: f64::NEG_INFINITY, neg: f64::NEG_INFINITY }
    }
}

impl SignedLogSum {
    pub fn add(&mut self, positive: bool, ln_abs: f64) {
        if positive {
            self.pos = ln_add(self.pos, ln_abs);
        } else {
            self.neg = ln_add(self.neg, ln_abs);
        }
    }

    pub fn add_value(&mut self, x: f64, ln_scale: f64) {
        if x != 0.0 {
            self.add(x > 0.0, x.abs().ln() + ln_scale);
        }
    }

    /// Sign (+1, -1, or 0) and ln|sum|.
    #[must_use]
    pub fn result(&self) -> (f64, f64) {
        if self.pos == self.neg {
            return (0.0, f64::NEG_INFINITY);
        }
        if self.pos > self.neg {
            (1.0, ln_sub(self.pos, self.neg))
        } else {
            (-1.0, ln_sub(self.neg, self.pos))
        }
    }

    /// Largest absolute contribution, in log form.
    #[must_use]
    pub fn ln_scale(&self) -> f64 {
        self.pos.max(self.neg)
    }

    #[must_use]
    pub fn value(&self) -> f64 {
        let (s, l) = self.result();
        s * l.exp()
    }
}
