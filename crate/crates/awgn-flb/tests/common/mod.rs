//! Independent reference computations used by the integration tests.
//! Nothing here calls the crate's Marcum, trade-off or envelope code.

#![allow(dead_code)]

use statrs::function::gamma::{gamma_lr, gamma_ur};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    if err <= tol * whole.abs().max(f64::MIN_POSITIVE) || depth == 0 || (b - a) <= 1e-15 * a.abs().max(b.abs()) {
        return v;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, whole, tol, depth - 1) + adapt(f, m, b, whole, tol, depth - 1)
}

/// Adaptive Gauss–Kronrod over the given breakpoints, relative tolerance
/// measured against a first coarse pass over the whole range.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breaks: &[f64], rel_tol: f64) -> f64 {
    let mut whole = 0.0;
    for w in breaks.windows(2) {
        let sub = 16;
        for j in 0..sub {
            let a = w[0] + (w[1] - w[0]) * j as f64 / sub as f64;
            let b = w[0] + (w[1] - w[0]) * (j + 1) as f64 / sub as f64;
            whole += gk15(&f, a, b).0;
        }
    }
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let sub = 16;
        for j in 0..sub {
            let a = w[0] + (w[1] - w[0]) * j as f64 / sub as f64;
            let b = w[0] + (w[1] - w[0]) * (j + 1) as f64 / sub as f64;
            total += adapt(&f, a, b, whole, rel_tol / 16.0, 40);
        }
    }
    total
}

/// Modified Bessel I_ν(x)·e^{−x} by its power series (moderate x only).
pub fn bessel_i_scaled(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let h = 0.5 * x;
    let mut ln_term = nu * h.ln() - statrs::function::gamma::ln_gamma(nu + 1.0) - x;
    let mut sum = 0.0;
    let mut k = 0.0;
    loop {
        let t = ln_term.exp();
        sum += t;
        if t < 1e-18 * sum && k > h {
            break;
        }
        k += 1.0;
        ln_term += 2.0 * h.ln() - k.ln() - (nu + k).ln();
    }
    sum
}

/// Marcum Q_m(a,b) from its defining integral
/// ∫_b^∞ x (x/a)^{m−1} exp(−(x²+a²)/2) I_{m−1}(ax) dx.
pub fn marcum_q(m: f64, a: f64, b: f64) -> f64 {
    let dens = |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        if a == 0.0 {
            return (2.0 * m - 1.0) * x.ln() - 0.5 * x * x - (m - 1.0) * 2f64.ln() - statrs::function::gamma::ln_gamma(m);
        }
        m * x.ln() - (m - 1.0) * a.ln() - 0.5 * (x - a) * (x - a) + bessel_i_scaled(m - 1.0, a * x).ln()
    };
    let f = |x: f64| dens(x).exp();
    let peak = a.max((2.0 * m - 1.0).max(0.0).sqrt());
    let hi = b.max(peak) + 40.0;
    let mut breaks = vec![b];
    for p in [peak - 8.0, peak - 2.0, peak, peak + 2.0, peak + 8.0] {
        if p > b && p < hi {
            breaks.push(p);
        }
    }
    breaks.push(hi);
    integrate(f, &breaks, 1e-15)
}

/// Lower and upper tails of a noncentral χ² with `n` degrees of freedom and
/// noncentrality `nc` (norm of the mean), at level x, by integrating the
/// central χ²_{n−1} tail against the Gaussian along the mean direction.
pub fn ncx2_tails(n: u32, nc: f64, x: f64) -> (f64, f64) {
    let r = x.sqrt();
    // mass of the Gaussian coordinate outside [−r, r]
    let phi = |z: f64| 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
    let outside = phi(-r - nc) + 0.5 * libm::erfc((r - nc) / std::f64::consts::SQRT_2);
    if n == 1 {
        let g = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let inside = integrate(g, &[-r - nc, r - nc], 1e-15);
        return (inside, outside);
    }
    let k = f64::from(n - 1) / 2.0;
    // z = r sin φ − nc; the χ² argument is r² cos² φ
    let dens = |ph: f64| {
        let z = r * ph.sin() - nc;
        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() * r * ph.cos()
    };
    let half = std::f64::consts::FRAC_PI_2;
    let center = (nc / r).clamp(-1.0, 1.0).asin();
    let mut breaks = vec![-half];
    for d in [-0.5, -0.1, -0.02, 0.0, 0.02, 0.1, 0.5] {
        let p = center + d;
        if p > -half && p < half {
            breaks.push(p);
        }
    }
    breaks.push(half);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let lower = integrate(|ph| dens(ph) * gamma_lr(k, 0.5 * r * r * ph.cos().powi(2)), &breaks, 1e-14);
    let upper_in = integrate(|ph| dens(ph) * gamma_ur(k, 0.5 * r * r * ph.cos().powi(2)), &breaks, 1e-14);
    (lower, outside + upper_in)
}

/// Trade-off pair (α, β) at threshold t for the test of N(√γ·1, σ²) against
/// N(0, θ²): the statistic is the distance to the point √γθ²/(θ²−σ²)·1.
pub fn alpha_beta(n: u32, gamma: f64, s2: f64, t2: f64, t: f64) -> (f64, f64) {
    let nf = f64::from(n);
    let d = t2 - s2;
    let a = (nf * gamma).sqrt() * s2.sqrt() / d;
    let ab = (nf * gamma).sqrt() * t2.sqrt() / d;
    let alpha = ncx2_tails(n, a, t * t / s2).1;
    let beta = ncx2_tails(n, ab, t * t / t2).0;
    (alpha, beta)
}

/// f(β, γ) with the threshold found by bisection in ln t on the oracle β.
pub fn f_oracle(n: u32, gamma: f64, s2: f64, t2: f64, beta: f64) -> f64 {
    let (mut lo, mut hi) = (1e-30f64, 1e4f64);
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        if alpha_beta(n, gamma, s2, t2, mid).1 < beta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    alpha_beta(n, gamma, s2, t2, (lo * hi).sqrt()).0
}

/// Lower convex envelope at (β, Υ) of samples f(β_i, γ_j), via
/// sup_q [ conv_β min_j (f(β, γ_j) − qγ_j) + qΥ ].
pub struct HullOracle {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// values[j][i] = f(betas[i], gammas[j])
    pub values: Vec<Vec<f64>>,
}

impl HullOracle {
    fn lower_hull_at(xs: &[f64], ys: &[f64], x: f64) -> f64 {
        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(xs.len());
        for (&xi, &yi) in xs.iter().zip(ys) {
            while hull.len() >= 2 {
                let (x1, y1) = hull[hull.len() - 2];
                let (x2, y2) = hull[hull.len() - 1];
                if (y2 - y1) * (xi - x1) >= (yi - y1) * (x2 - x1) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((xi, yi));
        }
        for w in hull.windows(2) {
            let ((x1, y1), (x2, y2)) = (w[0], w[1]);
            if x >= x1 && x <= x2 {
                return y1 + (y2 - y1) * (x - x1) / (x2 - x1);
            }
        }
        f64::NAN
    }

    fn dual(&self, q: f64, beta: f64, upsilon: f64) -> f64 {
        let h: Vec<f64> = (0..self.betas.len())
            .map(|i| {
                self.gammas
                    .iter()
                    .zip(&self.values)
                    .map(|(&g, row)| row[i] - q * g)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        Self::lower_hull_at(&self.betas, &h, beta) + q * upsilon
    }

    pub fn envelope(&self, beta: f64, upsilon: f64) -> f64 {
        // the dual is concave in q; slopes in γ are non-positive
        let (mut a, mut b) = (-10.0f64, 0.0f64);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (self.dual(c, beta, upsilon), self.dual(d, beta, upsilon));
        while b - a > 1e-9 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = self.dual(c, beta, upsilon);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = self.dual(d, beta, upsilon);
            }
        }
        fc.max(fd).max(self.dual(0.0, beta, upsilon))
    }
}
