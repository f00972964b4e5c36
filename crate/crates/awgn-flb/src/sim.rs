//! Monte-Carlo ML decoding error of two-dimensional constellations and a
//! randomized search over amplitude/phase ring layouts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::bounds::Constraint;
use crate::error::{Error, Result};

const POWER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constellation {
    pub points: Vec<[f64; 2]>,
    pub constraint_kind: Constraint,
    /// Energy budget nΥ with n = 2.
    pub power_budget: f64,
}

impl Constellation {
    /// Checks the power constraint and wraps the points.
    pub fn new(points: Vec<[f64; 2]>, constraint_kind: Constraint, power_budget: f64) -> Result<Self> {
        if points.is_empty() || !(power_budget > 0.0) {
            return Err(Error::InvalidParams("empty constellation or non-positive budget".into()));
        }
        let tol = POWER_TOL * power_budget;
        let norm2 = |p: &[f64; 2]| p[0] * p[0] + p[1] * p[1];
        match constraint_kind {
            Constraint::Equal | Constraint::Maximal => {
                for (i, p) in points.iter().enumerate() {
                    let e = norm2(p);
                    let bad = match constraint_kind {
                        Constraint::Equal => (e - power_budget).abs() > tol,
                        _ => e > power_budget + tol,
                    };
                    if bad {
                        return Err(Error::ConstraintViolation {
                            index: i,
                            detail: format!("energy {e} against budget {power_budget} ({constraint_kind:?})"),
                        });
                    }
                }
            }
            Constraint::Average => {
                let mean = points.iter().map(norm2).sum::<f64>() / points.len() as f64;
                if mean > power_budget + tol {
                    let index = (0..points.len())
                        .max_by(|&a, &b| norm2(&points[a]).total_cmp(&norm2(&points[b])))
                        .unwrap_or(0);
                    return Err(Error::ConstraintViolation {
                        index,
                        detail: format!("mean energy {mean} above budget {power_budget}"),
                    });
                }
            }
        }
        Ok(Constellation { points, constraint_kind, power_budget })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Plain-text form: metadata comments, then one `x y` pair per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kind = format!("{:?}", self.constraint_kind).to_lowercase();
        let _ = writeln!(s, "# constraint {kind}");
        let _ = writeln!(s, "# power_budget {:.17e}", self.power_budget);
        let _ = writeln!(s, "# points {}", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{:.17e} {:.17e}", p[0], p[1]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut budget = None;
        let mut points = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                match (it.next(), it.next()) {
                    (Some("constraint"), Some(k)) => {
                        kind = Some(match k {
                            "equal" => Constraint::Equal,
                            "maximal" => Constraint::Maximal,
                            "average" => Constraint::Average,
                            _ => return Err(Error::InvalidParams(format!("unknown constraint {k}"))),
                        })
                    }
                    (Some("power_budget"), Some(v)) => {
                        budget = Some(v.parse::<f64>().map_err(|e| Error::InvalidParams(e.to_string()))?)
                    }
                    _ => {}
                }
                continue;
            }
            let xy: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e: std::num::ParseFloatError| Error::InvalidParams(format!("{line}: {e}")))?;
            if xy.len() != 2 {
                return Err(Error::InvalidParams(format!("expected `x y`, got `{line}`")));
            }
            points.push([xy[0], xy[1]]);
        }
        let kind = kind.ok_or_else(|| Error::InvalidParams("missing constraint header".into()))?;
        let budget = budget.ok_or_else(|| Error::InvalidParams("missing power_budget header".into()))?;
        Constellation::new(points, kind, budget)
    }
}

/// M points equally spaced on the circle of energy 2Υ.
pub fn make_psk(m: usize, upsilon: f64) -> Result<Constellation> {
    if m < 1 || !(upsilon > 0.0) {
        return Err(Error::InvalidParams(format!("make_psk(M={m}, upsilon={upsilon})")));
    }
    let r = (2.0 * upsilon).sqrt();
    let points = (0..m)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / m as f64;
            [r * a.cos(), r * a.sin()]
        })
        .collect();
    Constellation::new(points, Constraint::Equal, 2.0 * upsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ring {
    pub count: usize,
    /// Relative radius; the constructor rescales to meet the budget.
    pub radius: f64,
    /// Phase offset in radians.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingSpec {
    pub rings: Vec<Ring>,
    /// Number of codewords placed at the origin.
    pub origin: usize,
}

impl RingSpec {
    pub fn size(&self) -> usize {
        self.origin + self.rings.iter().map(|r| r.count).sum::<usize>()
    }

    /// (M−1)-PSK plus one codeword at the origin.
    pub fn psk_plus_origin(m: usize) -> Self {
        RingSpec { rings: vec![Ring { count: m - 1, radius: 1.0, phase: 0.0 }], origin: 1 }
    }
}

/// Ring constellation scaled so that the budget of `kind` holds with
/// equality: every point (equal), the outermost ring (maximal) or the mean
/// energy (average).
pub fn make_apsk(spec: &RingSpec, upsilon: f64, kind: Constraint) -> Result<Constellation> {
    let m = spec.size();
    if m < 1 || !(upsilon > 0.0) || spec.rings.iter().any(|r| !(r.radius > 0.0) || r.count == 0) {
        return Err(Error::InvalidParams(format!("make_apsk: invalid ring spec {spec:?}")));
    }
    let budget = 2.0 * upsilon;
    let mut points = vec![[0.0, 0.0]; spec.origin];
    for ring in &spec.rings {
        for k in 0..ring.count {
            let a = ring.phase + 2.0 * PI * k as f64 / ring.count as f64;
            points.push([ring.radius * a.cos(), ring.radius * a.sin()]);
        }
    }
    let norm2 = |p: &[f64; 2]| p[0] * p[0] + p[1] * p[1];
    let reference = match kind {
        Constraint::Equal | Constraint::Maximal => points.iter().map(norm2).fold(0.0, f64::max),
        Constraint::Average => points.iter().map(norm2).sum::<f64>() / m as f64,
    };
    if reference > 0.0 {
        let scale = (budget / reference).sqrt();
        for p in &mut points {
            p[0] *= scale;
            p[1] *= scale;
        }
    }
    Constellation::new(points, kind, budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub error_prob: f64,
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

impl McEstimate {
    fn from_counts(errors: u64, trials: u64, seed: u64) -> Self {
        let p = errors as f64 / trials as f64;
        McEstimate {
            error_prob: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
            seed,
        }
    }
}

const CHUNK: u64 = 1 << 16;

fn nearest(points: &[[f64; 2]], y: [f64; 2]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let (dx, dy) = (y[0] - p[0], y[1] - p[1]);
        let d = dx * dx + dy * dy;
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

fn chunk_errors(points: &[[f64; 2]], sd: f64, seed: u64, chunk: u64, trials: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    let m = points.len();
    let mut errors = 0;
    for _ in 0..trials {
        let i = rng.gen_range(0..m);
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        let y = [points[i][0] + sd * nx, points[i][1] + sd * ny];
        if nearest(points, y) != i {
            errors += 1;
        }
    }
    errors
}

fn run_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// ML (minimum-distance) decoding error under AWGN with variance σ² per
/// dimension. Trials are split into fixed chunks with their own random
/// stream, so the estimate does not depend on the worker count.
pub fn ml_error_mc(c: &Constellation, sigma2: f64, trials: u64, seed: u64, workers: usize) -> McEstimate {
    if c.len() <= 1 || trials == 0 {
        return McEstimate::from_counts(0, trials.max(1), seed);
    }
    let sd = sigma2.sqrt();
    let chunks = trials.div_ceil(CHUNK);
    let errors: u64 = run_pool(workers, || {
        (0..chunks)
            .into_par_iter()
            .map(|k| {
                let len = CHUNK.min(trials - k * CHUNK);
                chunk_errors(&c.points, sd, seed, k, len)
            })
            .sum()
    });
    McEstimate::from_counts(errors, trials, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    /// Number of candidate evaluations.
    pub budget: usize,
    pub trials_per_eval: u64,
    pub final_trials: u64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { budget: 300, trials_per_eval: 100_000, final_trials: 1_000_000, seed: 1, workers: 1 }
    }
}

/// Concentric ring layouts of total size m used to start the search.
fn seed_specs(m: usize, kind: Constraint) -> Vec<RingSpec> {
    let mut out = vec![RingSpec { rings: vec![Ring { count: m, radius: 1.0, phase: 0.0 }], origin: 0 }];
    if kind == Constraint::Equal {
        return out;
    }
    if m >= 3 {
        out.push(RingSpec::psk_plus_origin(m));
    }
    // hexagonal-style shells 1, 6, 12, 18, ... with the remainder outside
    for origin in [0usize, 1] {
        let mut rings = Vec::new();
        let mut left = m - origin.min(m);
        let mut shell = 1;
        while left > 0 {
            let want = 6 * shell;
            let count = if left <= want + want / 2 { left } else { want };
            rings.push(Ring { count, radius: shell as f64, phase: 0.5 * shell as f64 });
            left -= count;
            shell += 1;
        }
        if rings.len() >= 2 {
            out.push(RingSpec { rings, origin });
        }
    }
    // two rings
    if m >= 8 {
        let inner = (m - 1) / 3;
        out.push(RingSpec {
            rings: vec![
                Ring { count: inner, radius: 0.5, phase: 0.0 },
                Ring { count: m - 1 - inner, radius: 1.0, phase: 0.1 },
            ],
            origin: 1,
        });
    }
    out
}

fn perturb(spec: &RingSpec, scale: f64, kind: Constraint, rng: &mut ChaCha8Rng) -> RingSpec {
    let mut s = spec.clone();
    let nr = s.rings.len();
    for r in s.rings.iter_mut() {
        if kind != Constraint::Equal {
            r.radius *= 1.0 + scale * 0.05 * rng.gen_range(-1.0..1.0);
        }
        r.phase += scale * 5f64.to_radians() * rng.gen_range(-1.0..1.0);
    }
    if kind != Constraint::Equal && rng.gen_bool(0.3) {
        // move one codeword between rings or to/from the origin
        let slots = nr + 1;
        let from = rng.gen_range(0..slots);
        let to = rng.gen_range(0..slots);
        let take = |s: &mut RingSpec, k: usize| -> bool {
            if k == nr {
                if s.origin > 0 {
                    s.origin -= 1;
                    return true;
                }
                false
            } else if s.rings[k].count > 1 {
                s.rings[k].count -= 1;
                true
            } else {
                false
            }
        };
        if from != to && take(&mut s, from) {
            if to == nr {
                s.origin += 1;
            } else {
                s.rings[to].count += 1;
            }
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub spec: RingSpec,
    pub constellation: Constellation,
    pub estimate: McEstimate,
    pub evaluations: usize,
}

/// Randomized local search over ring layouts keeping the best Monte-Carlo
/// error. Candidates in one iteration share the noise stream so that
/// comparisons are not dominated by sampling noise. Heuristic.
pub fn apsk_search(m: usize, upsilon: f64, sigma2: f64, kind: Constraint, cfg: &SearchConfig) -> Result<SearchResult> {
    if m < 2 || cfg.budget == 0 {
        return Err(Error::InvalidParams(format!("apsk_search(M={m}, budget={})", cfg.budget)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    let eval = |spec: &RingSpec, stream_seed: u64| -> Option<(Constellation, f64)> {
        let c = make_apsk(spec, upsilon, kind).ok()?;
        let e = ml_error_mc(&c, sigma2, cfg.trials_per_eval, stream_seed, cfg.workers);
        Some((c, e.error_prob))
    };
    let mut evaluations = 0;
    let mut best: Option<(RingSpec, f64)> = None;
    let first_seed = cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for spec in seed_specs(m, kind) {
        if evaluations >= cfg.budget {
            break;
        }
        evaluations += 1;
        if let Some((_, e)) = eval(&spec, first_seed) {
            if best.as_ref().map_or(true, |b| e < b.1) {
                best = Some((spec, e));
            }
        }
    }
    let (mut best_spec, _) = best.ok_or_else(|| Error::InvalidParams("no valid seed layout".into()))?;
    let mut scale = 1.0;
    let mut iter = 0u64;
    while evaluations + 2 <= cfg.budget {
        iter += 1;
        let crn = first_seed.wrapping_add(iter);
        let cand = perturb(&best_spec, scale, kind, &mut rng);
        evaluations += 2;
        let inc = eval(&best_spec, crn).map(|x| x.1);
        let new = eval(&cand, crn).map(|x| x.1);
        if let (Some(a), Some(b)) = (inc, new) {
            if b < a {
                best_spec = cand;
            }
        }
        scale = (scale * 0.995).max(0.1);
    }
    let constellation = make_apsk(&best_spec, upsilon, kind)?;
    let estimate = ml_error_mc(&constellation, sigma2, cfg.final_trials, cfg.seed ^ 0x5DEE_CE66, cfg.workers);
    Ok(SearchResult { spec: best_spec, constellation, estimate, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psk_radius_and_constraint() {
        let c = make_psk(16, 10.0).unwrap();
        for p in &c.points {
            assert!((p[0].hypot(p[1]) - 20f64.sqrt()).abs() < 1e-13);
        }
    }

    #[test]
    fn apsk_with_origin_at_maximal_budget() {
        let c = make_apsk(&RingSpec::psk_plus_origin(16), 10.0, Constraint::Maximal).unwrap();
        assert_eq!(c.points[0], [0.0, 0.0]);
        let max = c.points.iter().map(|p| p[0] * p[0] + p[1] * p[1]).fold(0.0, f64::max);
        assert!((max - 20.0).abs() < 1e-12);
        let avg = make_apsk(&RingSpec::psk_plus_origin(16), 10.0, Constraint::Average).unwrap();
        let r2 = avg.points[1][0].powi(2) + avg.points[1][1].powi(2);
        assert!((r2 - 20.0 * 16.0 / 15.0).abs() < 1e-10);
    }

    #[test]
    fn violations_are_reported() {
        let e = Constellation::new(vec![[0.0, 0.0], [5.0, 0.0]], Constraint::Maximal, 20.0).unwrap_err();
        assert!(matches!(e, Error::ConstraintViolation { index: 1, .. }));
        let spec = RingSpec {
            rings: vec![Ring { count: 3, radius: 1.0, phase: 0.0 }, Ring { count: 3, radius: 2.0, phase: 0.0 }],
            origin: 0,
        };
        assert!(make_apsk(&spec, 10.0, Constraint::Equal).is_err());
    }

    #[test]
    fn single_message_never_errs() {
        let c = make_psk(1, 10.0).unwrap();
        assert_eq!(ml_error_mc(&c, 1.0, 10_000, 3, 1).error_prob, 0.0);
    }

    #[test]
    fn estimate_is_independent_of_workers() {
        let c = make_psk(8, 3.0).unwrap();
        let a = ml_error_mc(&c, 1.0, 200_000, 11, 1);
        let b = ml_error_mc(&c, 1.0, 200_000, 11, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn text_roundtrip() {
        let c = make_apsk(&RingSpec::psk_plus_origin(8), 4.0, Constraint::Average).unwrap();
        assert_eq!(Constellation::from_text(&c.to_text()).unwrap(), c);
    }
}
