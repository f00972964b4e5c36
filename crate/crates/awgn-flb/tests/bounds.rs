use awgn_flb::bounds::{
    compute_bound, cone_packing, cone_packing_maximal, constraint_transform, half_angle, phi_n, sweep, BoundQuery, CodeSize,
    Constraint, SweepMode, ThetaPolicy, TransformKind,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn bound(constraint: Constraint, n: u32, size: CodeSize, snr_db: f64, theta: ThetaPolicy) -> f64 {
    let mut q = BoundQuery::new(constraint, n, size, snr_db);
    q.theta_policy = theta;
    compute_bound(&q).unwrap().value.value()
}

/// Blocklengths of the rate-1.5, 10 dB comparison figures.
const FIG_NS: [u32; 10] = [20, 40, 60, 80, 100, 120, 140, 160, 180, 200];

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn average_below_maximal_equal_to_equal(n in 2u32..12, rate in 0.1f64..2.5, snr_db in 0.0f64..12.0) {
        let size = CodeSize::RateBits(rate);
        let e = bound(Constraint::Equal, n, size, snr_db, ThetaPolicy::Capacity);
        let m = bound(Constraint::Maximal, n, size, snr_db, ThetaPolicy::Capacity);
        let a = bound(Constraint::Average, n, size, snr_db, ThetaPolicy::Capacity);
        prop_assert_eq!(e, m);
        prop_assert!(a <= m, "average {} above maximal {}", a, m);
    }
}

#[test]
fn finite_n_theta_dominates_capacity_theta() {
    for &r in &[0.58, 0.8] {
        for &n in &[10u32, 20, 50, 100, 200] {
            let size = CodeSize::RateBits(r);
            let cap = bound(Constraint::Maximal, n, size, 5.0, ThetaPolicy::Capacity);
            let fin = bound(Constraint::Maximal, n, size, 5.0, ThetaPolicy::ExponentFiniteN);
            assert!(fin >= cap - 1e-12, "R={r} n={n}: {fin} < {cap}");
        }
    }
}

#[test]
fn direct_maximal_bound_beats_lifted_cone_packing() {
    for &n in &FIG_NS {
        let m = 2f64.powf(1.5 * f64::from(n));
        let thm = bound(Constraint::Maximal, n, CodeSize::Cardinality(m), 10.0, ThetaPolicy::Capacity);
        let cor = cone_packing_maximal(n, m, 10.0, 1.0).unwrap().value.value();
        assert!(thm >= cor, "n={n}: {thm} < {cor}");
    }
}

#[test]
fn cone_packing_is_tightest_for_equal_power() {
    for &n in &FIG_NS {
        let m = 2f64.powf(1.5 * f64::from(n));
        let cone = cone_packing(n, m, 10.0, 1.0).unwrap().value.value();
        let ht = bound(Constraint::Equal, n, CodeSize::Cardinality(m), 10.0, ThetaPolicy::Capacity);
        assert!(cone >= ht, "n={n}: {cone} < {ht}");
    }
}

fn maximal_base(n: u32, m: f64, upsilon: f64) -> awgn_flb::Result<awgn_flb::bounds::BoundResult> {
    compute_bound(&BoundQuery::new(Constraint::Maximal, n, CodeSize::Cardinality(m), 10.0 * upsilon.log10()))
}

#[test]
fn transformed_maximal_bound_is_loose_for_average_power() {
    for &n in &[20u32, 60, 120, 200] {
        let m = 2f64.powf(1.5 * f64::from(n));
        let lifted = constraint_transform(TransformKind::MaximalToAverage, maximal_base, n, m, 10.0, None)
            .unwrap()
            .value
            .value();
        let direct = bound(Constraint::Average, n, CodeSize::Cardinality(m), 10.0, ThetaPolicy::Capacity);
        assert!(lifted <= direct, "n={n}: {lifted} > {direct}");
    }
}

#[test]
fn maximal_to_average_vanishes_at_the_ends() {
    let (n, m, u) = (4, 16.0, 10.0);
    let at = |s: f64| {
        constraint_transform(TransformKind::MaximalToAverage, maximal_base, n, m, u, Some(s)).unwrap().value.value()
    };
    let best = constraint_transform(TransformKind::MaximalToAverage, maximal_base, n, m, u, None).unwrap();
    let inner = best.value.value();
    assert!(at(1.0 - 1e-9) < 1e-3 * inner);
    assert!(at(1.0 / m + 1e-12) < 1e-3 * inner);
    let s = best.s_star.unwrap();
    assert!(s > 1.0 / m && s < 1.0 && inner > 0.0);
}

#[test]
fn equal_to_maximal_tight_lift_of_cone_packing() {
    let r = constraint_transform(
        TransformKind::EqualToMaximalTight,
        |n, m, u| cone_packing(n, m, u, 1.0),
        2,
        16.0,
        10.0,
        None,
    )
    .unwrap();
    assert!((r.value.value() - 0.08).abs() <= 0.005);
    assert_eq!(r.value, cone_packing_maximal(2, 16.0, 10.0, 1.0).unwrap().value);
}

/// Fraction of noisy copies of (1,…,1) leaving the cone of half-angle θ.
fn phi_mc(n: usize, theta: f64, var: f64, trials: u64, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = var.sqrt();
    let cos_t = theta.cos();
    let rn = (n as f64).sqrt();
    let mut out = 0u64;
    for _ in 0..trials {
        let mut dot = 0.0;
        let mut norm2 = 0.0;
        for _ in 0..n {
            let y = 1.0 + sd * rng.sample::<f64, _>(StandardNormal);
            dot += y;
            norm2 += y * y;
        }
        if dot <= cos_t * rn * norm2.sqrt() {
            out += 1;
        }
    }
    let p = out as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

#[test]
fn phi_n_agrees_with_full_dimension_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for k in 0..20 {
        let n = rng.gen_range(2..=32usize);
        let theta = rng.gen_range(0.2..1.5);
        let var = rng.gen_range(0.05..2.0);
        let exact = phi_n(n as u32, theta, var).unwrap().value();
        let (p, se) = phi_mc(n, theta, var, 200_000, k);
        assert!((p - exact).abs() <= 4.0 * se.max(1e-6), "n={n} theta={theta} var={var}: {p} ± {se} vs {exact}");
    }
}

#[test]
fn phi_n_reference_configuration() {
    let exact = phi_n(8, 0.6, 0.25).unwrap().value();
    let (p, se) = phi_mc(8, 0.6, 0.25, 10_000_000, 8);
    assert!((p - exact).abs() <= 4.0 * se, "{p} ± {se} vs {exact}");
}

#[test]
fn half_angle_matches_sampled_cap_fraction() {
    let (n, m) = (16usize, 1024.0);
    let theta = half_angle(n as u32, m).unwrap();
    let cos_t = theta.cos();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let trials = 10_000_000u64;
    let mut inside = 0u64;
    for _ in 0..trials {
        let mut first = 0.0;
        let mut norm2 = 0.0;
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            if i == 0 {
                first = z;
            }
            norm2 += z * z;
        }
        if first >= cos_t * norm2.sqrt() {
            inside += 1;
        }
    }
    let p = inside as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    assert!((p - 1.0 / m).abs() <= 4.0 * se, "{p} ± {se} vs {}", 1.0 / m);
}

#[test]
fn error_sweep_is_monotone_and_matches_single_points() {
    let template = BoundQuery::new(Constraint::Maximal, 1, CodeSize::RateBits(1.5), 10.0);
    let rows = sweep(SweepMode::ErrorVsN, &FIG_NS, &template, None, 2).unwrap();
    let mut prev = f64::INFINITY;
    for (row, &n) in rows.iter().zip(&FIG_NS) {
        assert_eq!(row.n, n);
        let v = row.value.unwrap().value();
        assert!(v <= prev, "n={n}: {v} > {prev}");
        prev = v;
    }
    let mut q = template;
    q.n = 60;
    let single = compute_bound(&q).unwrap().value;
    assert_eq!(rows[2].value.unwrap(), single);
    let serial = sweep(SweepMode::ErrorVsN, &FIG_NS, &template, None, 1).unwrap();
    assert_eq!(serial, rows);
}

#[test]
fn maxrate_sweep_stays_below_capacity_and_climbs() {
    let mut template = BoundQuery::new(Constraint::Average, 1, CodeSize::RateBits(1.0), 5.0);
    template.theta_policy = ThetaPolicy::ExponentFiniteN;
    let ns = [8u32, 32, 128];
    let rows = sweep(SweepMode::MaxrateVsN, &ns, &template, Some(1e-6), 1).unwrap();
    let cap = 0.5 * (1.0 + 10f64.powf(0.5)).log2();
    let mut prev = 0.0;
    for row in &rows {
        let r = row.rate_bits.unwrap_or_else(|| panic!("n={}: {:?}", row.n, row.error));
        let v = row.value.unwrap().value();
        assert!(r < cap && r > prev, "n={}: rate {r}, capacity {cap}", row.n);
        assert!((v.ln() / 1e-6f64.ln() - 1.0).abs() <= 1e-4 || v <= 1e-6, "n={}: value {v}", row.n);
        prev = r;
    }
}

#[test]
fn finite_n_theta_falls_back_when_its_expansion_is_vacuous() {
    let mut q = BoundQuery::new(Constraint::Maximal, 8, CodeSize::RateBits(0.05), 5.0);
    q.theta_policy = ThetaPolicy::ExponentFiniteN;
    let r = compute_bound(&q).unwrap();
    assert_eq!(r.theta2_used, Some(q.upsilon() + 1.0));
    assert!(r.warnings.iter().any(|w| w.contains("vacuous")), "{:?}", r.warnings);
    let cap = bound(Constraint::Maximal, 8, CodeSize::RateBits(0.05), 5.0, ThetaPolicy::Capacity);
    assert_eq!(r.value.value(), cap);
}
