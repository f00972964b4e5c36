use awgn_flb::bounds::{compute_bound, phi_n, BoundQuery, CodeSize, Constraint};
use awgn_flb::sim::{make_apsk, make_psk, ml_error_mc, Constellation, Ring, RingSpec};

fn two_rings(m: usize) -> RingSpec {
    let inner = m / 3;
    RingSpec {
        rings: vec![
            Ring { count: inner, radius: 0.45, phase: 0.0 },
            Ring { count: m - inner - 1, radius: 1.0, phase: 0.2 },
        ],
        origin: 1,
    }
}

#[test]
fn psk_simulation_matches_cone_probability() {
    let c = make_psk(16, 10.0).unwrap();
    let est = ml_error_mc(&c, 1.0, 1_000_000, 3, 1);
    let exact = phi_n(2, std::f64::consts::PI / 16.0, 0.1).unwrap().value();
    assert!((est.error_prob - exact).abs() <= 4.0 * est.std_error, "{est:?} vs {exact}");
}

#[test]
fn simulated_codes_respect_the_converse() {
    for &m in &[8usize, 16, 32] {
        let codes: Vec<(Constraint, Constellation)> = vec![
            (Constraint::Equal, make_psk(m, 10.0).unwrap()),
            (Constraint::Maximal, make_apsk(&two_rings(m), 10.0, Constraint::Maximal).unwrap()),
            (Constraint::Average, make_apsk(&two_rings(m), 10.0, Constraint::Average).unwrap()),
            (Constraint::Average, make_apsk(&RingSpec::psk_plus_origin(m), 10.0, Constraint::Average).unwrap()),
        ];
        for (kind, c) in codes {
            let est = ml_error_mc(&c, 1.0, 200_000, 17, 1);
            let b = compute_bound(&BoundQuery::new(kind, 2, CodeSize::Cardinality(m as f64), 10.0)).unwrap().value.value();
            assert!(est.error_prob >= b - 4.0 * est.std_error, "M={m} {kind:?}: {est:?} below bound {b}");
        }
    }
}

#[test]
fn same_seed_same_estimate() {
    let c = make_apsk(&two_rings(16), 10.0, Constraint::Average).unwrap();
    let a = ml_error_mc(&c, 1.0, 300_000, 42, 2);
    let b = ml_error_mc(&c, 1.0, 300_000, 42, 2);
    assert_eq!(a.error_prob.to_bits(), b.error_prob.to_bits());
    assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    let c1 = ml_error_mc(&c, 1.0, 300_000, 42, 1);
    assert_eq!(a.error_prob.to_bits(), c1.error_prob.to_bits());
}
