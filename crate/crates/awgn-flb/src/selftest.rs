//! Built-in numerical checks behind the `selftest` command.

use serde::Serialize;

use crate::bounds::{compute_bound, cone_packing, cone_packing_maximal, half_angle, phi_n, BoundQuery, CodeSize, Constraint};
use crate::envelope::f_envelope;
use crate::ht_core::{f_exact, TestParams};
use crate::logspace::LogValue;
use crate::quad::integrate;
use crate::saddlepoint::{critical_rate, f_saddlepoint, SpVariant};
use crate::sim::{make_psk, ml_error_mc};
use crate::special_fn::{log_bessel_i, marcum_q};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, got: Result<f64, String>, expected: f64, tol: f64) -> Check {
    match got {
        Ok(v) => Check {
            name: name.into(),
            passed: (v - expected).abs() <= tol,
            detail: format!("got {v:.10}, expected {expected} ± {tol:e}"),
        },
        Err(e) => Check { name: name.into(), passed: false, detail: e },
    }
}

fn s<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Marcum Q by quadrature of its defining integral.
fn marcum_by_quadrature(m: f64, a: f64, b: f64) -> Result<f64, String> {
    let dens = |x: f64| {
        if x == 0.0 {
            return 0.0;
        }
        let li = log_bessel_i(m - 1.0, a * x).map_or(f64::NAN, |v| v.ln());
        (m * x.ln() - (m - 1.0) * a.ln() - 0.5 * (x * x + a * a) + li).exp()
    };
    let hi = b.max(a) + 40.0;
    s(integrate(dens, b, hi, 1e-15, 1e-13))
}

pub fn run(full: bool) -> Vec<Check> {
    let mut out = vec![
        check("marcum first order at a=0", s(marcum_q(1.0, 0.0, 1.5)).map(|q| q.value()), (-1.125f64).exp(), 1e-15),
        check("half-angle n=3 M=4", s(half_angle(3, 4.0)), std::f64::consts::PI / 3.0, 1e-11),
        check(
            "maximal bound n=2 M=16 10 dB",
            s(compute_bound(&BoundQuery::new(Constraint::Maximal, 2, CodeSize::Cardinality(16.0), 10.0))).map(|r| r.value.value()),
            0.15,
            0.005,
        ),
        check("cone packing n=2 M=16 10 dB", s(cone_packing(2, 16.0, 10.0, 1.0)).map(|r| r.value.value()), 0.38, 0.005),
        check(
            "cone packing, maximal power, n=2 M=16 10 dB",
            s(cone_packing_maximal(2, 16.0, 10.0, 1.0)).map(|r| r.value.value()),
            0.08,
            0.005,
        ),
    ];
    if full {
        for &(m, a, b) in &[(1.0, 1.0, 2.0), (2.5, 3.0, 4.0), (6.0, 2.0, 1.0)] {
            let got = s(marcum_q(m, a, b)).map(|q| q.value());
            let want = marcum_by_quadrature(m, a, b);
            out.push(match (got, want) {
                (Ok(g), Ok(w)) => Check {
                    name: format!("marcum vs quadrature ({m},{a},{b})"),
                    passed: (g / w - 1.0).abs() <= 1e-12,
                    detail: format!("series {g:.16e}, quadrature {w:.16e}"),
                },
                (g, w) => Check { name: format!("marcum vs quadrature ({m},{a},{b})"), passed: false, detail: format!("{g:?} {w:?}") },
            });
        }
        let rcr = critical_rate(10f64.powf(0.5), 1.0) / std::f64::consts::LN_2;
        out.push(check("critical rate 5 dB (bits)", Ok(rcr), 0.577, 0.005));
        let u = 10f64.powf(0.5);
        let fid = (|| -> Result<f64, String> {
            let p = s(TestParams::new(20, u, 1.0, u + 1.0))?;
            let beta = LogValue::from_ln(-20.0 * 0.8 * std::f64::consts::LN_2);
            let e = s(f_exact(&p, beta))?.ln_p;
            let a = s(f_saddlepoint(&p, beta, SpVariant::Full))?.value.ln_p;
            Ok((a / e - 1.0).abs())
        })();
        out.push(check("saddlepoint relative log error n=20", fid, 0.0, 0.05));
        let env = (|| -> Result<f64, String> {
            let beta = LogValue::new(1.0 / 64.0);
            let e = s(f_envelope(2, 10.0, 1.0, 11.0, beta))?.value.value();
            let f = s(TestParams::new(2, 10.0, 1.0, 11.0).and_then(|p| f_exact(&p, beta)))?.value();
            Ok(if e <= f { 0.0 } else { e - f })
        })();
        out.push(check("envelope below f at n=2 M=64", env, 0.0, 0.0));
        let mc = (|| -> Result<f64, String> {
            let c = s(make_psk(16, 10.0))?;
            let est = ml_error_mc(&c, 1.0, 1_000_000, 7, 1);
            let exact = s(phi_n(2, std::f64::consts::PI / 16.0, 0.1))?.value();
            Ok((est.error_prob - exact).abs() / est.std_error)
        })();
        out.push(check("16-PSK simulation vs cone probability (std errors)", mc, 0.0, 4.0));
    }
    out
}
