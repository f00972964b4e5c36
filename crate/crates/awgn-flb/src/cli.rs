//! Command-line front end. `run` parses arguments, writes CSV or JSON and
//! maps outcomes to exit codes: 0 success, 2 usage error, 3 numeric failure.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{
    compute_bound, cone_packing, cone_packing_maximal, snr_to_upsilon, sweep, BoundQuery, CodeSize, Constraint, Method,
    SweepMode, ThetaPolicy, SIGMA2,
};
use crate::envelope::{boundary_curve, f_envelope};
use crate::error::{Error, Result};
use crate::logspace::{LogValue, Prob};
use crate::saddlepoint::sphere_packing;
use crate::sim::{apsk_search, make_apsk, make_psk, ml_error_mc, Constellation, RingSpec, SearchConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug, Serialize)]
#[command(name = "awgn-flb", version, about = "Finite-blocklength converse bounds for the AWGN channel")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Serialize)]
struct Common {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,
    /// Write to this file instead of stdout
    #[arg(long, global = true)]
    output: Option<String>,
    /// Omit the timestamp header line
    #[arg(long, global = true)]
    no_timestamp: bool,
    /// Worker threads (default: AWGN_FLB_WORKERS or 1)
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ConstraintArg {
    Equal,
    Maximal,
    Average,
}

impl From<ConstraintArg> for Constraint {
    fn from(c: ConstraintArg) -> Self {
        match c {
            ConstraintArg::Equal => Constraint::Equal,
            ConstraintArg::Maximal => Constraint::Maximal,
            ConstraintArg::Average => Constraint::Average,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Auto,
    Exact,
    SpFull,
    SpHat,
    Vh,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::Exact => Method::Exact,
            MethodArg::SpFull => Method::SaddlepointFull,
            MethodArg::SpHat => Method::SaddlepointHat,
            MethodArg::Vh => Method::VerduHan,
        }
    }
}

fn parse_theta(s: &str) -> std::result::Result<ThetaPolicy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Accepts plain numbers and forms like `1e7`.
fn parse_count(s: &str) -> std::result::Result<u64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{s}: {e}"))?;
    if v >= 1.0 && v.fract() == 0.0 && v < 1.8e19 {
        Ok(v as u64)
    } else {
        Err(format!("{s} is not a positive integer"))
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
struct NGrid(Vec<u32>);

fn parse_n_grid(s: &str) -> std::result::Result<NGrid, String> {
    parse_n_list(s).map(NGrid)
}

/// `a:b:log` doubles from a to b, `a:b:k` steps by k, `a,b,c` lists values.
fn parse_n_list(s: &str) -> std::result::Result<Vec<u32>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<u32>().map_err(|e| format!("{t}: {e}"));
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b) = (num(a)?, num(b)?);
            if a == 0 || b < a {
                return Err(format!("empty range {s}"));
            }
            let mut out = Vec::new();
            if *step == "log" {
                let mut n = a;
                while n <= b {
                    out.push(n);
                    n = n.checked_mul(2).ok_or("range overflow")?;
                }
            } else {
                let k = num(step)?;
                if k == 0 {
                    return Err("zero step".into());
                }
                out.extend((a..=b).step_by(k as usize));
            }
            Ok(out)
        }
        [single] => single.split(',').map(num).collect(),
        _ => Err(format!("cannot parse blocklength grid `{s}`")),
    }
}

#[derive(Args, Debug, Serialize)]
struct SizeArgs {
    /// Code cardinality M
    #[arg(long, conflicts_with = "rate_bits", required_unless_present = "rate_bits")]
    m: Option<f64>,
    /// Rate in bits per channel use
    #[arg(long)]
    rate_bits: Option<f64>,
}

impl SizeArgs {
    fn size(&self) -> CodeSize {
        match (self.m, self.rate_bits) {
            (Some(m), _) => CodeSize::Cardinality(m),
            (None, Some(r)) => CodeSize::RateBits(r),
            (None, None) => CodeSize::Cardinality(f64::NAN),
        }
    }
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Evaluate one converse bound
    Bound {
        #[arg(long, value_enum)]
        constraint: ConstraintArg,
        #[arg(long)]
        n: u32,
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long, value_parser = parse_theta, default_value = "capacity")]
        #[serde(skip)]
        theta: ThetaPolicy,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
    },
    /// Bound values or maximal rates along a blocklength grid
    Sweep {
        #[arg(long, value_enum)]
        mode: SweepModeArg,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        /// Blocklengths: `8:512:log`, `20:200:20` or `4,8,16`
        #[arg(long, value_parser = parse_n_grid)]
        n: NGrid,
        #[arg(long, value_enum, default_value_t = ConstraintArg::Maximal)]
        constraint: ConstraintArg,
        #[arg(long)]
        m: Option<f64>,
        #[arg(long)]
        rate_bits: Option<f64>,
        #[arg(long, value_parser = parse_theta, default_value = "capacity")]
        #[serde(skip)]
        theta: ThetaPolicy,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
    },
    /// Boundary table of the convex envelope, or one envelope point
    Envelope {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long)]
        theta2: f64,
        /// Number of energies in the boundary table
        #[arg(long, default_value_t = 50)]
        grid: usize,
        /// Largest energy in the boundary table
        #[arg(long, default_value_t = 4.0)]
        gamma_max: f64,
        /// Evaluate the envelope at this energy (needs --beta)
        #[arg(long, requires = "beta")]
        upsilon: Option<f64>,
        #[arg(long, requires = "upsilon")]
        beta: Option<f64>,
    },
    /// Sphere-packing exponent and related quantities
    Exponent {
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        /// Comma-separated rates in bits per channel use
        #[arg(long, value_delimiter = ',', required = true)]
        rate_bits: Vec<f64>,
    },
    /// Cone-packing bound
    Conepack {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: f64,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        /// Lift to the maximal power constraint
        #[arg(long)]
        maximal: bool,
    },
    /// Monte-Carlo ML error of two-dimensional constellations
    Simulate {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        m: usize,
        #[arg(long, allow_negative_numbers = true, default_value_t = 10.0)]
        snr_db: f64,
        #[arg(long, value_parser = parse_count, default_value = "1000000")]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ConstraintArg::Maximal)]
        constraint: ConstraintArg,
        /// Candidate evaluations for the search family
        #[arg(long, default_value_t = 300)]
        budget: usize,
        /// Write the constellation as `x y` lines to this file
        #[arg(long)]
        constellation_out: Option<String>,
    },
    /// Run built-in numerical checks
    Selftest {
        #[arg(long, value_enum, default_value_t = Suite::Quick)]
        suite: Suite,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SweepModeArg {
    Error,
    Maxrate,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Family {
    Psk,
    Apsk,
    Search,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Suite {
    Quick,
    Full,
}

/// Tabular result: column names and rows of already formatted cells, plus
/// the JSON form of the same data.
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    json: Value,
    exit: i32,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn log10(p: &Prob) -> f64 {
    p.ln_p / std::f64::consts::LN_10
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::Auto => "auto",
        Method::Exact => "exact",
        Method::SaddlepointFull => "sp-full",
        Method::SaddlepointHat => "sp-hat",
        Method::VerduHan => "vh",
    }
}

fn theta_label(t: ThetaPolicy) -> String {
    match t {
        ThetaPolicy::Capacity => "capacity".into(),
        ThetaPolicy::ExponentAsymptotic => "exponent-asymptotic".into(),
        ThetaPolicy::ExponentFiniteN => "exponent-finite-n".into(),
        ThetaPolicy::Fixed(v) => format!("fixed:{v}"),
    }
}

fn workers(common: &Common) -> usize {
    common
        .workers
        .or_else(|| std::env::var("AWGN_FLB_WORKERS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1)
        .max(1)
}

fn execute(cli: &Cli) -> Result<Table> {
    let w = workers(&cli.common);
    match &cli.command {
        Command::Bound { constraint, n, size, snr_db, theta, method } => {
            let q = BoundQuery {
                constraint: (*constraint).into(),
                n: *n,
                size: size.size(),
                snr_db: *snr_db,
                theta_policy: *theta,
                method: (*method).into(),
            };
            let r = compute_bound(&q)?;
            Ok(Table {
                columns: vec!["bound", "value", "log10_value", "method_used", "s_star", "t_star", "theta2_used", "warnings"],
                rows: vec![vec![
                    r.bound_name.clone(),
                    num(r.value.value()),
                    num(log10(&r.value)),
                    method_label(r.method_used).into(),
                    opt_num(r.s_star),
                    opt_num(r.t_star),
                    opt_num(r.theta2_used),
                    r.warnings.join("; "),
                ]],
                json: json!({
                    "bound": r.bound_name,
                    "value": r.value.value(),
                    "log10_value": log10(&r.value),
                    "method_used": method_label(r.method_used),
                    "s_star": r.s_star,
                    "t_star": r.t_star,
                    "theta2_used": r.theta2_used,
                    "warnings": r.warnings,
                }),
                exit: EXIT_OK,
            })
        }
        Command::Sweep { mode, eps, snr_db, n, constraint, m, rate_bits, theta, method } => {
            let size = match (m, rate_bits, mode) {
                (Some(m), _, _) => CodeSize::Cardinality(*m),
                (None, Some(r), _) => CodeSize::RateBits(*r),
                (None, None, SweepModeArg::Maxrate) => CodeSize::RateBits(1.0),
                (None, None, SweepModeArg::Error) => {
                    return Err(Error::InvalidParams("error sweep needs --m or --rate-bits".into()))
                }
            };
            let mut q = BoundQuery::new((*constraint).into(), n.0.first().copied().unwrap_or(1), size, *snr_db);
            q.theta_policy = *theta;
            q.method = (*method).into();
            let sm = match mode {
                SweepModeArg::Error => SweepMode::ErrorVsN,
                SweepModeArg::Maxrate => SweepMode::MaxrateVsN,
            };
            let rows = sweep(sm, &n.0, &q, *eps, w)?;
            let table_rows = rows
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        opt_num(r.rate_bits),
                        opt_num(r.m),
                        opt_num(r.value.map(|v| v.value())),
                        opt_num(r.value.map(|v| log10(&v))),
                        r.method.map(method_label).unwrap_or_default().into(),
                        r.error.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            Ok(Table {
                columns: vec!["n", "rate_bits", "m", "value", "log10_value", "method", "error"],
                rows: table_rows,
                json: serde_json::to_value(&rows).unwrap_or(Value::Null),
                exit: EXIT_OK,
            })
        }
        Command::Envelope { n, sigma2, theta2, grid, gamma_max, upsilon, beta } => {
            if let (Some(u), Some(b)) = (upsilon, beta) {
                let sol = f_envelope(*n, *u, *sigma2, *theta2, LogValue::new(*b))?;
                return Ok(Table {
                    columns: vec![
                        "upsilon", "beta", "value", "log10_value", "gamma0", "t0", "beta0", "bar_beta", "lambda",
                        "on_boundary_or_above",
                    ],
                    rows: vec![vec![
                        num(*u),
                        num(*b),
                        num(sol.value.value()),
                        num(log10(&sol.value)),
                        num(sol.gamma0),
                        num(sol.t0),
                        num(sol.beta0.value()),
                        num(sol.bar_beta.value()),
                        num(sol.lambda),
                        sol.on_boundary_or_above.to_string(),
                    ]],
                    json: serde_json::to_value(&sol).unwrap_or(Value::Null),
                    exit: EXIT_OK,
                });
            }
            if *grid == 0 || !(*gamma_max > 0.0) {
                return Err(Error::InvalidParams("grid must be positive and gamma_max > 0".into()));
            }
            let gammas: Vec<f64> = (1..=*grid).map(|k| gamma_max * k as f64 / *grid as f64).collect();
            let curve = boundary_curve(*n, *sigma2, *theta2, &gammas)?;
            let rows = curve
                .iter()
                .map(|b| {
                    vec![
                        num(b.gamma),
                        num(b.t0),
                        num(b.beta0.value()),
                        num(log10(&b.beta0)),
                        num(b.bar_t_star),
                        num(b.bar_beta.value()),
                    ]
                })
                .collect();
            Ok(Table {
                columns: vec!["gamma", "t0", "beta0", "log10_beta0", "bar_t_star", "bar_beta"],
                rows,
                json: serde_json::to_value(&curve).unwrap_or(Value::Null),
                exit: EXIT_OK,
            })
        }
        Command::Exponent { snr_db, rate_bits } => {
            let u = snr_to_upsilon(*snr_db);
            let cap_bits = 0.5 * (u / SIGMA2).ln_1p() / std::f64::consts::LN_2;
            let mut rows = Vec::new();
            let mut reports = Vec::new();
            for &r in rate_bits {
                let rep = sphere_packing(r * std::f64::consts::LN_2, u, SIGMA2)?;
                rows.push(vec![
                    num(r),
                    num(rep.s_star),
                    num(rep.esp),
                    num(rep.theta_tilde2),
                    num(rep.augustin / std::f64::consts::LN_2),
                    num(rep.critical_rate_nats / std::f64::consts::LN_2),
                    num(cap_bits),
                ]);
                reports.push(rep);
            }
            Ok(Table {
                columns: vec!["rate_bits", "s_star", "esp_nats", "theta_tilde2", "augustin_bits", "critical_rate_bits", "capacity_bits"],
                rows,
                json: json!({ "capacity_bits": cap_bits, "reports": reports }),
                exit: EXIT_OK,
            })
        }
        Command::Conepack { n, m, snr_db, maximal } => {
            let u = snr_to_upsilon(*snr_db);
            let r = if *maximal { cone_packing_maximal(*n, *m, u, SIGMA2)? } else { cone_packing(*n, *m, u, SIGMA2)? };
            Ok(Table {
                columns: vec!["bound", "value", "log10_value", "half_angle"],
                rows: vec![vec![r.bound_name.clone(), num(r.value.value()), num(log10(&r.value)), opt_num(r.t_star)]],
                json: json!({
                    "bound": r.bound_name,
                    "value": r.value.value(),
                    "log10_value": log10(&r.value),
                    "half_angle": r.t_star,
                }),
                exit: EXIT_OK,
            })
        }
        Command::Simulate { family, m, snr_db, trials, seed, constraint, budget, constellation_out } => {
            let u = snr_to_upsilon(*snr_db);
            let kind: Constraint = (*constraint).into();
            let (c, est): (Constellation, _) = match family {
                Family::Psk => {
                    let c = make_psk(*m, u)?;
                    let e = ml_error_mc(&c, SIGMA2, *trials, *seed, w);
                    (c, e)
                }
                Family::Apsk => {
                    if *m < 3 {
                        return Err(Error::InvalidParams("apsk needs M >= 3".into()));
                    }
                    let c = make_apsk(&RingSpec::psk_plus_origin(*m), u, kind)?;
                    let e = ml_error_mc(&c, SIGMA2, *trials, *seed, w);
                    (c, e)
                }
                Family::Search => {
                    let cfg = SearchConfig {
                        budget: *budget,
                        final_trials: *trials,
                        seed: *seed,
                        workers: w,
                        ..SearchConfig::default()
                    };
                    let r = apsk_search(*m, u, SIGMA2, kind, &cfg)?;
                    (r.constellation, r.estimate)
                }
            };
            if let Some(path) = constellation_out {
                std::fs::write(path, c.to_text()).map_err(|e| Error::InvalidParams(format!("{path}: {e}")))?;
            }
            let lp = if est.error_prob > 0.0 { est.error_prob.log10() } else { f64::NEG_INFINITY };
            Ok(Table {
                columns: vec!["m", "error_prob", "log10_error_prob", "std_error", "trials", "seed"],
                rows: vec![vec![
                    c.len().to_string(),
                    num(est.error_prob),
                    num(lp),
                    num(est.std_error),
                    est.trials.to_string(),
                    est.seed.to_string(),
                ]],
                json: json!({ "m": c.len(), "estimate": est, "points": c.points }),
                exit: EXIT_OK,
            })
        }
        Command::Selftest { suite } => {
            let checks = crate::selftest::run(*suite == Suite::Full);
            let failed = checks.iter().filter(|c| !c.passed).count();
            let rows = checks
                .iter()
                .map(|c| vec![c.name.clone(), if c.passed { "pass" } else { "fail" }.into(), c.detail.clone()])
                .collect();
            let json = serde_json::to_value(&checks).unwrap_or(Value::Null);
            for c in checks.iter().filter(|c| !c.passed) {
                eprintln!("selftest failure: {} ({})", c.name, c.detail);
            }
            let exit = if failed > 0 { EXIT_NUMERIC } else { EXIT_OK };
            Ok(Table { columns: vec!["check", "status", "detail"], rows, json, exit })
        }
    }
}

fn config_json(cli: &Cli) -> Value {
    let mut v = serde_json::to_value(cli).unwrap_or(Value::Null);
    // policies are parsed into a type without a stable serialized form
    let theta = match &cli.command {
        Command::Bound { theta, .. } | Command::Sweep { theta, .. } => Some(theta_label(*theta)),
        _ => None,
    };
    if let (Some(t), Some(cmd)) = (theta, v.get_mut("command").and_then(|c| c.as_object_mut())) {
        if let Some(inner) = cmd.values_mut().next().and_then(|i| i.as_object_mut()) {
            inner.insert("theta".into(), Value::String(t));
        }
    }
    if let Some(common) = v.get_mut("common").and_then(|c| c.as_object_mut()) {
        common.insert("workers".into(), json!(workers(&cli.common)));
    }
    v
}

fn render(cli: &Cli, table: &Table) -> std::result::Result<Vec<u8>, String> {
    let version = env!("CARGO_PKG_VERSION");
    let timestamp = (!cli.common.no_timestamp)
        .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
    let config = config_json(cli);
    match cli.common.format {
        Format::Json => {
            let mut doc = json!({
                "artifact": "awgn-flb",
                "version": version,
                "config": config,
                "result": table.json,
            });
            if let Some(ts) = timestamp {
                doc["timestamp_unix"] = json!(ts);
            }
            let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| e.to_string())?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut out = Vec::new();
            let _ = writeln!(out, "# awgn-flb {version}");
            let _ = writeln!(out, "# config {config}");
            if let Some(ts) = timestamp {
                let _ = writeln!(out, "# timestamp_unix {ts}");
            }
            {
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(&table.columns).map_err(|e| e.to_string())?;
                for r in &table.rows {
                    w.write_record(r).map_err(|e| e.to_string())?;
                }
                w.flush().map_err(|e| e.to_string())?;
            }
            Ok(out)
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let table = match execute(&cli) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                Error::InvalidParams(_) => EXIT_USAGE,
                _ => EXIT_NUMERIC,
            };
        }
    };
    let bytes = match render(&cli, &table) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_NUMERIC;
        }
    };
    let written = match &cli.common.output {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| format!("{path}: {e}")),
        None => std::io::stdout().write_all(&bytes).map_err(|e| e.to_string()),
    };
    match written {
        Ok(()) => table.exit,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
