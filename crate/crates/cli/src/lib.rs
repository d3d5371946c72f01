//! Command-line adapter over `anderson-core`. Every command parses its flags,
//! calls one library operation and renders the result as JSON.
//!
//! Exit codes: 0 success, 1 verification mismatch or integrity failure,
//! 2 usage or parse error, 3 resource limit exceeded.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_traits::Zero;
use serde_json::{json, Value};

use anderson_core::fluctuations::{run_experiment, FluctuationConfig, FluctuationReport};
use anderson_core::hamiltonian::{mean_trace_exact, BoxSpec};
use anderson_core::reference_table::{compare_with_reference, TableComparison};
use anderson_core::variance::{
    classify, covariance_matrix, degenerate_basis, sigma_squared, Classification, Poly,
};
use anderson_core::walks::path_counts;
use anderson_core::{Budget, Error, MomentModel, MultiIndex, Rational, SupportClass};

pub const SCHEMA_VERSION: u32 = 1;
pub const BUDGET_ENV: &str = "ANDERSON_BUDGET";

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "anderson",
    version,
    about = "Fluctuations of polynomial linear statistics of the Anderson model"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Path counts p^k(β): the full table or a single entry.
    Pathcount {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        /// Multi-index "p:e;p:e", canonicalized before lookup.
        #[arg(long)]
        beta: Option<String>,
    },
    /// Recompute all k ≤ 5 path counts and compare with the reference table.
    VerifyTable {
        #[arg(long)]
        d: usize,
    },
    /// Limiting variance σ(p)² and the covariance matrix C(k, l).
    Variance {
        #[command(flatten)]
        pm: PolyModel,
    },
    /// Degenerate polynomials of a potential, each with its σ².
    Degenerate {
        #[command(flatten)]
        model: ModelDim,
    },
    /// Degenerate or nondegenerate.
    Classify {
        #[command(flatten)]
        pm: PolyModel,
    },
    /// Exact E[Tr H_L^k].
    MeanTrace {
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        model: ModelDim,
        #[arg(long = "L")]
        radius: usize,
    },
    /// Monte Carlo fluctuation report.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Write the samples as CSV (`index,value`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Table check, degeneracy certificates and one simulation in one document.
    Report {
        /// Potential whose degenerate polynomials are certified.
        #[arg(long, default_value = "discrete:1@1/2,-1@1/2")]
        cert_dist: String,
        #[command(flatten)]
        sim: ReportSim,
    },
}

#[derive(Debug, Args)]
pub struct PolyModel {
    /// Coefficients from degree 0 upwards, e.g. "0,0,1" for x².
    #[arg(long)]
    pub poly: String,
    #[command(flatten)]
    pub model: ModelDim,
}

#[derive(Debug, Args)]
pub struct ModelDim {
    /// `discrete:v@w,...`, `uniform:w` or `gaussian:v`.
    #[arg(long)]
    pub dist: String,
    #[arg(long)]
    pub d: usize,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub poly: String,
    #[arg(long)]
    pub dist: String,
    #[arg(long)]
    pub d: usize,
    #[arg(long = "L")]
    pub radius: usize,
    #[arg(long)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportSim {
    #[arg(long, default_value = "0,0,1")]
    pub poly: String,
    #[arg(long, default_value = "uniform:1")]
    pub dist: String,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long = "L", default_value_t = 200)]
    pub radius: usize,
    #[arg(long, default_value_t = 4000)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

/// What a run prints and how it exits.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(v: Value) -> Self {
        Self::with_code(EXIT_OK, v)
    }

    fn with_code(code: i32, v: Value) -> Self {
        Self {
            code,
            stdout: render(&v),
            stderr: String::new(),
        }
    }

    fn failure(code: i32, kind: &str, message: &str) -> Self {
        let v = json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "kind": kind, "message": message },
        });
        Self {
            code,
            stdout: String::new(),
            stderr: render(&v),
        }
    }

    pub fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).expect("stdout is JSON")
    }
}

fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Failure that already knows its exit code.
struct Failure(Outcome);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::InvalidArgument(_) | Error::OutOfRange { .. } => {
                (EXIT_USAGE, "invalid-argument")
            }
            Error::Parse(_) => (EXIT_USAGE, "parse"),
            Error::ResourceLimit { .. } => (EXIT_RESOURCE, "resource-limit"),
            Error::Integrity(_) => (EXIT_MISMATCH, "integrity"),
        };
        Failure(Outcome::failure(code, kind, &e.to_string()))
    }
}

fn io_failure(e: std::io::Error, path: &std::path::Path) -> Failure {
    Failure(Outcome::failure(
        EXIT_USAGE,
        "io",
        &format!("{}: {e}", path.display()),
    ))
}

type Run<T> = std::result::Result<T, Failure>;

/// Budget from `ANDERSON_BUDGET`, or the library default.
pub fn budget_from_env(value: Option<&str>) -> std::result::Result<Budget, Error> {
    match value {
        None => Ok(Budget::DEFAULT),
        Some(s) => s.trim().parse::<u128>().map(Budget).map_err(|_| {
            Error::Parse(format!("{BUDGET_ENV} must be a decimal integer, got {s:?}"))
        }),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, S>(args: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Outcome {
                    code: EXIT_OK,
                    stdout: e.to_string(),
                    stderr: String::new(),
                },
                _ => Outcome::failure(EXIT_USAGE, "usage", e.to_string().trim_end()),
            };
        }
    };
    let env = std::env::var(BUDGET_ENV).ok();
    let budget = match budget_from_env(env.as_deref()) {
        Ok(b) => b,
        Err(e) => return Failure::from(e).0,
    };
    let exec = || execute(&cli.command, budget).unwrap_or_else(|f| f.0);
    match cli.threads {
        None => exec(),
        Some(0) => Outcome::failure(EXIT_USAGE, "usage", "--threads must be at least 1"),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(exec),
            Err(e) => Outcome::failure(EXIT_USAGE, "usage", &e.to_string()),
        },
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Run<T> {
    Ok(s.parse::<T>()?)
}

fn rat(r: &Rational) -> Value {
    Value::String(r.to_string())
}

/// Non-finite floats become null.
fn float(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn envelope(command: &str, mut body: Value) -> Value {
    let obj = body.as_object_mut().expect("bodies are objects");
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    body
}

fn execute(cmd: &Command, budget: Budget) -> Run<Outcome> {
    match cmd {
        Command::Pathcount { k, d, beta } => {
            let body = match beta {
                Some(b) => pathcount_single(*k, *d, &MultiIndex::parse(b, *d)?, budget)?,
                None => pathcount_table(*k, *d, budget)?,
            };
            Ok(Outcome::ok(envelope("pathcount", body)))
        }
        Command::VerifyTable { d } => {
            if !(1..=3).contains(d) {
                return Err(Error::InvalidArgument(format!(
                    "verify-table supports d ∈ {{1, 2, 3}}, got {d}"
                ))
                .into());
            }
            let cmp = compare_with_reference(*d, budget)?;
            let code = if cmp.matches() {
                EXIT_OK
            } else {
                EXIT_MISMATCH
            };
            Ok(Outcome::with_code(
                code,
                envelope("verify-table", table_json(&cmp)),
            ))
        }
        Command::Variance { pm } => {
            let (p, model) = poly_model(pm)?;
            let m = p.require_nonconstant()?;
            let sigma2 = sigma_squared(&p, pm.model.d, &model, budget)?;
            let c = covariance_matrix(m, pm.model.d, &model, budget)?;
            let c: Vec<Vec<Value>> = c.iter().map(|row| row.iter().map(rat).collect()).collect();
            Ok(Outcome::ok(envelope(
                "variance",
                json!({
                    "poly": p.to_string(),
                    "dist": model.to_string(),
                    "d": pm.model.d,
                    "sigma2": rat(&sigma2),
                    "sigma2_float": float(anderson_core::moments::to_f64(&sigma2)),
                    "covariance_matrix": c,
                }),
            )))
        }
        Command::Degenerate { model: md } => {
            let model: MomentModel = parse(&md.dist)?;
            let body = degenerate_json(&model, md.d, budget)?;
            let code = if body["certified"] == json!(true) {
                EXIT_OK
            } else {
                EXIT_MISMATCH
            };
            Ok(Outcome::with_code(code, envelope("degenerate", body)))
        }
        Command::Classify { pm } => {
            let (p, model) = poly_model(pm)?;
            let out = classify(&p, &model, pm.model.d, budget)?;
            Ok(Outcome::ok(envelope(
                "classify",
                json!({
                    "poly": p.to_string(),
                    "dist": model.to_string(),
                    "d": pm.model.d,
                    "class": match out.class {
                        Classification::Degenerate => "degenerate",
                        Classification::Nondegenerate => "nondegenerate",
                    },
                    "sigma2": rat(&out.sigma2),
                }),
            )))
        }
        Command::MeanTrace {
            k,
            model: md,
            radius,
        } => {
            let model: MomentModel = parse(&md.dist)?;
            let bx = BoxSpec::new(md.d, *radius)?;
            let mean = mean_trace_exact(*k, bx, &model, budget)?;
            Ok(Outcome::ok(envelope(
                "mean-trace",
                json!({
                    "k": k,
                    "dist": model.to_string(),
                    "d": md.d,
                    "L": radius,
                    "mean": rat(&mean),
                }),
            )))
        }
        Command::Simulate { sim, out } => {
            let config = FluctuationConfig {
                poly: parse(&sim.poly)?,
                model: parse(&sim.dist)?,
                d: sim.d,
                radius: sim.radius,
                samples: sim.samples,
                seed: sim.seed,
            };
            let report = run_experiment(config, budget)?;
            let mut body = report_json(&report);
            if let Some(path) = out {
                let f = File::create(path).map_err(|e| io_failure(e, path))?;
                report
                    .write_csv(BufWriter::new(f))
                    .map_err(|e| io_failure(e, path))?;
                body["csv"] = json!(path.display().to_string());
            }
            Ok(Outcome::ok(envelope("simulate", body)))
        }
        Command::Report { cert_dist, sim } => {
            let cert_model: MomentModel = parse(cert_dist)?;
            let config = FluctuationConfig {
                poly: parse(&sim.poly)?,
                model: parse(&sim.dist)?,
                d: sim.d,
                radius: sim.radius,
                samples: sim.samples,
                seed: sim.seed,
            };
            let mut tables = Vec::new();
            let mut ok = true;
            for d in 1..=3 {
                let cmp = compare_with_reference(d, budget)?;
                ok &= cmp.matches();
                tables.push(table_json(&cmp));
            }
            let mut certificates = Vec::new();
            for d in 1..=3 {
                let c = degenerate_json(&cert_model, d, budget)?;
                ok &= c["certified"] == json!(true);
                certificates.push(c);
            }
            let report = run_experiment(config, budget)?;
            let body = json!({
                "tables": tables,
                "certificates": certificates,
                "simulation": report_json(&report),
                "verified": ok,
            });
            let code = if ok { EXIT_OK } else { EXIT_MISMATCH };
            Ok(Outcome::with_code(code, envelope("report", body)))
        }
    }
}

fn poly_model(pm: &PolyModel) -> Run<(Poly, MomentModel)> {
    Ok((parse(&pm.poly)?, parse(&pm.model.dist)?))
}

pub fn pathcount_table(k: usize, d: usize, budget: Budget) -> Result<Value, Error> {
    let table = path_counts(k, d, budget)?;
    let counts: Vec<Value> = table
        .iter()
        .map(|(beta, c)| json!({ "beta": beta.to_string(), "count": c }))
        .collect();
    Ok(json!({ "k": k, "d": d, "total": table.total(), "counts": counts }))
}

pub fn pathcount_single(
    k: usize,
    d: usize,
    beta: &MultiIndex,
    budget: Budget,
) -> Result<Value, Error> {
    let canonical = if beta.is_zero() {
        beta.clone()
    } else {
        beta.canonicalize()?.0
    };
    let count = if beta.is_zero() {
        0
    } else {
        path_counts(k, d, budget)?.get(&canonical)?
    };
    Ok(json!({ "k": k, "d": d, "beta": canonical.to_string(), "count": count }))
}

pub fn table_json(cmp: &TableComparison) -> Value {
    let rows: Vec<Value> = cmp
        .rows
        .iter()
        .map(|r| {
            json!({
                "k": r.k,
                "class": r.label.to_string(),
                "expected": r.expected,
                "observed": r.observed,
                "match": r.matches,
            })
        })
        .collect();
    let unexpected: Vec<Value> = cmp
        .unexpected
        .iter()
        .map(|(k, beta, c)| json!({ "k": k, "beta": beta.to_string(), "count": c }))
        .collect();
    json!({ "d": cmp.d, "match": cmp.matches(), "rows": rows, "unexpected": unexpected })
}

pub fn degenerate_json(model: &MomentModel, d: usize, budget: Budget) -> Result<Value, Error> {
    let basis = degenerate_basis(model, d);
    let mut certified = true;
    let mut entries = Vec::new();
    for q in &basis {
        let s = sigma_squared(q, d, model, budget)?;
        certified &= s.is_zero();
        entries.push(json!({ "poly": q.to_string(), "sigma2": rat(&s) }));
    }
    let support = match model.support_class() {
        SupportClass::TwoPoint(..) => "two-point",
        SupportClass::ThreePoint(..) => "three-point",
        SupportClass::Many => "many",
    };
    Ok(json!({
        "dist": model.to_string(),
        "d": d,
        "support": support,
        "basis": entries,
        "certified": certified,
    }))
}

pub fn report_json(r: &FluctuationReport) -> Value {
    let c = &r.config;
    let diag = r.diagnostics;
    json!({
        "config": {
            "poly": c.poly.to_string(),
            "dist": c.model.to_string(),
            "d": c.d,
            "L": c.radius,
            "samples": c.samples,
            "seed": c.seed,
        },
        "predicted_sigma2": rat(&r.predicted_sigma2),
        "predicted_sigma2_float": float(anderson_core::moments::to_f64(&r.predicted_sigma2)),
        "exact_mean": rat(&r.exact_mean),
        "empirical_mean": float(r.empirical_mean),
        "empirical_var": float(r.empirical_var),
        "skewness": diag.map_or(Value::Null, |m| float(m.skewness)),
        "excess_kurtosis": diag.map_or(Value::Null, |m| float(m.excess_kurtosis)),
        "se_skew": diag.map_or(Value::Null, |m| float(m.se_skew)),
        "se_kurt": diag.map_or(Value::Null, |m| float(m.se_kurt)),
        "constant_samples": diag.map_or(Value::Null, |m| json!(m.degenerate)),
        "ks_statistic": r.ks.map_or(Value::Null, |k| float(k.statistic)),
        "ks_pvalue": r.ks.map_or(Value::Null, |k| float(k.pvalue)),
    })
}
