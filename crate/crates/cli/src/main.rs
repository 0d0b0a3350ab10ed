//! Batch front end: validate trial data, estimate strategy curves, run
//! log-rank tests, and simulate/calibrate.
//!
//! Exit codes: 0 success, 1 estimation-domain error (e.g. a degenerate
//! principal stratum), 2 input error.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use estimand_core::data::{parse_dataset, write_csv, Form, Schema};
use estimand_core::estimands::{cloglog_band, Analysis, StrategyKind, SurvivalTransform};
use estimand_core::logrank::{logrank, TestKind, WeightSpec};
use estimand_core::sim::{run_calibration, simulate, SimConfig};
use estimand_core::{Dataset, Error};

#[derive(Parser)]
#[command(
    name = "estimand",
    about = "Cumulative incidences, treatment effects and tests for two-arm \
             trials with a time-to-event intercurrent event",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset and report observable issues without rejecting it.
    Validate(ValidateArgs),
    /// Estimate cumulative incidence and effect curves per strategy.
    Estimate(EstimateArgs),
    /// Run the applicable log-rank tests.
    Test(TestArgs),
    /// Generate trial data; optionally run a Monte Carlo calibration.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV: either full form (t_obs, delta_t, r_obs, delta_r) or
    /// reduced form (time, cause).
    #[arg(long)]
    input: PathBuf,
    /// Analysis horizon t*.
    #[arg(long = "t-star")]
    t_star: f64,
    /// Column-name overrides, e.g. "arm=trt,time=days".
    #[arg(long)]
    columns: Option<String>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Strategies you intend to run; used for applicability warnings.
    #[arg(long, default_value = "all")]
    strategies: String,
    /// Report file (JSON); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated subset of tp,cv,wo,hp1,hp2,ps, or "all".
    #[arg(long, default_value = "all")]
    strategies: String,
    /// Confidence level for pointwise intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Output directory for the curve files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Evaluation times; default is the union of observed event times.
    #[arg(long)]
    times: Option<String>,
    /// Use the product-limit survival transform instead of exp(-Lambda).
    #[arg(long = "product-limit")]
    product_limit: bool,
    /// Confidence-interval scale for the incidence curves. "cloglog" builds
    /// the interval for log(-log(1 - mu)) and back-transforms, keeping the
    /// bounds inside (0, 1) in small samples; effect intervals always use
    /// the plain scale.
    #[arg(long = "ci-scale", value_enum, default_value_t = CiScale::Plain)]
    ci_scale: CiScale,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CiScale {
    Plain,
    Cloglog,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Results file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    a1: f64,
    #[arg(long)]
    a0: f64,
    #[arg(long, default_value_t = 0.0)]
    c1: f64,
    #[arg(long, default_value_t = 0.0)]
    c0: f64,
    #[arg(long = "censor-rate", default_value_t = 0.0)]
    censor_rate: f64,
    /// Arm-0 censoring hazard; overrides --censor-rate (requires --censor-rate1).
    #[arg(long = "censor-rate0", requires = "censor_rate1")]
    censor_rate0: Option<f64>,
    /// Arm-1 censoring hazard; overrides --censor-rate (requires --censor-rate0).
    #[arg(long = "censor-rate1", requires = "censor_rate0")]
    censor_rate1: Option<f64>,
    #[arg(long = "n-per-arm")]
    n_per_arm: usize,
    #[arg(long = "t-star")]
    t_star: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset file (or calibration report with --calibrate); stdout when
    /// omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a calibration study instead of writing one dataset.
    #[arg(long)]
    calibrate: bool,
    #[arg(long, default_value_t = 1000)]
    replications: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("ESTIMAND_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("ESTIMAND_THREADS must be a positive integer");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

struct CliError {
    code: u8,
    message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            // Bad input data.
            Error::MalformedRow { .. }
            | Error::MissingColumn(_)
            | Error::MixedForm
            | Error::EmptyArm(_)
            | Error::Csv(_)
            | Error::Io(_) => 2,
            // Estimation-domain failures on valid input.
            Error::WrongForm { .. }
            | Error::ZeroRisk(_)
            | Error::RiskSetEmptyAtEvent(_)
            | Error::DegenerateStratum { .. }
            | Error::NoEvents(_) => 1,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError { code: 2, message: e.to_string() }
    }
}

fn input_error(message: impl Into<String>) -> CliError {
    CliError { code: 2, message: message.into() }
}

fn schema_from(columns: &Option<String>) -> Result<Schema, CliError> {
    let mut schema = Schema::default();
    let Some(spec) = columns else { return Ok(schema) };
    for pair in spec.split(',').filter(|s| !s.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| input_error(format!("bad --columns entry `{pair}`, expected key=value")))?;
        let slot = match key.trim() {
            "id" => &mut schema.id,
            "arm" => &mut schema.arm,
            "t_obs" => &mut schema.t_obs,
            "delta_t" => &mut schema.delta_t,
            "r_obs" => &mut schema.r_obs,
            "delta_r" => &mut schema.delta_r,
            "time" => &mut schema.time,
            "cause" => &mut schema.cause,
            other => return Err(input_error(format!("unknown column key `{other}`"))),
        };
        *slot = value.trim().to_string();
    }
    Ok(schema)
}

fn load_dataset(args: &InputArgs) -> Result<Dataset, CliError> {
    let schema = schema_from(&args.columns)?;
    let file = File::open(&args.input)
        .map_err(|e| input_error(format!("cannot open {}: {e}", args.input.display())))?;
    Ok(parse_dataset(file, &schema, args.t_star)?)
}

/// "all" or a comma list; `explicit` reports whether the user named them.
fn parse_strategies(spec: &str) -> Result<(Vec<StrategyKind>, bool), CliError> {
    if spec.eq_ignore_ascii_case("all") {
        return Ok((StrategyKind::ALL.to_vec(), false));
    }
    let mut out = Vec::new();
    for name in spec.split(',').filter(|s| !s.is_empty()) {
        let s = StrategyKind::parse(name.trim())
            .ok_or_else(|| input_error(format!("unknown strategy `{name}`")))?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    if out.is_empty() {
        return Err(input_error("strategy list is empty"));
    }
    Ok((out, true))
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)?;
                }
            }
            fs::write(p, content)?;
        }
        None => io::stdout().write_all(content.as_bytes())?,
    }
    Ok(())
}

/// 10 significant digits, matching the documented output precision.
fn fmt10(x: f64) -> String {
    format!("{x:.9e}")
}

fn cmd_validate(args: ValidateArgs) -> Result<(), CliError> {
    let (strategies, _) = parse_strategies(&args.strategies)?;
    let ds = load_dataset(&args.input)?;
    let report = ds.validate();
    let mut warnings: Vec<String> = Vec::new();
    if report.form == Form::Reduced && strategies.contains(&StrategyKind::TreatmentPolicy) {
        warnings.push("tp not applicable: requires full-form data".into());
    }
    if report.positivity_flag {
        warnings.push("t_star exceeds the last observed time in some arm".into());
    }
    if report.tied_event_rows > 0 {
        warnings.push(format!(
            "{} row(s) with outcome and intercurrent events at the same time; ties resolve to the outcome",
            report.tied_event_rows
        ));
    }
    if report.nontruncating_rows > 0 {
        warnings.push(format!(
            "{} row(s) with the outcome observed after the intercurrent track was censored",
            report.nontruncating_rows
        ));
    }
    // Bound on |exp(-Lambda_12) - prod(1 - dLambda_12)| over [0, t*]: the
    // per-jump gap is at most dLambda^2 / 2, so the transforms can differ by
    // at most half the sum of squared increments (largest arm reported).
    // Null when the hazards cannot be built (e.g. an empty risk set).
    let discrepancy_bound = Analysis::from_dataset(&ds).ok().map(|analysis| {
        (0..2u8)
            .map(|w| {
                analysis
                    .hazards(w)
                    .composite
                    .jumps()
                    .iter()
                    .filter(|j| j.time <= ds.t_star)
                    .map(|j| j.d_lambda * j.d_lambda / 2.0)
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    });
    let doc = json!({
        "report": report,
        "warnings": warnings,
        "transform_discrepancy_bound": discrepancy_bound,
    });
    write_output(args.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&doc).unwrap()))
}

fn cmd_estimate(args: EstimateArgs) -> Result<(), CliError> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(input_error("--level must be in (0, 1)"));
    }
    let (mut strategies, explicit) = parse_strategies(&args.strategies)?;
    let ds = load_dataset(&args.input)?;
    let form = ds.form();
    if form == Form::Reduced {
        if explicit && strategies.contains(&StrategyKind::TreatmentPolicy) {
            return Err(Error::WrongForm { expected: "full" }.into());
        }
        if !explicit {
            strategies.retain(|s| *s != StrategyKind::TreatmentPolicy);
            eprintln!("note: tp skipped on reduced-form data");
        }
    }
    let analysis = Analysis::from_dataset(&ds)?;
    let grid: Vec<f64> = match &args.times {
        Some(spec) => {
            let mut ts = Vec::new();
            for tok in spec.split(',').filter(|s| !s.is_empty()) {
                let t: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| input_error(format!("bad --times entry `{tok}`")))?;
                if !(t.is_finite() && t >= 0.0) {
                    return Err(input_error("--times must be finite and nonnegative"));
                }
                ts.push(t);
            }
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ts.dedup();
            if ts.is_empty() {
                return Err(input_error("--times is empty"));
            }
            ts
        }
        None => analysis.default_grid(),
    };
    let transform = if args.product_limit {
        SurvivalTransform::ProductLimit
    } else {
        SurvivalTransform::Exponential
    };

    let results: Vec<_> = strategies
        .par_iter()
        .map(|&s| (s, analysis.estimate(s, &grid, args.level, transform)))
        .collect();

    fs::create_dir_all(&args.out)?;
    let mut json_doc = serde_json::Map::new();
    for (strategy, result) in results {
        let mut est = result.map_err(|e| {
            CliError::from(e).prefixed(&format!("strategy {}", strategy.short_name()))
        })?;
        if args.ci_scale == CiScale::Cloglog {
            for arm in &mut est.arms {
                let (lo, hi, clipped) = cloglog_band(&arm.mu, &arm.variance, args.level);
                (arm.ci_lo, arm.ci_hi, arm.clipped) = (lo, hi, clipped);
            }
        }
        match args.format {
            OutputFormat::Csv => {
                for arm in &est.arms {
                    let path = args.out.join(format!("{}_arm{}.csv", strategy.short_name(), arm.arm));
                    let mut f = BufWriter::new(File::create(path)?);
                    writeln!(f, "time,mu,variance,ci_lo,ci_hi,truncated")?;
                    for i in 0..grid.len() {
                        writeln!(
                            f,
                            "{},{},{},{},{},{}",
                            fmt10(grid[i]),
                            fmt10(arm.mu[i]),
                            fmt10(arm.variance[i]),
                            fmt10(arm.ci_lo[i]),
                            fmt10(arm.ci_hi[i]),
                            u8::from(arm.truncated[i])
                        )?;
                    }
                }
                let path = args.out.join(format!("{}_effect.csv", strategy.short_name()));
                let mut f = BufWriter::new(File::create(path)?);
                writeln!(f, "time,tau,variance,ci_lo,ci_hi,truncated")?;
                let e = &est.effect;
                for i in 0..grid.len() {
                    writeln!(
                        f,
                        "{},{},{},{},{},{}",
                        fmt10(grid[i]),
                        fmt10(e.tau[i]),
                        fmt10(e.variance[i]),
                        fmt10(e.ci_lo[i]),
                        fmt10(e.ci_hi[i]),
                        u8::from(e.truncated[i])
                    )?;
                }
            }
            OutputFormat::Json => {
                let arm_json = |a: &estimand_core::IncidenceResult| {
                    json!({
                        "mu": a.mu, "variance": a.variance,
                        "ci_lo": a.ci_lo, "ci_hi": a.ci_hi, "truncated": a.truncated,
                    })
                };
                json_doc.insert(
                    strategy.short_name().into(),
                    json!({
                        "arm0": arm_json(&est.arms[0]),
                        "arm1": arm_json(&est.arms[1]),
                        "effect": {
                            "tau": est.effect.tau, "variance": est.effect.variance,
                            "ci_lo": est.effect.ci_lo, "ci_hi": est.effect.ci_hi,
                            "truncated": est.effect.truncated,
                        },
                    }),
                );
            }
        }
    }
    if args.format == OutputFormat::Json {
        let doc = json!({ "time": grid, "level": args.level, "strategies": json_doc });
        fs::write(
            args.out.join("estimates.json"),
            format!("{}\n", serde_json::to_string_pretty(&doc).unwrap()),
        )?;
    }
    Ok(())
}

impl CliError {
    fn prefixed(self, prefix: &str) -> CliError {
        CliError { code: self.code, message: format!("{prefix}: {}", self.message) }
    }
}

fn cmd_test(args: TestArgs) -> Result<(), CliError> {
    let ds = load_dataset(&args.input)?;
    let form = ds.form();
    let analysis = Analysis::from_dataset(&ds)?;
    let rows: Vec<(TestKind, &str, Option<estimand_core::LogRankResult>)> = TestKind::ALL
        .par_iter()
        .map(|&test| {
            if test == TestKind::TP && form == Form::Reduced {
                return (test, "not_applicable", None);
            }
            match logrank(&analysis.procs, test, &WeightSpec::Constant) {
                Ok(r) => (test, "ok", Some(r)),
                Err(Error::NoEvents(_)) => (test, "no_events", None),
                Err(Error::WrongForm { .. }) => (test, "not_applicable", None),
                Err(_) => (test, "error", None),
            }
        })
        .collect();

    let content = match args.format {
        OutputFormat::Csv => {
            let mut s = String::from("test,status,u,s,z,p\n");
            for (test, status, result) in &rows {
                match result {
                    Some(r) => s.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        test.short_name(),
                        status,
                        fmt10(r.u_stat),
                        fmt10(r.s_var),
                        fmt10(r.z),
                        fmt10(r.p_two_sided)
                    )),
                    None => s.push_str(&format!("{},{},,,,\n", test.short_name(), status)),
                }
            }
            s
        }
        OutputFormat::Json => {
            let items: Vec<_> = rows
                .iter()
                .map(|(test, status, result)| match result {
                    Some(r) => json!({
                        "test": test.short_name(), "status": status,
                        "u": r.u_stat, "s": r.s_var, "z": r.z, "p": r.p_two_sided,
                    }),
                    None => json!({ "test": test.short_name(), "status": status }),
                })
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&items).unwrap())
        }
    };
    write_output(args.out.as_deref(), &content)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = SimConfig {
        a1: args.a1,
        a0: args.a0,
        c1: args.c1,
        c0: args.c0,
        censor_rate: args.censor_rate,
        arm_censor_rates: match (args.censor_rate0, args.censor_rate1) {
            (Some(r0), Some(r1)) => Some([r0, r1]),
            _ => None,
        },
        n_per_arm: args.n_per_arm,
        t_star: args.t_star,
        seed: args.seed,
    };
    cfg.validate().map_err(input_error)?;
    if args.calibrate {
        if !(args.level > 0.0 && args.level < 1.0) {
            return Err(input_error("--level must be in (0, 1)"));
        }
        if args.replications < 100 {
            return Err(input_error("--replications must be at least 100"));
        }
        let report = run_calibration(&cfg, args.replications, args.level);
        let content = format!("{}\n", serde_json::to_string_pretty(&report).unwrap());
        write_output(args.out.as_deref(), &content)
    } else {
        let ds = simulate(&cfg);
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf)?;
        write_output(args.out.as_deref(), std::str::from_utf8(&buf).unwrap())
    }
}
