//! Command-line front end.
//!
//! Every option can also come from a JSON config file (`--config`) whose
//! keys are the option names; flags win over the file. The seed falls back
//! to `SA_LAB_SEED`. Each report starts with the fully resolved config.

use crate::bounds::rates::{self, ExampleParams};
use crate::bounds::{
    bound_thm3, bound_thm6, bound_thm9, select_dimension, trivial_rosenthal_bound, BoundReport,
    ConditionVariant, DimensionChoice, ProblemInstance, Strategy, TailMoment, WhitenedMoment,
};
use crate::error::{Error, Result};
use crate::laws::IncrementKind;
use crate::lowerbound::{self, LatticeInstance};
use crate::mc::{self, Functional};
use crate::simulate::{self, couple_quantile, IncrementModel};
use crate::spectra::Spectrum;
use crate::stream::replicate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const SEED_ENV: &str = "SA_LAB_SEED";
const DEFAULT_SEED: u64 = 0;
const DEFAULT_REL_TOL: f64 = 1e-2;

#[derive(Parser, Debug)]
#[command(name = "sa-lab", version, about = "Strong Gaussian approximation of Hilbert-valued partial sums")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct GlobalArgs {
    /// JSON file with option values; flags override it.
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Master seed (default: $SA_LAB_SEED, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Constant of the dimension conditions.
    #[arg(long = "c-gamma", global = true)]
    c_gamma: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a coupling-rate bound.
    Bound(BoundArgs),
    /// Choose the truncation dimension.
    SelectDim(SelectDimArgs),
    /// Exact rate exponents of the worked examples.
    Rate(RateArgs),
    /// Quantile coupling and its discrepancy.
    Simulate(SimulateArgs),
    /// Lattice lower-bound pipeline.
    LowerBound(LowerBoundArgs),
    /// Monte Carlo sweep over n with an exponent fit.
    Sweep(SweepArgs),
    /// Empirical checks of the maximal and moment inequalities.
    Check(CheckArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bound(_) => "bound",
            Command::SelectDim(_) => "select-dim",
            Command::Rate(_) => "rate",
            Command::Simulate(_) => "simulate",
            Command::LowerBound(_) => "lower-bound",
            Command::Sweep(_) => "sweep",
            Command::Check(_) => "check",
        }
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct InstanceArgs {
    /// exp:α,β | poly:b | log:τ | explicit:v1,v2,...
    #[arg(long)]
    spectrum: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    psi: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    /// E‖Z‖^γ.
    #[arg(long)]
    moment: Option<f64>,
    /// Regular whitened moments K d^(γ/2).
    #[arg(long = "whitened-k")]
    whitened_k: Option<f64>,
    /// Whitened moments for d = 1, 2, ...
    #[arg(long, value_delimiter = ',')]
    whitened: Option<Vec<f64>>,
    /// Tail moments E‖Z^[d]‖^γ for d = 0, 1, ...
    #[arg(long = "tail-moment", value_delimiter = ',')]
    tail_moment: Option<Vec<f64>>,
    /// Bound the tail moments by E‖Z‖^γ.
    #[arg(long = "tail-total", num_args = 0..=1, default_missing_value = "true")]
    tail_total: Option<bool>,
    /// Reject E‖Z‖^γ below the Lyapunov floor instead of warning.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    strict: Option<bool>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct BoundArgs {
    #[command(flatten)]
    #[serde(flatten)]
    instance: InstanceArgs,
    /// 3, 6, 9 or rosenthal.
    #[arg(long)]
    theorem: Option<String>,
    /// Dimension; chosen by the max-feasible scan when absent.
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct SelectDimArgs {
    #[command(flatten)]
    #[serde(flatten)]
    instance: InstanceArgs,
    /// thm4 | thm6 | thm9 | example:1..5
    #[arg(long)]
    strategy: Option<String>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct RateArgs {
    #[arg(long)]
    example: Option<u8>,
    /// Rationals may be written p/q or as decimals.
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    psi: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    /// Add the lower/upper comparison (examples 1, 3, 5).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    compare: Option<bool>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ModelArgs {
    #[arg(long)]
    spectrum: Option<String>,
    /// lattice:λ | two-point | gaussian | uniform
    #[arg(long)]
    model: Option<String>,
    /// Truncation dimension (default: keep 99% of the variance).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: Option<usize>,
    /// Write the paths of replication 0 as CSV.
    #[arg(long = "dump-paths")]
    dump_paths: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct LowerBoundArgs {
    #[arg(long)]
    spectrum: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    /// Last simulated coordinate (default: keep 99.9% of B_k²).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    reps: Option<u64>,
    /// Moment order for the lower moment bound.
    #[arg(long)]
    gamma: Option<f64>,
    /// Coupled lattice paths on which to test the certificate.
    #[arg(long)]
    paths: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// delta | delta-inf | gaussian-max
    #[arg(long)]
    functional: Option<String>,
    #[arg(long = "n-grid", value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Compare the fitted slope with this value.
    #[arg(long = "expected-slope")]
    expected_slope: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct CheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// maximal | moment
    #[arg(long)]
    inequality: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Thresholds as multiples of √(n B²).
    #[arg(long = "x-grid", value_delimiter = ',')]
    x_grid: Option<Vec<f64>>,
    /// Enumerate all outcomes instead of sampling.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    exact: Option<bool>,
}

/// Parses `args` (including the program name), runs the command and writes
/// the report to `out` or to `--output`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(rendered.as_bytes());
            } else {
                eprint!("{rendered}");
            }
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Outcome {
    report: Value,
    csv: Option<Vec<Vec<String>>>,
    code: i32,
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let name = cli.command.name();
    let file = match &cli.global.config {
        Some(p) => load_config(p, name)?,
        None => Map::new(),
    };
    let mut global: GlobalArgs = overlay(&cli.global, &file)?;
    if global.seed.is_none() {
        global.seed = Some(match std::env::var(SEED_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("{SEED_ENV} must be an unsigned integer, got `{s}`")))?,
            Err(_) => DEFAULT_SEED,
        });
    }
    if matches!(cli.command, Command::Bound(_) | Command::SelectDim(_)) {
        global.c_gamma.get_or_insert(1.0);
    } else if global.c_gamma.is_some() {
        return Err(Error::invalid(format!("--c-gamma does not apply to `{name}`")));
    }
    let format = global.format.unwrap_or(Format::Json);
    global.format = Some(format);
    let threads = global.threads;
    if threads == Some(0) {
        return Err(Error::invalid("--threads must be at least 1"));
    }

    let known_global = keys_of(&GlobalArgs::default());
    let work = |global: &GlobalArgs| -> Result<(Value, Outcome)> {
        match &cli.command {
            Command::Bound(a) => finish(global, check_keys(&file, &known_global, a)?, cmd_bound),
            Command::SelectDim(a) => finish(global, check_keys(&file, &known_global, a)?, cmd_select_dim),
            Command::Rate(a) => finish(global, check_keys(&file, &known_global, a)?, cmd_rate),
            Command::Simulate(a) => finish(global, check_keys(&file, &known_global, a)?, cmd_simulate),
            Command::LowerBound(a) => finish(global, check_keys(&file, &known_global, a)?, cmd_lower_bound),
            Command::Sweep(a) => finish(global, check_keys(&file, &known_global, a)?, cmd_sweep),
            Command::Check(a) => finish(global, check_keys(&file, &known_global, a)?, cmd_check),
        }
    };
    let (config, outcome) = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| work(&global))?,
        None => work(&global)?,
    };

    let mut echo = json!({ "command": name });
    merge_into(&mut echo, &config);
    let mut g = serde_json::to_value(&global)?;
    if let Value::Object(m) = &mut g {
        m.remove("threads");
        m.remove("output");
    }
    merge_into(&mut echo, &g);

    let text = match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json!({ "config": echo, "result": outcome.report }))?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let rows = outcome
                .csv
                .ok_or_else(|| Error::invalid(format!("`{name}` has no CSV layout; use --format json")))?;
            let mut buf = Vec::new();
            writeln!(buf, "# config: {}", serde_json::to_string(&echo)?)?;
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in rows {
                w.write_record(&r)?;
            }
            w.flush()?;
            drop(w);
            String::from_utf8(buf).map_err(|e| Error::numerical(e.to_string()))?
        }
    };
    match &global.output {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(outcome.code)
}

fn finish<T>(global: &GlobalArgs, args: T, f: fn(&GlobalArgs, &mut T) -> Result<Outcome>) -> Result<(Value, Outcome)>
where
    T: Serialize,
{
    let mut args = args;
    let outcome = f(global, &mut args)?;
    Ok((serde_json::to_value(&args)?, outcome))
}

fn load_config(path: &PathBuf, command: &str) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    let Value::Object(m) = v else {
        return Err(Error::invalid("config file must hold a JSON object"));
    };
    let mut out = Map::new();
    for (k, v) in m {
        let key = k.replace('-', "_");
        if key == "command" {
            if v.as_str() != Some(command) {
                return Err(Error::invalid(format!("config file is for `{v}`, not `{command}`")));
            }
            continue;
        }
        out.insert(key, v);
    }
    Ok(out)
}

fn keys_of<T: Serialize>(t: &T) -> BTreeSet<String> {
    match serde_json::to_value(t) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => BTreeSet::new(),
    }
}

fn check_keys<T>(file: &Map<String, Value>, known_global: &BTreeSet<String>, flags: &T) -> Result<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let known = keys_of(&T::default());
    if let Some(k) = file.keys().find(|k| !known.contains(*k) && !known_global.contains(*k)) {
        return Err(Error::invalid(format!("unknown config key `{k}`")));
    }
    overlay(flags, file)
}

/// File values with every flag that was given written over them.
fn overlay<T: Serialize + DeserializeOwned>(flags: &T, file: &Map<String, Value>) -> Result<T> {
    let mut base = Value::Object(file.clone());
    merge_into(&mut base, &serde_json::to_value(flags)?);
    serde_json::from_value(base).map_err(|e| Error::invalid(format!("config: {e}")))
}

fn merge_into(base: &mut Value, top: &Value) {
    if let (Value::Object(b), Value::Object(t)) = (base, top) {
        for (k, v) in t {
            if !v.is_null() {
                b.insert(k.clone(), v.clone());
            }
        }
    }
}

fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::missing(format!("--{flag} is required")))
}

fn parse_spectrum(s: &Option<String>) -> Result<Spectrum> {
    need(s, "spectrum")?.parse()
}

fn build_instance(global: &GlobalArgs, a: &mut InstanceArgs) -> Result<ProblemInstance> {
    let spectrum = parse_spectrum(&a.spectrum)?;
    let gamma = need(&a.gamma, "gamma")?;
    let n = need(&a.n, "n")?;
    let moment = need(&a.moment, "moment")?;
    a.psi = Some(a.psi.unwrap_or(11.0));
    let mut inst = ProblemInstance::new(n, gamma, spectrum, moment)?
        .with_psi(a.psi.unwrap_or(11.0))?
        .with_c_gamma(global.c_gamma.unwrap_or(1.0))?;
    match (&a.whitened, a.whitened_k) {
        (Some(_), Some(_)) => return Err(Error::invalid("give either --whitened or --whitened-k, not both")),
        (Some(t), None) => inst = inst.with_whitened_moment(WhitenedMoment::Table(t.clone()))?,
        (None, Some(k)) => inst = inst.with_whitened_moment(WhitenedMoment::Regular { k })?,
        (None, None) => {}
    }
    match (&a.tail_moment, a.tail_total.unwrap_or(false)) {
        (Some(_), true) => return Err(Error::invalid("give either --tail-moment or --tail-total, not both")),
        (Some(t), false) => inst = inst.with_tail_moment(TailMoment::Table(t.clone()))?,
        (None, true) => inst = inst.with_tail_moment(TailMoment::Total)?,
        (None, false) => {}
    }
    if a.strict.unwrap_or(false) {
        inst = inst.strict()?;
    }
    Ok(inst)
}

fn scalar_rows(pairs: &[(&str, String)]) -> Vec<Vec<String>> {
    vec![
        pairs.iter().map(|p| p.0.to_owned()).collect(),
        pairs.iter().map(|p| p.1.clone()).collect(),
    ]
}

fn cmd_bound(global: &GlobalArgs, a: &mut BoundArgs) -> Result<Outcome> {
    let inst = build_instance(global, &mut a.instance)?;
    let theorem = a.theorem.clone().unwrap_or_else(|| "9".to_owned());
    a.theorem = Some(theorem.clone());
    let variant = match theorem.trim_start_matches("thm") {
        "9" => Some(ConditionVariant::Thm9),
        "6" => Some(ConditionVariant::Thm6),
        "3" => None,
        "rosenthal" => None,
        other => return Err(Error::invalid(format!("unknown theorem `{other}` (expected 3, 6, 9 or rosenthal)"))),
    };
    let mut choice: Option<DimensionChoice> = None;
    let d = match (a.d, theorem.trim_start_matches("thm")) {
        (_, "rosenthal") => 0,
        (Some(d), _) => d,
        (None, "3") => {
            let v = if inst.whitened_moment.is_some() { ConditionVariant::Thm4 } else { ConditionVariant::Thm9 };
            let c = select_dimension(&inst, Strategy::MaxFeasible(v))?;
            let d = c.d;
            choice = Some(c);
            d
        }
        (None, _) => {
            let c = select_dimension(&inst, Strategy::MaxFeasible(variant.expect("theorem variant")))?;
            let d = c.d;
            choice = Some(c);
            d
        }
    };
    let report: BoundReport = match theorem.trim_start_matches("thm") {
        "9" => bound_thm9(&inst, d)?,
        "6" => bound_thm6(&inst, d)?,
        "3" => bound_thm3(&inst, d)?,
        _ => trivial_rosenthal_bound(&inst),
    };
    let trivial = trivial_rosenthal_bound(&inst);
    let code = if report.overflow { 3 } else { 0 };
    let mut rows = vec![vec!["term".to_owned(), "value".to_owned(), "log10".to_owned()]];
    for t in report.terms.iter().chain(std::iter::once(&crate::bounds::Term {
        name: "total".to_owned(),
        value: report.total,
    })) {
        let v = t.value.value();
        rows.push(vec![
            t.name.clone(),
            if v.is_finite() { v.to_string() } else { String::new() },
            if t.value.is_zero() { String::new() } else { t.value.log10().to_string() },
        ]);
    }
    Ok(Outcome {
        report: json!({ "bound": report, "dimension": choice, "trivial": trivial, "instance": inst }),
        csv: Some(rows),
        code,
    })
}

fn parse_strategy(s: &str) -> Result<Strategy> {
    match s.trim() {
        "thm4" => Ok(Strategy::MaxFeasible(ConditionVariant::Thm4)),
        "thm6" => Ok(Strategy::MaxFeasible(ConditionVariant::Thm6)),
        "thm9" | "max-feasible" => Ok(Strategy::MaxFeasible(ConditionVariant::Thm9)),
        other => match other.strip_prefix("example:") {
            Some(id) => Ok(Strategy::ExampleFormula(
                id.parse().map_err(|_| Error::invalid(format!("bad example id `{id}`")))?,
            )),
            None => Err(Error::invalid(format!(
                "unknown strategy `{other}` (expected thm4, thm6, thm9 or example:1..5)"
            ))),
        },
    }
}

fn cmd_select_dim(global: &GlobalArgs, a: &mut SelectDimArgs) -> Result<Outcome> {
    let inst = build_instance(global, &mut a.instance)?;
    let strategy = a.strategy.clone().unwrap_or_else(|| "thm9".to_owned());
    a.strategy = Some(strategy.clone());
    let choice = select_dimension(&inst, parse_strategy(&strategy)?)?;
    let csv = scalar_rows(&[
        ("d", choice.d.to_string()),
        ("rule", serde_json::to_value(choice.rule)?.as_str().unwrap_or_default().to_owned()),
        ("condition_ok", choice.condition.map_or(String::new(), |c| c.ok.to_string())),
    ]);
    Ok(Outcome { report: json!({ "dimension": choice, "instance": inst }), csv: Some(csv), code: 0 })
}

fn rational_arg(v: &Option<String>, flag: &str) -> Result<rates::Rational> {
    rates::parse_rational(&need(v, flag)?)
}

fn cmd_rate(_global: &GlobalArgs, a: &mut RateArgs) -> Result<Outcome> {
    let id = need(&a.example, "example")?;
    let gamma = rational_arg(&a.gamma, "gamma")?;
    if a.psi.is_none() {
        a.psi = Some("11".to_owned());
    }
    let psi = rational_arg(&a.psi, "psi")?;
    let params = match id {
        1 | 2 => ExampleParams::Exponential {
            alpha: rational_arg(&a.alpha, "alpha")?,
            beta: rational_arg(&a.beta, "beta")?,
        },
        3 | 4 => ExampleParams::Polynomial { b: rational_arg(&a.b, "b")? },
        5 => ExampleParams::Logarithmic { tau: rational_arg(&a.tau, "tau")? },
        other => return Err(Error::invalid(format!("example id must be 1..=5, got {other}"))),
    };
    let report = rates::asymptotic_rate(id, &params, &gamma, &psi)?;
    let comparison = if a.compare.unwrap_or(false) {
        Some(rates::compare_lower_upper(id, &params, &gamma, &psi)?)
    } else {
        None
    };
    let mut rows = vec![vec!["regime".to_owned(), "n_power".to_owned(), "log_power".to_owned(), "governing".to_owned()]];
    for (i, r) in report.regimes.iter().enumerate() {
        rows.push(vec![
            r.name.clone(),
            r.order.n_power.to_string(),
            r.order.log_power.to_string(),
            (i == report.governing).to_string(),
        ]);
    }
    Ok(Outcome { report: json!({ "rate": report, "comparison": comparison }), csv: Some(rows), code: 0 })
}

fn build_model(m: &mut ModelArgs) -> Result<IncrementModel> {
    let spectrum = parse_spectrum(&m.spectrum)?;
    let kind: IncrementKind = need(&m.model, "model")?.parse()?;
    let dim = match m.dim {
        Some(d) => d,
        None => spectrum.truncation_dim(DEFAULT_REL_TOL)?,
    };
    m.dim = Some(dim);
    IncrementModel::new(kind, spectrum, dim)
}

fn seed_of(global: &GlobalArgs) -> u64 {
    global.seed.unwrap_or(DEFAULT_SEED)
}

fn cmd_simulate(global: &GlobalArgs, a: &mut SimulateArgs) -> Result<Outcome> {
    let model = build_model(&mut a.model)?;
    let n = need(&a.n, "n")?;
    let reps = a.model.reps.unwrap_or(1000);
    a.model.reps = Some(reps);
    let gamma = a.model.gamma.unwrap_or(2.0);
    a.model.gamma = Some(gamma);
    if reps < 2 {
        return Err(Error::invalid("--reps must be at least 2"));
    }
    let seed = seed_of(global);
    let draws = replicate(seed, 0, reps, |_, rng| couple_quantile(&model, n, rng).map(|p| (p.delta, p.delta_inf)));
    let mut d = Vec::with_capacity(draws.len());
    let mut di = Vec::with_capacity(draws.len());
    for r in draws {
        let (x, y) = r?;
        d.push(x.powf(gamma));
        di.push(y.powf(gamma));
    }
    let (mean, se) = simulate::mean_stderr(&d);
    let (mean_inf, se_inf) = simulate::mean_stderr(&di);
    if let Some(path) = &a.dump_paths {
        let p = simulate::couple_replication(&model, n, seed, 0)?;
        let f = std::fs::File::create(path)?;
        simulate::write_paths_csv(&p, &model, seed, f)?;
    }
    let report = json!({
        "n": n,
        "gamma": gamma,
        "reps": reps,
        "master_seed": seed,
        "delta_moment": { "mean": mean, "stderr": se },
        "delta_inf_moment": { "mean": mean_inf, "stderr": se_inf },
        "discarded_variance": model.discarded_variance(),
    });
    let csv = scalar_rows(&[
        ("n", n.to_string()),
        ("gamma", gamma.to_string()),
        ("reps", reps.to_string()),
        ("seed", seed.to_string()),
        ("delta_mean", mean.to_string()),
        ("delta_stderr", se.to_string()),
        ("delta_inf_mean", mean_inf.to_string()),
        ("delta_inf_stderr", se_inf.to_string()),
        ("discarded_variance", model.discarded_variance().to_string()),
    ]);
    Ok(Outcome { report, csv: Some(csv), code: 0 })
}

fn cmd_lower_bound(global: &GlobalArgs, a: &mut LowerBoundArgs) -> Result<Outcome> {
    let spectrum = parse_spectrum(&a.spectrum)?;
    let lambda = need(&a.lambda, "lambda")?;
    let n = need(&a.n, "n")?;
    let dim = match a.dim {
        Some(d) => d,
        None => lowerbound::default_dim(&spectrum, lambda, n)?,
    };
    a.dim = Some(dim);
    let reps = a.reps.unwrap_or(10_000);
    a.reps = Some(reps);
    let seed = seed_of(global);
    let inst: LatticeInstance = lowerbound::build_lattice_instance(&spectrum, lambda, n, dim)?;
    let summary = lowerbound::simulate_u(&inst, reps, seed)?;
    let lower = match a.gamma {
        Some(g) => Some(lowerbound::lower_moment_bound(&inst, g)?),
        None => None,
    };
    let cert = match a.paths {
        Some(p) if p > 0 => Some(lowerbound::certificate_check(&inst, p, seed)?),
        _ => None,
    };
    let report = json!({
        "lambda": inst.lambda,
        "n": inst.n,
        "k": inst.k,
        "dim": inst.dim,
        "a": inst.a,
        "b": inst.b,
        "a_head": inst.a_head,
        "a_tail": inst.a_tail,
        "b_tail": inst.b_tail,
        "feller_floor": inst.feller_floor,
        "empirical_prob": summary.empirical_prob,
        "empirical_prob_stderr": summary.empirical_prob_stderr,
        "mean_u": summary.mean_u,
        "stderr_u": summary.stderr_u,
        "certified_quantiles": summary.certified_quantiles,
        "truncation_deficit": summary.truncation_deficit,
        "truncation_bracket": summary.truncation_bracket,
        "captured_fraction": inst.captured_fraction,
        "lower_moment": lower,
        "certificate": cert,
        "reps": reps,
        "master_seed": seed,
        "diagnostics": inst.diagnostics,
    });
    let csv = scalar_rows(&[
        ("lambda", inst.lambda.to_string()),
        ("n", inst.n.to_string()),
        ("k", inst.k.to_string()),
        ("dim", inst.dim.to_string()),
        ("a", inst.a.to_string()),
        ("b", inst.b.to_string()),
        ("feller_floor", inst.feller_floor.to_string()),
        ("empirical_prob", summary.empirical_prob.to_string()),
        ("empirical_prob_stderr", summary.empirical_prob_stderr.to_string()),
        ("mean_u", summary.mean_u.to_string()),
        ("stderr_u", summary.stderr_u.to_string()),
        ("truncation_deficit", summary.truncation_deficit.to_string()),
        ("reps", reps.to_string()),
        ("seed", seed.to_string()),
    ]);
    Ok(Outcome { report, csv: Some(csv), code: 0 })
}

fn cmd_sweep(global: &GlobalArgs, a: &mut SweepArgs) -> Result<Outcome> {
    let model = build_model(&mut a.model)?;
    let functional: Functional = a.functional.clone().unwrap_or_else(|| "gaussian-max".to_owned()).parse()?;
    a.functional = Some(functional.to_string());
    let grid = need(&a.n_grid, "n-grid")?;
    let gamma = a.model.gamma.unwrap_or(2.0);
    a.model.gamma = Some(gamma);
    let reps = a.model.reps.unwrap_or(1000);
    a.model.reps = Some(reps);
    let seed = seed_of(global);
    let sw = mc::sweep(&model, functional, &grid, gamma, reps, seed)?;
    let check = match (&sw.fit, a.expected_slope) {
        (Some(f), Some(e)) => Some(mc::check_slope(f, e)),
        _ => None,
    };
    let mut rows = vec![["n", "mean", "stderr", "reps", "seed", "scenario_id"].map(String::from).to_vec()];
    for r in &sw.rows {
        rows.push(vec![
            r.n.to_string(),
            r.mean.to_string(),
            r.stderr.to_string(),
            r.reps.to_string(),
            r.seed.to_string(),
            r.scenario_id.clone(),
        ]);
    }
    let report = json!({
        "rows": sw.rows,
        "fit": sw.fit,
        "slope_check": check,
        "discarded_variance": model.discarded_variance(),
    });
    Ok(Outcome { report, csv: Some(rows), code: 0 })
}

fn cmd_check(global: &GlobalArgs, a: &mut CheckArgs) -> Result<Outcome> {
    let model = build_model(&mut a.model)?;
    let n = need(&a.n, "n")?;
    let which = a.inequality.clone().unwrap_or_else(|| "maximal".to_owned());
    a.inequality = Some(which.clone());
    let exact = a.exact.unwrap_or(false);
    a.exact = Some(exact);
    let reps = a.model.reps.unwrap_or(10_000);
    a.model.reps = Some(reps);
    let seed = seed_of(global);
    match which.as_str() {
        "maximal" => {
            let mult = a.x_grid.clone().unwrap_or_else(|| (1..=10).map(|i| 0.5 * i as f64).collect());
            a.x_grid = Some(mult.clone());
            let scale = (n as f64 * model.variance()).sqrt();
            let xs: Vec<f64> = mult.iter().map(|m| m * scale).collect();
            let margins = if exact {
                simulate::montgomery_smith_exact(&model, n, &xs)?
            } else {
                simulate::empirical_check_montgomery_smith(&model, n, &xs, reps, seed)?
            };
            let mut rows = vec![["x", "p_max", "p_final", "margin", "stderr"].map(String::from).to_vec()];
            for m in &margins {
                rows.push(vec![
                    m.x.to_string(),
                    m.p_max.to_string(),
                    m.p_final.to_string(),
                    m.margin.to_string(),
                    m.stderr.to_string(),
                ]);
            }
            Ok(Outcome { report: json!({ "margins": margins }), csv: Some(rows), code: 0 })
        }
        "moment" => {
            let gamma = a.model.gamma.unwrap_or(4.0);
            a.model.gamma = Some(gamma);
            let c = if exact {
                simulate::rosenthal_exact(&model, n, gamma)?
            } else {
                simulate::empirical_check_rosenthal(&model, n, gamma, reps, seed)?
            };
            let csv = scalar_rows(&[
                ("sum_moment", c.sum_moment.to_string()),
                ("sum_moment_stderr", c.sum_moment_stderr.to_string()),
                ("rhs", c.rhs.to_string()),
                ("ratio", c.ratio.to_string()),
                ("ratio_stderr", c.ratio_stderr.to_string()),
            ]);
            Ok(Outcome { report: json!({ "moment": c }), csv: Some(csv), code: 0 })
        }
        other => Err(Error::invalid(format!("unknown inequality `{other}` (expected maximal or moment)"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let code = run(std::iter::once("sa-lab").chain(args.iter().copied()), &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn bound_example() {
        let (code, out) = run_str(&[
            "bound", "--theorem", "9", "--spectrum", "poly:2", "--gamma", "4", "--psi", "11", "--n", "1000000",
            "--moment", "1",
        ]);
        assert_eq!(code, 0, "{out}");
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["result"]["bound"]["d"], 3);
        assert_eq!(v["config"]["command"], "bound");
        assert_eq!(v["config"]["seed"], 0);
    }

    #[test]
    fn rate_example() {
        let (code, out) = run_str(&["rate", "--example", "3", "--b", "3", "--gamma", "4", "--psi", "11"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["result"]["rate"]["auxiliary"]["r"], "2/27");
        assert_eq!(v["result"]["rate"]["auxiliary"]["delta"], "2/5");
    }

    #[test]
    fn invalid_input_exit_codes() {
        assert_eq!(run_str(&["bogus"]).0, 2);
        assert_eq!(run_str(&["bound", "--spectrum", "poly:0.5", "--gamma", "4", "--n", "5", "--moment", "1"]).0, 2);
        assert_eq!(run_str(&["rate", "--example", "3", "--gamma", "4"]).0, 2);
        assert_eq!(run_str(&["--help"]).0, 0);
    }

    #[test]
    fn scan_cap_is_numerical() {
        let (code, _) = run_str(&[
            "select-dim", "--spectrum", "poly:2", "--gamma", "4", "--n", "1000", "--moment", "3", "--c-gamma", "0",
        ]);
        assert_eq!(code, 3);
    }

    #[test]
    fn csv_layouts() {
        let (code, out) = run_str(&["rate", "--example", "5", "--tau", "1", "--gamma", "4", "--format", "csv"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("# config: "));
        assert!(out.contains("main,2/1,-2/1,true"));
    }
}
