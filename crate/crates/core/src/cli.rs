//! Command-line front end.
//!
//! Machine-readable results go to stdout (CSV by default, JSON with
//! `--format json`); diagnostics go to stderr. Exit status is 0 on success,
//! 1 on usage errors and 2 on data errors.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::allocation::{lp_allocate, metric, Allocation, SolverProfile};
use crate::cost_scaling::{fit_power_law_with, FitOptions};
use crate::estimation::{adaptive_from_outcomes, clopper_pearson, StoppingRule};
use crate::exec::Exec;
use crate::knapsack::{knapsack_allocate_with, KnapsackOptions};
use crate::report::{
    averaged_curve, cumulative_curve, metric_table, write_averaged_csv, write_curve_csv,
    write_metric_table_csv, write_sweep_csv, Aggregation, Axis,
};
use crate::runlog::{ingest, RunRecord};
use crate::sim::{sweep_curves_with, BudgetKind, Simulator, SweepPoint};
use crate::sim_config::{CostModelConfig, SimConfig, StrategyKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "solver-budget",
    version,
    about = "Budget allocation, estimation and simulation for retryable success-or-fail solvers",
    arg_required_else_help = true
)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Negative log failure likelihood per dollar, for one solver or per strategy of a run log.
    Metric(MetricArgs),
    /// Split a budget across solvers (LP relaxation and/or exact knapsack).
    Allocate(AllocateArgs),
    /// Clopper-Pearson interval from counts, or adaptive stopping over a 0/1 outcome sequence.
    Estimate(EstimateArgs),
    /// Fit cost = a + b * q^gamma to a `queries,cost_usd` CSV.
    FitCost(FitCostArgs),
    /// Seeded Monte Carlo sweep of a k-shot or synthetic agent strategy.
    Simulate(SimulateArgs),
    /// Cumulative solved problems versus cost or queries from a run log.
    Curves(CurvesArgs),
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Run log; prints one row per strategy instead.
    #[arg(long, conflicts_with_all = ["p", "c"])]
    pub log: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Decimal places for a single CSV value.
    #[arg(long, default_value_t = 6)]
    pub digits: usize,
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    /// Solver as `id:p:cost`; repeat for each solver.
    #[arg(long = "solver", required = true, value_parser = parse_solver)]
    pub solvers: Vec<SolverProfile>,
    #[arg(long, default_value_t = 2.0)]
    pub budget: f64,
    #[arg(long, value_enum, default_value_t = Method::Both)]
    pub method: Method,
    #[arg(long, default_value_t = 0.01)]
    pub granularity: f64,
    #[arg(long, default_value_t = KnapsackOptions::default().max_units)]
    pub max_units: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Lp,
    Knapsack,
    Both,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long, requires = "trials")]
    pub successes: Option<u64>,
    #[arg(long, requires = "successes")]
    pub trials: Option<u64>,
    /// Comma-separated 0/1 outcomes, fed to the adaptive stopping rule.
    #[arg(long, conflicts_with_all = ["successes", "outcomes_file"])]
    pub outcomes: Option<String>,
    /// File of 0/1 outcomes separated by commas or whitespace (`-` for stdin).
    #[arg(long, conflicts_with = "successes")]
    pub outcomes_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    #[arg(long, default_value_t = 0.1)]
    pub target_length: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_trials: u64,
}

#[derive(Debug, Args)]
pub struct FitCostArgs {
    /// CSV with columns `queries,cost_usd`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 6.0)]
    pub gamma_max: f64,
    /// Also report a/c1 and b/c1 for this single-call cost.
    #[arg(long)]
    pub base_cost: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML (or .json) strategy config; flags below override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub cost_sigma: Option<f64>,
    #[arg(long)]
    pub query_budget: bool,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub onset: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub parts: Option<u64>,
    /// Comma-separated ascending budgets.
    #[arg(long, value_delimiter = ',')]
    pub budgets: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Run trials on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Kshot,
    Agent,
    PartitionedAgent,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long, default_value = "cost")]
    pub axis: Axis,
    /// Comma-separated strictly ascending thresholds.
    #[arg(long, value_delimiter = ',', required = true)]
    pub thresholds: Vec<f64>,
    /// Strategy label(s); several labels produce an averaged curve.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Option<Vec<String>>,
    #[arg(long, value_enum, default_value_t = AggregateArg::Pooled)]
    pub aggregate: AggregateArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregateArg {
    Pooled,
    Mean,
}

fn parse_solver(s: &str) -> Result<SolverProfile, String> {
    let mut parts = s.rsplitn(3, ':');
    let (c, p, id) = match (parts.next(), parts.next(), parts.next()) {
        (Some(c), Some(p), Some(id)) => (c, p, id),
        _ => return Err(format!("expected `id:p:cost`, got `{s}`")),
    };
    let p: f64 = p.parse().map_err(|_| format!("bad probability in `{s}`"))?;
    let c: f64 = c.parse().map_err(|_| format!("bad cost in `{s}`"))?;
    SolverProfile::new(id, p, c).map_err(|e| e.to_string())
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "usage error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_DATA
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Metric(a) => cmd_metric(a, cli.format, out),
        Command::Allocate(a) => cmd_allocate(a, cli.format, out),
        Command::Estimate(a) => cmd_estimate(a, cli.format, out),
        Command::FitCost(a) => cmd_fit_cost(a, cli.format, out),
        Command::Simulate(a) => cmd_simulate(a, cli.format, out),
        Command::Curves(a) => cmd_curves(a, cli.format, out),
    }
}

fn write_json<T: Serialize + ?Sized>(value: &T, out: &mut dyn Write) -> CliResult {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn open(path: &Path) -> Result<Box<dyn Read>, CliError> {
    if path == Path::new("-") {
        return Ok(Box::new(std::io::stdin()));
    }
    File::open(path)
        .map(|f| Box::new(BufReader::new(f)) as Box<dyn Read>)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

/// Loads and validates a run log.
pub fn load_log(path: &Path) -> crate::Result<Vec<RunRecord>, String> {
    let reader = open(path).map_err(|e| match e {
        CliError::Usage(m) | CliError::Data(m) => m,
    })?;
    ingest(reader).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_metric(a: &MetricArgs, format: Format, out: &mut dyn Write) -> CliResult {
    if let Some(log) = &a.log {
        let records = load_log(log).map_err(CliError::Data)?;
        let rows = metric_table(&records, a.confidence)?;
        return match format {
            Format::Json => write_json(&rows, out),
            Format::Csv => Ok(write_metric_table_csv(&rows, out)?),
        };
    }
    let (Some(p), Some(c)) = (a.p, a.c) else {
        return Err(CliError::Usage("metric needs --p and --c, or --log".into()));
    };
    let m = metric(p, c)?;
    match format {
        Format::Json => write_json(&serde_json::json!({ "p": p, "c": c, "metric": m }), out),
        Format::Csv => Ok(writeln!(out, "{m:.*}", a.digits)?),
    }
}

fn cmd_allocate(a: &AllocateArgs, format: Format, out: &mut dyn Write) -> CliResult {
    let opts = KnapsackOptions {
        granularity: a.granularity,
        max_units: a.max_units,
    };
    let mut allocs: Vec<Allocation> = Vec::new();
    if matches!(a.method, Method::Lp | Method::Both) {
        allocs.push(lp_allocate(&a.solvers, a.budget)?);
    }
    if matches!(a.method, Method::Knapsack | Method::Both) {
        allocs.push(knapsack_allocate_with(&a.solvers, a.budget, &opts)?);
    }
    match format {
        Format::Json if allocs.len() == 1 => write_json(&allocs[0], out),
        Format::Json => write_json(&allocs, out),
        Format::Csv => {
            writeln!(out, "method,solver,count,total_cost,objective,success_prob")?;
            for alloc in &allocs {
                let method = serde_json::to_value(alloc.method)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                for (id, count) in &alloc.counts {
                    writeln!(
                        out,
                        "{method},{id},{count},{},{},{}",
                        alloc.total_cost, alloc.objective, alloc.success_prob
                    )?;
                }
            }
            Ok(())
        }
    }
}

fn parse_outcomes(text: &str) -> Result<Vec<bool>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "1" => Ok(true),
            "0" => Ok(false),
            other => Err(CliError::Data(format!("outcome `{other}` is not 0 or 1"))),
        })
        .collect()
}

fn cmd_estimate(a: &EstimateArgs, format: Format, out: &mut dyn Write) -> CliResult {
    #[derive(Serialize)]
    struct Row {
        s: u64,
        n: u64,
        confidence: f64,
        lower: f64,
        upper: f64,
        point: Option<f64>,
        met_target: Option<bool>,
    }
    let row = if let (Some(s), Some(n)) = (a.successes, a.trials) {
        let e = clopper_pearson(s, n, a.confidence)?;
        Row {
            s,
            n,
            confidence: e.confidence,
            lower: e.lower,
            upper: e.upper,
            point: e.point,
            met_target: None,
        }
    } else {
        let text = match (&a.outcomes, &a.outcomes_file) {
            (Some(inline), _) => inline.clone(),
            (None, Some(path)) => {
                let mut buf = String::new();
                open(path)?.read_to_string(&mut buf)?;
                buf
            }
            (None, None) => {
                return Err(CliError::Usage(
                    "estimate needs --successes/--trials, --outcomes or --outcomes-file".into(),
                ))
            }
        };
        let outcomes = parse_outcomes(&text)?;
        let rule = StoppingRule::new(a.target_length, a.confidence, a.max_trials)?;
        let e = adaptive_from_outcomes(outcomes, &rule)?;
        Row {
            s: e.estimate.successes,
            n: e.estimate.trials,
            confidence: e.estimate.confidence,
            lower: e.estimate.lower,
            upper: e.estimate.upper,
            point: e.estimate.point,
            met_target: Some(e.met_target),
        }
    };
    match format {
        Format::Json => write_json(&row, out),
        Format::Csv => {
            writeln!(out, "s,n,confidence,lower,upper,point,met_target")?;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.s,
                row.n,
                row.confidence,
                row.lower,
                row.upper,
                row.point.map(|p| p.to_string()).unwrap_or_default(),
                row.met_target.map(|m| m.to_string()).unwrap_or_default()
            )?;
            Ok(())
        }
    }
}

fn cmd_fit_cost(a: &FitCostArgs, format: Format, out: &mut dyn Write) -> CliResult {
    #[derive(serde::Deserialize)]
    struct Obs {
        queries: u64,
        cost_usd: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(&a.input)?);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(e.to_string()))?
        .clone();
    if !(headers.iter().any(|h| h == "queries") && headers.iter().any(|h| h == "cost_usd")) {
        return Err(CliError::Data(format!(
            "{}: expected columns `queries,cost_usd`",
            a.input.display()
        )));
    }
    let mut points = Vec::new();
    for (i, row) in reader.deserialize::<Obs>().enumerate() {
        let obs =
            row.map_err(|e| CliError::Data(format!("{} row {}: {e}", a.input.display(), i + 1)))?;
        points.push((obs.queries, obs.cost_usd));
    }
    let model = fit_power_law_with(
        &points,
        &FitOptions {
            gamma_max: a.gamma_max,
            ..FitOptions::default()
        },
    )?;
    let normalized = a.base_cost.map(|c| model.normalize(c)).transpose()?;
    match format {
        Format::Json => {
            let mut v = serde_json::to_value(model).map_err(|e| CliError::Data(e.to_string()))?;
            if let Some((ap, bp)) = normalized {
                v["a_prime"] = ap.into();
                v["b_prime"] = bp.into();
            }
            write_json(&v, out)
        }
        Format::Csv => {
            match normalized {
                Some((ap, bp)) => {
                    writeln!(out, "a,b,gamma,rss,n_points,a_prime,b_prime")?;
                    writeln!(
                        out,
                        "{},{},{},{},{},{ap},{bp}",
                        model.a, model.b, model.gamma, model.rss, model.n_points
                    )?;
                }
                None => {
                    writeln!(out, "a,b,gamma,rss,n_points")?;
                    writeln!(
                        out,
                        "{},{},{},{},{}",
                        model.a, model.b, model.gamma, model.rss, model.n_points
                    )?;
                }
            }
            Ok(())
        }
    }
}

fn simulate_config(a: &SimulateArgs) -> Result<SimConfig, CliError> {
    let mut cfg = match &a.config {
        Some(path) => SimConfig::load(path)?,
        None => {
            let Some(kind) = a.kind else {
                return Err(CliError::Usage("simulate needs --config or --kind".into()));
            };
            SimConfig {
                kind: match kind {
                    KindArg::Kshot => StrategyKind::Kshot,
                    KindArg::Agent => StrategyKind::Agent,
                    KindArg::PartitionedAgent => StrategyKind::PartitionedAgent,
                },
                p: None,
                c: None,
                cost_sigma: None,
                budget_kind: BudgetKind::Monetary,
                lambda: None,
                onset: None,
                cost_model: None,
                parts: None,
                budgets: None,
                trials: None,
                seed: None,
                confidence: None,
            }
        }
    };
    if let Some(kind) = a.kind {
        cfg.kind = match kind {
            KindArg::Kshot => StrategyKind::Kshot,
            KindArg::Agent => StrategyKind::Agent,
            KindArg::PartitionedAgent => StrategyKind::PartitionedAgent,
        };
    }
    macro_rules! overlay {
        ($($field:ident),*) => { $( if a.$field.is_some() { cfg.$field = a.$field.clone(); } )* };
    }
    overlay!(p, c, cost_sigma, lambda, onset, parts, budgets, trials, seed, confidence);
    if a.query_budget {
        cfg.budget_kind = BudgetKind::QueryCount;
    }
    if a.a.is_some() || a.b.is_some() || a.gamma.is_some() {
        let base = cfg.cost_model;
        let pick = |flag: Option<f64>, from: Option<f64>, name: &str| {
            flag.or(from)
                .ok_or_else(|| CliError::Usage(format!("cost model needs --{name}")))
        };
        cfg.cost_model = Some(CostModelConfig {
            a: pick(a.a, base.map(|m| m.a), "a")?,
            b: pick(a.b, base.map(|m| m.b), "b")?,
            gamma: pick(a.gamma, base.map(|m| m.gamma), "gamma")?,
        });
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    source: String,
    synthetic: bool,
    axis: Axis,
    seed: u64,
    trials: u64,
    confidence: f64,
    points: &'a [SweepPoint],
}

fn cmd_simulate(a: &SimulateArgs, format: Format, out: &mut dyn Write) -> CliResult {
    let cfg = simulate_config(a)?;
    let spec = cfg.strategy()?;
    let exec = if a.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    let budgets = cfg.budgets();
    let points = sweep_curves_with(
        &Simulator::new(exec),
        &spec,
        &budgets,
        cfg.trials(),
        cfg.seed(),
        cfg.confidence(),
    )?;
    let axis = match spec.budget_axis() {
        BudgetKind::Monetary => Axis::Cost,
        BudgetKind::QueryCount => Axis::Queries,
    };
    let source = spec.source_label();
    match format {
        Format::Json => write_json(
            &SweepOutput {
                source,
                synthetic: true,
                axis,
                seed: cfg.seed(),
                trials: cfg.trials(),
                confidence: cfg.confidence(),
                points: &points,
            },
            out,
        ),
        Format::Csv => Ok(write_sweep_csv(&source, axis, &points, out)?),
    }
}

fn cmd_curves(a: &CurvesArgs, format: Format, out: &mut dyn Write) -> CliResult {
    let records = load_log(&a.log).map_err(CliError::Data)?;
    let strategies = match &a.strategy {
        Some(list) => list.clone(),
        None => {
            let mut labels: Vec<String> = Vec::new();
            for r in &records {
                if !labels.contains(&r.strategy) {
                    labels.push(r.strategy.clone());
                }
            }
            if labels.is_empty() {
                return Err(CliError::Data(format!(
                    "{}: log has no records",
                    a.log.display()
                )));
            }
            labels
        }
    };
    if let [single] = strategies.as_slice() {
        let curve = cumulative_curve(&records, single, a.axis, &a.thresholds)?;
        return match format {
            Format::Json => write_json(&curve, out),
            Format::Csv => Ok(write_curve_csv(&curve, out)?),
        };
    }
    let aggregation = match a.aggregate {
        AggregateArg::Pooled => Aggregation::Pooled,
        AggregateArg::Mean => Aggregation::MeanPerGroup,
    };
    let curve = averaged_curve(&records, &strategies, a.axis, &a.thresholds, aggregation)?;
    match format {
        Format::Json => write_json(&curve, out),
        Format::Csv => Ok(write_averaged_csv(&curve, out)?),
    }
}
