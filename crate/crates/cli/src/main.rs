//! `ttr`: score training-algorithm submissions from trial logs and run the analysis tools.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ttr_arbiter::analysis::{estimate_costs, phi_metric, simulate_tuning, transfer_ranks};
use ttr_arbiter::domain::{Clock, MetricDirection, ScoreMatrix, TrialRecord};
use ttr_arbiter::io::{
    parse_log_dir, read_labelled_table, read_time_matrix, read_validation_table, write_leaderboard_csv,
    write_profile_csv, write_score_report, write_trial_log, ReportFormat,
};
use ttr_arbiter::pipeline::score_logs;
use ttr_arbiter::rulesets::ScoringOptions;
use ttr_arbiter::scoring::score_matrix;
use ttr_arbiter::searchspace::{build_optlist, SearchSpace};
use ttr_arbiter::simulate::{log_bowl_family, run_mock_competition, MockSettings, MockSubmission};
use ttr_arbiter::targets::{rerun_outcome, select_best_config_within, set_targets, target_setting_budget};
use ttr_arbiter::{BenchmarkConfig, Execution, Integration, RulesetConfig, ScoreReport};

#[derive(Parser, Debug)]
#[command(name = "ttr", version, about = "Time-to-result benchmark arbitration")]
struct Cli {
    /// Benchmark config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Trial-log file or directory of *.jsonl files.
    #[arg(long, global = true)]
    logs: Option<PathBuf>,
    /// Output directory; results go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Profile upper limit and held-out gate factor [default: 4, or the config's value].
    #[arg(long, global = true)]
    r_max: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Leaderboard from trial logs or a time matrix.
    Score(ScoreArgs),
    /// Performance profiles as (tau, rho) step points.
    Profile(ScoreArgs),
    /// Validation and test targets from rerun logs.
    Targets(TargetArgs),
    /// Bootstrap best-of-T tuning from a pool of validation values.
    SimulateTuning(TuningArgs),
    /// Worst-case degradation from sharing one point across workloads.
    Phi(TableArgs),
    /// Greedy round-robin OptList from per-workload rankings.
    Optlist(OptlistArgs),
    /// Points drawn from a submission's search space in the config.
    Sample(SampleArgs),
    /// Compute needed to run the benchmark, in hours.
    Cost(CostArgs),
    /// Transfer ranks between a workload and its variants.
    TransferRanks(TransferArgs),
    /// Synthetic trial logs for every search space in the config.
    #[command(hide = true)]
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RulesetKind {
    External,
    #[value(name = "self")]
    SelfTuning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct RulesetArgs {
    #[arg(long, value_enum)]
    ruleset: Option<RulesetKind>,
    #[arg(long)]
    studies: Option<usize>,
    /// Trials per study (external tuning).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    budget_multiplier: Option<f64>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[command(flatten)]
    ruleset: RulesetArgs,
    /// Precomputed time matrix CSV instead of logs.
    #[arg(long, conflicts_with = "logs")]
    times: Option<PathBuf>,
    #[arg(long, default_value = "runtime")]
    clock: Clock,
    /// Trapezoid integration on this many points instead of exact integration.
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct TargetArgs {
    /// Rerun logs of the selected configuration; the trial index is the seed index.
    #[arg(long)]
    reruns: PathBuf,
    #[arg(long, default_value = "runtime")]
    clock: Clock,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// CSV with point rows and workload columns; an optional `direction` row comes first.
    #[arg(long)]
    table: PathBuf,
    /// Direction for columns without a `direction` row.
    #[arg(long, default_value = "min")]
    direction: MetricDirection,
}

#[derive(Args, Debug)]
struct TuningArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Tuning budget T.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 1000)]
    sims: usize,
}

#[derive(Args, Debug)]
struct OptlistArgs {
    /// CSV with one column per workload listing point ids best first.
    #[arg(long)]
    rankings: PathBuf,
    #[arg(long, default_value_t = 20)]
    budget: usize,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Search-space key in the config.
    #[arg(long)]
    submission: String,
    #[arg(long, default_value_t = 20)]
    count: usize,
}

#[derive(Args, Debug)]
struct CostArgs {
    #[command(flatten)]
    ruleset: RulesetArgs,
    /// Comma-separated workload ids.
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<String>>,
    #[arg(long)]
    include_heldout: bool,
}

#[derive(Args, Debug)]
struct TransferArgs {
    #[command(flatten)]
    table: TableArgs,
    /// Column of the base workload.
    #[arg(long)]
    base: String,
    /// Variant columns; every other column when omitted.
    #[arg(long, value_delimiter = ',')]
    variant: Option<Vec<String>>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    ruleset: RulesetArgs,
    /// Parameter whose distance to `optimum` drives curve quality.
    #[arg(long, default_value = "lr")]
    param: String,
    #[arg(long, default_value_t = 1e-3)]
    optimum: f64,
    #[arg(long, default_value_t = 0.002)]
    noise: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("Usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(error_kind(&e), &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(err) = e.downcast_ref::<ttr_arbiter::Error>() {
        err.kind()
    } else if e.downcast_ref::<io::Error>().is_some() {
        "IoFailure"
    } else {
        "InvalidArgument"
    }
}

fn report_error(kind: &str, message: &str) {
    let record = serde_json::json!({ "error": { "kind": kind, "message": message.trim_end() } });
    eprintln!("{record}");
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Score(args) => score(cli, args),
        Command::Profile(args) => profile(cli, args),
        Command::Targets(args) => targets(cli, args),
        Command::SimulateTuning(args) => tuning(cli, args),
        Command::Phi(args) => phi(cli, args),
        Command::Optlist(args) => optlist(cli, args),
        Command::Sample(args) => sample(cli, args),
        Command::Cost(args) => cost(cli, args),
        Command::TransferRanks(args) => transfer(cli, args),
        Command::Simulate(args) => simulate(cli, args),
    }
}

fn load_config(cli: &Cli) -> Result<BenchmarkConfig> {
    let path = cli.config.as_ref().ok_or_else(|| anyhow!("--config is required"))?;
    Ok(BenchmarkConfig::load(path)?)
}

fn require_logs(cli: &Cli) -> Result<&Path> {
    cli.logs.as_deref().ok_or_else(|| anyhow!("--logs is required"))
}

fn r_max(cli: &Cli, config: Option<&BenchmarkConfig>) -> f64 {
    cli.r_max.or(config.map(|c| c.r_max)).unwrap_or(4.0)
}

fn ruleset(base: RulesetConfig, args: &RulesetArgs) -> Result<RulesetConfig> {
    let kind = args.ruleset.unwrap_or(match base {
        RulesetConfig::External { .. } => RulesetKind::External,
        RulesetConfig::SelfTuning { .. } => RulesetKind::SelfTuning,
    });
    let studies = args.studies.unwrap_or(base.studies());
    let out = match kind {
        RulesetKind::External => {
            if args.budget_multiplier.is_some() {
                bail!("--budget-multiplier applies to the self-tuning ruleset");
            }
            let trials_per_study = match (args.trials, base) {
                (Some(t), _) => t,
                (None, RulesetConfig::External { trials_per_study, .. }) => trials_per_study,
                (None, RulesetConfig::SelfTuning { .. }) => RulesetConfig::default().trials_per_study(),
            };
            RulesetConfig::External {
                studies,
                trials_per_study,
            }
        }
        RulesetKind::SelfTuning => {
            if args.trials.is_some() {
                bail!("--trials applies to the external ruleset");
            }
            let budget_multiplier = match (args.budget_multiplier, base) {
                (Some(m), _) => m,
                (None, RulesetConfig::SelfTuning { budget_multiplier, .. }) => budget_multiplier,
                (None, RulesetConfig::External { .. }) => RulesetConfig::self_tuning().budget_multiplier(),
            };
            RulesetConfig::SelfTuning {
                studies,
                budget_multiplier,
            }
        }
    };
    out.validate()?;
    Ok(out)
}

fn emit(cli: &Cli, file: &str, bytes: &[u8]) -> Result<()> {
    match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(file);
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| anyhow!("{}", e.error()))
}

fn build_report(cli: &Cli, args: &ScoreArgs) -> Result<ScoreReport> {
    let integration = match args.grid_points {
        Some(points) => Integration::Trapezoid { points },
        None => Integration::Exact,
    };
    let exec = Execution::default();
    if let Some(path) = &args.times {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let matrix: ScoreMatrix = read_time_matrix(file)?;
        let config = cli.config.as_ref().map(|_| load_config(cli)).transpose()?;
        return Ok(score_matrix(&matrix, r_max(cli, config.as_ref()), integration, exec)?);
    }
    let mut config = load_config(cli)?;
    config.r_max = r_max(cli, Some(&config));
    let trials = parse_log_dir(require_logs(cli)?, exec)?;
    let options = ScoringOptions {
        ruleset: ruleset(config.ruleset, &args.ruleset)?,
        clock: args.clock,
        budget_multiplier: None,
    };
    Ok(score_logs(&config, &trials, &options, integration, exec)?.report)
}

fn score(cli: &Cli, args: &ScoreArgs) -> Result<()> {
    let report = build_report(cli, args)?;
    let format = match args.format {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
    };
    match &cli.out {
        Some(dir) => {
            let files = write_score_report(&report, dir, format)?;
            for f in files {
                println!("{}", f.display());
            }
        }
        None => match format {
            ReportFormat::Csv => write_leaderboard_csv(&report, io::stdout().lock())?,
            ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        },
    }
    Ok(())
}

fn profile(cli: &Cli, args: &ScoreArgs) -> Result<()> {
    let report = build_report(cli, args)?;
    if cli.out.is_some() {
        for p in &report.profiles {
            let mut buf = Vec::new();
            write_profile_csv(p, report.r_max, &mut buf)?;
            emit(cli, &format!("{}.csv", p.submission_id), &buf)?;
        }
        return Ok(());
    }
    let mut rows = Vec::new();
    for p in &report.profiles {
        let mut buf = Vec::new();
        write_profile_csv(p, report.r_max, &mut buf)?;
        let text = String::from_utf8(buf)?;
        for line in text.lines().skip(1) {
            let (tau, rho) = line.split_once(',').unwrap_or((line, ""));
            rows.push(vec![p.submission_id.clone(), tau.to_owned(), rho.to_owned()]);
        }
    }
    emit(cli, "profiles.csv", &csv_bytes(&["submission", "tau", "rho"], rows)?)
}

fn group_by_workload(trials: Vec<TrialRecord>) -> BTreeMap<String, Vec<TrialRecord>> {
    let mut out: BTreeMap<String, Vec<TrialRecord>> = BTreeMap::new();
    for t in trials {
        out.entry(t.key.workload.clone()).or_default().push(t);
    }
    out
}

fn targets(cli: &Cli, args: &TargetArgs) -> Result<()> {
    let config = load_config(cli)?;
    let exec = Execution::default();
    let search = match &cli.logs {
        Some(dir) => group_by_workload(parse_log_dir(dir, exec)?),
        None => BTreeMap::new(),
    };
    let reruns = group_by_workload(parse_log_dir(&args.reruns, exec)?);
    let mut rows = Vec::new();
    for (workload, runs) in &reruns {
        let spec = config
            .workload(workload)
            .ok_or_else(|| ttr_arbiter::Error::UnknownWorkload(workload.clone()))?;
        let budget = match args.clock {
            Clock::Runtime => target_setting_budget(spec.max_runtime)?,
            Clock::Steps => {
                let steps = spec.max_steps.ok_or_else(|| anyhow!("workload `{workload}` has no max_steps"))?;
                target_setting_budget(steps as f64)?
            }
        };
        let budget = ttr_arbiter::ExtendedTime::Finite(budget);
        let selected = match search.get(workload) {
            Some(trials) => {
                let (key, _) = select_best_config_within(trials, spec.direction, args.clock, budget)?;
                format!("{}/{}/{}", key.submission, key.study, key.trial)
            }
            None => String::new(),
        };
        let outcomes: Vec<_> = runs
            .iter()
            .filter_map(|t| rerun_outcome(t, t.key.trial, spec.direction, args.clock, budget))
            .collect();
        let pair = set_targets(&outcomes, spec.direction)?;
        rows.push(vec![
            workload.clone(),
            pair.validation_target.to_string(),
            pair.test_target.to_string(),
            outcomes.len().to_string(),
            selected,
        ]);
    }
    let header = ["workload", "validation_target", "test_target", "reruns", "selected"];
    emit(cli, "targets.csv", &csv_bytes(&header, rows)?)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn tuning(cli: &Cli, args: &TuningArgs) -> Result<()> {
    let table = read_validation_table(open(&args.table.table)?, args.table.direction)?;
    let mut rows = Vec::new();
    for (w, id) in table.workloads().iter().enumerate() {
        let pool: Vec<f64> = (0..table.points().len()).filter_map(|p| table.get(p, w)).collect();
        let s = simulate_tuning(
            &pool,
            args.trials,
            args.sims,
            cli.seed,
            table.directions()[w],
            Execution::default(),
        )
        .with_context(|| format!("workload `{id}`"))?;
        rows.push(vec![id.clone(), s.median.to_string(), s.q1.to_string(), s.q3.to_string()]);
    }
    emit(cli, "tuning.csv", &csv_bytes(&["workload", "median", "q1", "q3"], rows)?)
}

fn phi(cli: &Cli, args: &TableArgs) -> Result<()> {
    let table = read_validation_table(open(&args.table)?, args.direction)?;
    let result = phi_metric(&table)?;
    let mut rows: Vec<Vec<String>> = table
        .workloads()
        .iter()
        .zip(&result.per_workload)
        .map(|(w, v)| vec![w.clone(), result.best_point.clone(), v.to_string()])
        .collect();
    rows.push(vec!["overall".into(), result.best_point.clone(), result.phi.to_string()]);
    emit(cli, "phi.csv", &csv_bytes(&["scope", "point", "phi"], rows)?)
}

fn optlist(cli: &Cli, args: &OptlistArgs) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(&args.rankings)?);
    let n = reader.headers()?.len();
    let mut rankings: Vec<Vec<String>> = vec![Vec::new(); n];
    for rec in reader.records() {
        for (w, cell) in rec?.iter().enumerate() {
            if !cell.is_empty() {
                rankings[w].push(cell.to_owned());
            }
        }
    }
    let list = build_optlist(&rankings, args.budget)?;
    let rows = list.into_iter().enumerate().map(|(i, p)| vec![i.to_string(), p]);
    emit(cli, "optlist.csv", &csv_bytes(&["index", "point"], rows)?)
}

fn sample(cli: &Cli, args: &SampleArgs) -> Result<()> {
    let config = load_config(cli)?;
    let space: &SearchSpace = config
        .search_spaces
        .get(&args.submission)
        .ok_or_else(|| anyhow!("no search space named `{}` in the config", args.submission))?;
    let mut out = Vec::new();
    for point in space.sample(args.count, cli.seed)? {
        serde_json::to_writer(&mut out, &point)?;
        out.push(b'\n');
    }
    emit(cli, &format!("{}_points.jsonl", args.submission), &out)
}

fn cost(cli: &Cli, args: &CostArgs) -> Result<()> {
    let config = load_config(cli)?;
    let rules = ruleset(config.ruleset, &args.ruleset)?;
    let budgets: Vec<(String, f64)> = config.fixed_workloads().map(|w| (w.id.clone(), w.max_runtime)).collect();
    let c = estimate_costs(&budgets, &rules, args.include_heldout, args.subset.as_deref())?;
    let mut rows = vec![
        vec!["one_hyperparameter".to_string(), format!("{:.2}", c.one_hyperparameter)],
        vec!["scoring".to_string(), format!("{:.2}", c.scoring)],
    ];
    if let Some(t) = c.tuning {
        rows.push(vec!["tuning".to_string(), format!("{t:.2}")]);
    }
    emit(cli, "cost.csv", &csv_bytes(&["quantity", "hours"], rows)?)
}

fn transfer(cli: &Cli, args: &TransferArgs) -> Result<()> {
    let table = read_labelled_table(open(&args.table.table)?)?;
    let dirs = table.directions.clone().unwrap_or_else(|| vec![args.table.direction; table.columns.len()]);
    let column = |name: &str| -> Result<BTreeMap<String, f64>> {
        let c = table
            .columns
            .iter()
            .position(|x| x == name)
            .ok_or_else(|| anyhow!("no column `{name}`"))?;
        Ok(table
            .rows
            .iter()
            .filter_map(|(id, cells)| cells[c].map(|v| (id.clone(), v)))
            .collect())
    };
    let base_idx = table
        .columns
        .iter()
        .position(|x| *x == args.base)
        .ok_or_else(|| anyhow!("no column `{}`", args.base))?;
    let variants: Vec<String> = match &args.variant {
        Some(v) => v.clone(),
        None => table.columns.iter().filter(|c| **c != args.base).cloned().collect(),
    };
    let base = column(&args.base)?;
    let mut rows = Vec::new();
    for v in variants {
        let r = transfer_ranks(&base, &column(&v)?, dirs[base_idx])?;
        rows.push(vec![
            args.base.clone(),
            v,
            r.base_to_variant.to_string(),
            r.variant_to_base.to_string(),
            r.min.to_string(),
        ]);
    }
    let header = ["base", "variant", "base_to_variant", "variant_to_base", "min"];
    emit(cli, "transfer_ranks.csv", &csv_bytes(&header, rows)?)
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let mut config = load_config(cli)?;
    config.ruleset = ruleset(config.ruleset, &args.ruleset)?;
    if config.search_spaces.is_empty() {
        bail!("the config declares no search spaces");
    }
    let subs: Vec<MockSubmission> = config
        .search_spaces
        .iter()
        .enumerate()
        .map(|(i, (id, space))| MockSubmission {
            id: id.clone(),
            space: space.clone(),
            family: log_bowl_family(&args.param, args.optimum, 0.05, 1.0, args.noise),
            time_scale: 1.0 + 0.1 * i as f64,
        })
        .collect();
    let settings = MockSettings::for_config(&config);
    let outcome = run_mock_competition(&config, &subs, cli.seed, &settings)?;
    for sub in &subs {
        let trials: Vec<TrialRecord> = outcome
            .trials
            .iter()
            .filter(|t| t.key.submission == sub.id)
            .cloned()
            .collect();
        let mut buf = Vec::new();
        write_trial_log(&trials, &mut buf)?;
        emit(cli, &format!("{}.jsonl", sub.id), &buf)?;
    }
    Ok(())
}
