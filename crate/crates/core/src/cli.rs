//! Command-line front end: `run`, `experiment` and `replay-check`.

use crate::domain::{GainedUtility, RiskMix, SimConfig};
use crate::engine::{run_with_options, RunResult};
use crate::error::Error;
use crate::metrics::{self, DurationStats, HonestyBin, StepFrame};
use crate::trace::{parse_trace, replay_check};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const OUT_ENV: &str = "HEDONICA_OUT";
pub const DEFAULT_OUT: &str = "out";
pub const STEPS_HEADER: &str =
    "run,step,alone,solicited,initiator,coalitions_active,formed_this_step,mean_coalition_size";
pub const HONESTY_HEADER: &str = "bin_center,mean_gained_utility,agent_count";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hedonica", version, about = "Seeded hedonic coalition formation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run `n_runs` seeded simulations of one configuration.
    Run(RunArgs),
    /// Run the all-seeking, all-averse, all-neutral and mixed populations.
    Experiment(RunArgs),
    /// Re-derive balances, membership and trust from an event trace.
    ReplayCheck(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON file with configuration fields; missing fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed; run i uses seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (falls back to $HEDONICA_OUT, then `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Field overrides such as `n_agents=30` or `risk_mix="all-neutral"`.
    #[arg(long, num_args = 1..)]
    pub overrides: Vec<String>,
    /// Write an event trace per run under traces/.
    #[arg(long)]
    pub trace: bool,
    /// Write each run's final trust matrix under trust/.
    #[arg(long)]
    pub trust_csv: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Trace file written by `run --trace`.
    pub trace_file: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(String),
    Divergence(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Runtime(_) => EXIT_RUNTIME,
            Failure::Divergence(_) => EXIT_DIVERGENCE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Runtime(m) | Failure::Divergence(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::UnknownConfigKey(_) | Error::MalformedOverride(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::ReplayCheck(a) => cmd_replay_check(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}

/// File config, then overrides, then `--seed`.
pub fn load_config(args: &RunArgs) -> Result<SimConfig, Error> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            SimConfig::from_json(&text)?
        }
        None => SimConfig::default(),
    };
    for spec in &args.overrides {
        config.apply_override(spec)?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validated()
}

fn resolve_config(args: &RunArgs) -> Result<SimConfig, Failure> {
    load_config(args).map_err(|e| match e {
        Error::Io(_) | Error::Json(_) => Failure::Config(format!("cannot load configuration: {e}")),
        other => other.into(),
    })
}

pub fn out_dir(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    }
}

/// Runs `config.n_runs` simulations in parallel; results come back in run order.
pub fn run_batch(config: &SimConfig, record_trace: bool) -> crate::Result<Vec<RunResult>> {
    (0..config.n_runs)
        .into_par_iter()
        .map(|i| {
            let run_config = SimConfig {
                seed: config.seed.wrapping_add(i as u64),
                ..config.clone()
            };
            run_with_options(&run_config, record_trace)
        })
        .collect()
}

pub fn steps_csv(runs: &[RunResult]) -> String {
    let mut out = String::from(STEPS_HEADER);
    out.push('\n');
    for (run, result) in runs.iter().enumerate() {
        for f in &result.frames {
            writeln!(
                out,
                "{run},{},{},{},{},{},{},{:.6}",
                f.step,
                f.alone,
                f.solicited,
                f.initiator,
                f.coalitions_active,
                f.formed_this_step,
                f.mean_coalition_size
            )
            .expect("writing to a String");
        }
    }
    out
}

/// Empty bins leave the mean column blank.
pub fn honesty_csv(bins: &[HonestyBin]) -> String {
    let mut out = String::from(HONESTY_HEADER);
    out.push('\n');
    for b in bins {
        let mean = b.mean_gained_utility.map(|m| format!("{m:.6}")).unwrap_or_default();
        writeln!(out, "{:.6},{mean},{}", b.bin_center, b.agent_count).expect("writing to a String");
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct RoleMeans {
    pub alone: f64,
    pub solicited: f64,
    pub initiator: f64,
    pub coalitions_active: f64,
}

pub fn role_means(runs: &[RunResult]) -> RoleMeans {
    RoleMeans {
        alone: metrics::overall_mean(runs, |f: &StepFrame| f.alone as f64),
        solicited: metrics::overall_mean(runs, |f| f.solicited as f64),
        initiator: metrics::overall_mean(runs, |f| f.initiator as f64),
        coalitions_active: metrics::overall_mean(runs, |f| f.coalitions_active as f64),
    }
}

/// Figures that summarise one batch of runs.
#[derive(Clone, Debug, Serialize)]
pub struct BatchSummary {
    pub durations: DurationStats,
    pub roles: RoleMeans,
    pub honesty_ledger_total: Vec<HonestyBin>,
    pub honesty_accrual_only: Vec<HonestyBin>,
    pub peak_bin_ledger_total: Option<f64>,
    pub peak_bin_accrual_only: Option<f64>,
}

pub fn summarize(config: &SimConfig, runs: &[RunResult]) -> BatchSummary {
    let ledger = metrics::honesty_utility_profile(runs, config.honesty_max, GainedUtility::LedgerTotal);
    let accrual = metrics::honesty_utility_profile(runs, config.honesty_max, GainedUtility::AccrualOnly);
    BatchSummary {
        durations: metrics::run_duration_stats(runs),
        roles: role_means(runs),
        peak_bin_ledger_total: metrics::peak_bin(&ledger).map(|b| b.bin_center),
        peak_bin_accrual_only: metrics::peak_bin(&accrual).map(|b| b.bin_center),
        honesty_ledger_total: ledger,
        honesty_accrual_only: accrual,
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| io_failure(path, e))
}

/// Runs one configuration and writes its output set into `dir`.
fn run_into(config: &SimConfig, args: &RunArgs, dir: &Path) -> Result<BatchSummary, Failure> {
    create_dir(dir)?;
    let runs = run_batch(config, args.trace)?;
    let summary = summarize(config, &runs);
    write(&dir.join("steps.csv"), &steps_csv(&runs))?;
    let bins = match config.gained_utility {
        GainedUtility::LedgerTotal => &summary.honesty_ledger_total,
        GainedUtility::AccrualOnly => &summary.honesty_accrual_only,
    };
    write(&dir.join("honesty.csv"), &honesty_csv(bins))?;
    let seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
    let doc = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "seeds": seeds,
        "durations": summary.durations,
        "duration_note": "coalitions alive at the end are counted up to the final step (right-censored)",
        "roles": summary.roles,
        "peak_bin_ledger_total": summary.peak_bin_ledger_total,
        "peak_bin_accrual_only": summary.peak_bin_accrual_only,
        "audit": runs.iter().map(|r| &r.audit).collect::<Vec<_>>(),
    });
    write(&dir.join("summary.json"), &(pretty(&doc)? + "\n"))?;
    if args.trace {
        let traces = dir.join("traces");
        create_dir(&traces)?;
        for (i, r) in runs.iter().enumerate() {
            if let Some(t) = &r.trace {
                write(&traces.join(format!("run_{i:03}.trace")), &t.render())?;
            }
        }
    }
    if args.trust_csv {
        let trust = dir.join("trust");
        create_dir(&trust)?;
        for (i, r) in runs.iter().enumerate() {
            write(&trust.join(format!("run_{i:03}.csv")), &r.final_trust.to_csv())?;
        }
    }
    Ok(summary)
}

fn pretty(v: &serde_json::Value) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let config = resolve_config(args)?;
    let dir = out_dir(args.out.as_deref());
    let s = run_into(&config, args, &dir)?;
    println!(
        "{} runs x {} steps -> {} (mean duration {})",
        config.n_runs,
        config.n_steps,
        dir.display(),
        s.durations.mean.map_or("n/a".to_string(), |m| format!("{m:.2}"))
    );
    Ok(())
}

/// The four populations of the canned experiment.
pub const POPULATIONS: [(&str, RiskMix); 4] = [
    ("seeking", RiskMix::AllSeeking),
    ("averse", RiskMix::AllAverse),
    ("neutral", RiskMix::AllNeutral),
    ("mixed", RiskMix::EqualThirds),
];

fn cmd_experiment(args: &RunArgs) -> Result<(), Failure> {
    let base = resolve_config(args)?;
    let dir = out_dir(args.out.as_deref());
    let mut summaries = serde_json::Map::new();
    let mut by_name = Vec::new();
    for (name, mix) in POPULATIONS {
        let config = SimConfig {
            risk_mix: mix,
            ..base.clone()
        };
        let s = run_into(&config, args, &dir.join(name))?;
        println!(
            "{name:>8}: mean duration {}, alone {:.2}, initiators {:.2}",
            s.durations.mean.map_or("n/a".to_string(), |m| format!("{m:.2}")),
            s.roles.alone,
            s.roles.initiator
        );
        summaries.insert(name.to_string(), serde_json::to_value(&s).map_err(|e| Failure::Runtime(e.to_string()))?);
        by_name.push(s);
    }
    let [seeking, averse, neutral, _] = &by_name[..] else {
        unreachable!("four populations")
    };
    let d = |s: &BatchSummary| s.durations.mean.unwrap_or(f64::NAN);
    let near_peak = |p: Option<f64>| p.is_some_and(|c| (0.075..=0.275).contains(&c));
    let doc = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": base,
        "populations": summaries,
        "orderings": {
            "duration_seeking_lt_averse": d(seeking) < d(averse),
            "duration_averse_lt_neutral": d(averse) < d(neutral),
            "duration_seeking_lt_averse_lt_neutral": d(seeking) < d(averse) && d(averse) < d(neutral),
            "alone_lowest_for_seeking": seeking.roles.alone < averse.roles.alone
                && seeking.roles.alone < neutral.roles.alone,
            "initiators_lowest_for_neutral": neutral.roles.initiator < seeking.roles.initiator
                && neutral.roles.initiator < averse.roles.initiator,
            "peak_near_0.15_0.20": {
                "seeking_ledger_total": near_peak(seeking.peak_bin_ledger_total),
                "seeking_accrual_only": near_peak(seeking.peak_bin_accrual_only),
                "neutral_ledger_total": near_peak(neutral.peak_bin_ledger_total),
                "neutral_accrual_only": near_peak(neutral.peak_bin_accrual_only),
            },
        },
    });
    create_dir(&dir)?;
    write(&dir.join("comparison.json"), &(pretty(&doc)? + "\n"))?;
    Ok(())
}

fn cmd_replay_check(args: &ReplayArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.trace_file).map_err(|e| io_failure(&args.trace_file, e))?;
    let trace = parse_trace(&text).map_err(|e| Failure::Divergence(e.to_string()))?;
    let report = replay_check(&trace).map_err(|d| Failure::Divergence(format!("divergence at {d}")))?;
    println!(
        "consistent: {} steps, {} events, {} formations, {} departures, {} trust updates, {} balance checks",
        report.steps,
        report.events,
        report.formations,
        report.departures,
        report.trust_updates,
        report.balance_checks
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::HonestyBin;

    #[test]
    fn honesty_csv_leaves_empty_means_blank() {
        let bins = [
            HonestyBin { bin_center: 0.0, mean_gained_utility: Some(1.5), agent_count: 2 },
            HonestyBin { bin_center: 0.05, mean_gained_utility: None, agent_count: 0 },
        ];
        assert_eq!(
            honesty_csv(&bins),
            "bin_center,mean_gained_utility,agent_count\n0.000000,1.500000,2\n0.050000,,0\n"
        );
    }

    #[test]
    fn flag_beats_environment() {
        assert_eq!(out_dir(Some(Path::new("x"))), PathBuf::from("x"));
    }

    #[test]
    fn overrides_then_seed() {
        let args = RunArgs {
            config: None,
            seed: Some(9),
            out: None,
            overrides: vec!["seed=3".into(), "n_agents=7".into()],
            trace: false,
            trust_csv: false,
        };
        let c = load_config(&args).unwrap();
        assert_eq!((c.seed, c.n_agents), (9, 7));
    }

    #[test]
    fn bad_override_is_a_config_error() {
        let code = main_with_args(["hedonica", "run", "--overrides", "n_agents=1"]);
        assert_eq!(code, EXIT_CONFIG);
        let code = main_with_args(["hedonica", "run", "--overrides", "no_such_field=1"]);
        assert_eq!(code, EXIT_CONFIG);
    }
}
