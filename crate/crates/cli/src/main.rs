//! `riskrl`: run, solve, validate and compare entropic-risk experiments.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use riskrl_core::harness::{
    run_experiment, write_comparison_csv, write_trace_csv, ExperimentConfig, RegretTrace, StudyConfig, TraceSummary,
};
use riskrl_core::oracle::{expected_optimal_values, greedy_policy, optimal_values};
use riskrl_core::{AgentSpec, DeterministicPolicy, HarnessError, RiskError, RiskParams};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "riskrl", version, about = "Regret experiments under the entropic risk measure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override a config entry, e.g. `--set agents.bonus.c=4.0`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for seed-level parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Run one agent over all seeds.
    Run,
    /// Solve for V* and Q* over a grid of beta values.
    Solve,
    /// Check a config and its MDP without running anything.
    Validate,
    /// Run several agents on shared seeds and rank them.
    Compare,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<RiskError> for CliError {
    fn from(e: RiskError) -> Self {
        HarnessError::from(e).into()
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("riskrl: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let path = cli.config.as_deref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let env_seed = std::env::var(config::SEED_ENV).ok();
    let study = config::load(path, &cli.overrides, env_seed.as_deref())?;
    match cli.command {
        Command::Run => cmd_run(&study, &cli.out),
        Command::Solve => cmd_solve(&study, &cli.out),
        Command::Validate => cmd_validate(&study),
        Command::Compare => cmd_compare(&study, &cli.out),
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    #[serde(flatten)]
    summary: TraceSummary,
    agent_config: &'a AgentSpec,
    seeds: &'a [u64],
    master_seed: u64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Runs one experiment and writes `trace.csv`, `summary.json` and
/// `resolved_config.json` into `dir`.
fn run_into(exp: &ExperimentConfig, window: (usize, usize), dir: &Path) -> Result<(RegretTrace, TraceSummary), CliError> {
    let trace = run_experiment(exp)?;
    create_dir(dir)?;
    let csv_path = dir.join("trace.csv");
    let file = File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    write_trace_csv(&trace, BufWriter::new(file)).map_err(|e| io_err(&csv_path, e))?;
    let summary = TraceSummary::from_trace(&trace, window);
    write_json(
        &dir.join("summary.json"),
        &RunSummary { summary: summary.clone(), agent_config: &exp.agent, seeds: &exp.seeds, master_seed: exp.master_seed },
    )?;
    write_json(&dir.join("resolved_config.json"), exp)?;
    Ok((trace, summary))
}

fn cmd_run(study: &StudyConfig, out: &Path) -> Result<(), CliError> {
    let experiments = study.experiments()?;
    let [exp] = experiments.as_slice() else {
        return Err(CliError::Config(format!(
            "run takes exactly one agent (config has {}); use compare for several",
            experiments.len()
        )));
    };
    let (trace, summary) = run_into(exp, study.window(), out)?;
    let growth = summary.growth_exponent.map_or("n/a".to_string(), |g| format!("{g:.3}"));
    println!(
        "{}: final cumulative regret {:.4} +/- {:.4} over {} seeds, growth exponent {growth}, {:.2}s",
        trace.agent,
        summary.final_cum_regret_mean,
        summary.final_cum_regret_std,
        summary.num_seeds,
        trace.wall_time_secs
    );
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct RankEntry {
    rank: usize,
    agent: String,
    final_cum_regret_mean: f64,
    final_cum_regret_std: f64,
    growth_exponent: Option<f64>,
}

#[derive(Serialize)]
struct CompareSummary {
    episodes: usize,
    seeds: Vec<u64>,
    master_seed: u64,
    ranking: Vec<RankEntry>,
}

fn cmd_compare(study: &StudyConfig, out: &Path) -> Result<(), CliError> {
    let experiments = study.experiments()?;
    if experiments.len() < 2 {
        return Err(CliError::Config(format!("compare needs at least two agents (config has {})", experiments.len())));
    }
    create_dir(out)?;
    let window = study.window();
    let mut traces = Vec::with_capacity(experiments.len());
    let mut summaries = Vec::with_capacity(experiments.len());
    for exp in &experiments {
        let label = exp.agent.label();
        if label.is_empty() || label.contains(['/', '\\']) || label == "." || label == ".." {
            return Err(CliError::Config(format!("agent id {label:?} cannot name an output directory")));
        }
        let (trace, summary) = run_into(exp, window, &out.join(&label))?;
        traces.push(trace);
        summaries.push(summary);
    }
    let csv_path = out.join("compare.csv");
    let file = File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    write_comparison_csv(&traces, BufWriter::new(file)).map_err(|e| io_err(&csv_path, e))?;

    let mut order: Vec<usize> = (0..summaries.len()).collect();
    order.sort_by(|&a, &b| summaries[a].final_cum_regret_mean.total_cmp(&summaries[b].final_cum_regret_mean));
    let ranking: Vec<RankEntry> = order
        .iter()
        .enumerate()
        .map(|(i, &j)| RankEntry {
            rank: i + 1,
            agent: summaries[j].agent.clone(),
            final_cum_regret_mean: summaries[j].final_cum_regret_mean,
            final_cum_regret_std: summaries[j].final_cum_regret_std,
            growth_exponent: summaries[j].growth_exponent,
        })
        .collect();
    for r in &ranking {
        println!(
            "{:>2}. {:<24} {:>12.4} +/- {:.4}",
            r.rank, r.agent, r.final_cum_regret_mean, r.final_cum_regret_std
        );
    }
    write_json(
        &out.join("summary.json"),
        &CompareSummary { episodes: study.episodes, seeds: study.seeds.clone(), master_seed: study.master_seed, ranking },
    )?;
    write_json(&out.join("resolved_config.json"), study)?;
    println!("wrote {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct SolvedBeta {
    beta: f64,
    v_star_initial: f64,
    v: Vec<Vec<f64>>,
    q: Vec<Vec<Vec<f64>>>,
    policy: DeterministicPolicy,
}

#[derive(Serialize)]
struct SolveOutput {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    initial_state: usize,
    risk_neutral_value: f64,
    risk_neutral_v: Vec<Vec<f64>>,
    solutions: Vec<SolvedBeta>,
}

fn cmd_solve(study: &StudyConfig, out: &Path) -> Result<(), CliError> {
    let mdp = study.mdp.build().map_err(|e| CliError::Config(e.to_string()))?;
    let base = study.risk.unwrap_or_else(|| RiskParams::new(1.0));
    let betas: Vec<f64> = if study.betas.is_empty() {
        match study.risk {
            Some(r) => vec![r.beta],
            None => return Err(CliError::Config("solve needs \"betas\" or a \"risk\" section".into())),
        }
    } else {
        study.betas.clone()
    };
    let mut solutions = Vec::with_capacity(betas.len());
    for beta in betas {
        let params = RiskParams { beta, ..base };
        let tables = optimal_values(&mdp, &params)?;
        solutions.push(SolvedBeta {
            beta,
            v_star_initial: tables.initial_value(&mdp),
            policy: greedy_policy(&tables, &params),
            v: tables.v,
            q: tables.q,
        });
    }
    let neutral = expected_optimal_values(&mdp);
    let output = SolveOutput {
        horizon: mdp.horizon(),
        num_states: mdp.num_states(),
        num_actions: mdp.num_actions(),
        initial_state: mdp.initial_state(),
        risk_neutral_value: neutral.v[0][mdp.initial_state()],
        risk_neutral_v: neutral.v,
        solutions,
    };
    create_dir(out)?;
    write_json(&out.join("solve.json"), &output)?;
    write_json(&out.join("resolved_config.json"), study)?;
    for s in &output.solutions {
        println!("beta {:>8}: V*_1 = {:.10}", s.beta, s.v_star_initial);
    }
    println!("risk-neutral : V_1  = {:.10}", output.risk_neutral_value);
    Ok(())
}

fn cmd_validate(study: &StudyConfig) -> Result<(), CliError> {
    let mdp = study.mdp.build().map_err(|e| CliError::Config(e.to_string()))?;
    mdp.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let mut checked = 0;
    if let Some(risk) = study.risk {
        risk.validate(mdp.horizon())?;
        checked += 1;
    }
    for &beta in &study.betas {
        RiskParams { beta, ..study.risk.unwrap_or_else(|| RiskParams::new(beta)) }.validate(mdp.horizon())?;
        checked += 1;
    }
    if !study.agents.is_empty() {
        for exp in study.experiments()? {
            exp.agent.build(&mdp, &exp.risk, exp.episodes).map_err(HarnessError::from)?;
        }
    }
    println!(
        "ok: H={} S={} A={}, {} risk setting(s), {} agent(s)",
        mdp.horizon(),
        mdp.num_states(),
        mdp.num_actions(),
        checked,
        study.agents.len()
    );
    Ok(())
}
