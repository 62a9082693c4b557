//! Episode loop, exact regret bookkeeping and multi-seed aggregation.
//!
//! The regret of episode `k` is `V*_1(s_1) - V^{pi_k}_1(s_1)` where `pi_k`
//! is the learner's greedy policy at the start of the episode, evaluated
//! exactly by the oracle. Alongside it the harness records the
//! exponential-domain surrogate
//!
//! ```text
//! beta > 0:  (exp(beta V^k_1) - exp(beta V^{pi_k}_1)) / beta
//! beta < 0:  exp(-beta H) / |beta| * (exp(beta V^{pi_k}_1) - exp(beta V^k_1))
//! ```
//!
//! which must dominate the regret whenever the learner is optimistic at
//! `s_1` (`V^k_1 >= V*_1`).
//!
//! Seeds fan out from one master seed: seed `i` runs on the ChaCha8 stream
//! `i` keyed by the master seed, so traces do not depend on execution order.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentSpec, ExpDomain, Learner, Observation};
use crate::error::HarnessError;
use crate::instances::MdpSpec;
use crate::mdp::{DeterministicPolicy, TabularMdp, Trajectory};
use crate::oracle::{optimal_values, policy_values, RiskParams};

/// Slack allowed on the surrogate dominance check.
pub const SURROGATE_TOLERANCE: f64 = 1e-9;
/// Slack allowed on nonnegativity of the per-episode regret.
pub const REGRET_TOLERANCE: f64 = 1e-10;

/// One learner on one MDP over `episodes` episodes and several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mdp: MdpSpec,
    pub risk: RiskParams,
    pub agent: AgentSpec,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
}

impl ExperimentConfig {
    /// Stride between recorded episodes: 1 up to 10^4 episodes, 10 beyond.
    pub fn record_stride(&self) -> usize {
        self.record_every.unwrap_or(if self.episodes <= 10_000 { 1 } else { 10 })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.episodes == 0 {
            return Err(HarnessError::Config("episodes must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must not be empty".into()));
        }
        let stride = self.record_stride();
        if stride == 0 || stride > self.episodes {
            return Err(HarnessError::Config(format!(
                "record_every must lie in 1..={} (got {stride})",
                self.episodes
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Random stream for one seed of an experiment.
pub fn seed_stream(master_seed: u64, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(seed);
    rng
}

/// What one episode produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub trajectory: Trajectory,
    /// Greedy policy at the start of the episode; the policy that was played.
    pub policy: DeterministicPolicy,
    /// The learner's `V^k_1(s_1)` at the start of the episode.
    pub value_estimate: f64,
}

/// Plays episode `k`: prepares the learner, snapshots its greedy policy,
/// then runs `H` steps from the initial state, feeding each transition back.
pub fn run_episode<R: rand::Rng + ?Sized>(
    mdp: &TabularMdp,
    agent: &mut dyn Learner,
    rng: &mut R,
    k: usize,
) -> Result<EpisodeRecord, HarnessError> {
    agent.begin_episode(k)?;
    let policy = agent.greedy_policy();
    let s1 = mdp.initial_state();
    let value_estimate = agent.value_estimate(0, s1);
    let horizon = mdp.horizon();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    states.push(s1);
    let mut s = s1;
    for h in 0..horizon {
        let a = agent.act(h, s);
        debug_assert_eq!(a, policy.action(h, s), "played action differs from the episode snapshot");
        let (reward, next_state) = mdp.step(h, s, a, rng)?;
        agent.observe(Observation { h, state: s, action: a, reward, next_state })?;
        actions.push(a);
        rewards.push(reward);
        states.push(next_state);
        s = next_state;
    }
    Ok(EpisodeRecord { trajectory: Trajectory { states, actions, rewards }, policy, value_estimate })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretRecord {
    pub k: usize,
    pub instant_regret: f64,
    pub cum_regret: f64,
    pub surrogate: f64,
    /// Whether `V^k_1(s_1) >= V*_1(s_1)` held in this episode.
    pub optimistic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTrace {
    pub seed: u64,
    pub records: Vec<RegretRecord>,
    pub final_cum_regret: f64,
    /// Episodes (over all `K`, recorded or not) where the learner was not optimistic at `s_1`.
    pub optimism_failures: usize,
    /// Optimistic episodes where the surrogate fell below the regret by more than the tolerance.
    pub surrogate_violations: usize,
    /// Exponential-domain entries found outside their admissible range.
    pub range_violations: usize,
    pub min_instant_regret: f64,
}

impl SeedTrace {
    pub fn optimistic_throughout(&self) -> bool {
        self.optimism_failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub agent: String,
    pub config_hash: String,
    pub episodes: usize,
    pub record_every: usize,
    pub beta: f64,
    pub v_star: f64,
    pub seeds: Vec<SeedTrace>,
    pub wall_time_secs: f64,
}

impl RegretTrace {
    pub fn final_regrets(&self) -> Vec<f64> {
        self.seeds.iter().map(|s| s.final_cum_regret).collect()
    }

    /// Sample mean and standard deviation (n - 1) of the final cumulative regret.
    pub fn final_regret_stats(&self) -> (f64, f64) {
        mean_std(&self.final_regrets())
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every seed of `config` (in parallel) and collects the regret trace.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RegretTrace, HarnessError> {
    config.validate()?;
    let mdp = config.mdp.build()?;
    run_experiment_on(config, &mdp)
}

/// Like [`run_experiment`] with the MDP already built.
pub fn run_experiment_on(config: &ExperimentConfig, mdp: &TabularMdp) -> Result<RegretTrace, HarnessError> {
    config.validate()?;
    let start = Instant::now();
    let v_star = optimal_values(mdp, &config.risk)?.initial_value(mdp);
    // Surface configuration errors once rather than per seed.
    config.agent.build(mdp, &config.risk, config.episodes)?;
    let seeds = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, mdp, v_star, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RegretTrace {
        agent: config.agent.label(),
        config_hash: config.hash(),
        episodes: config.episodes,
        record_every: config.record_stride(),
        beta: config.risk.beta,
        v_star,
        seeds,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn run_seed(
    config: &ExperimentConfig,
    mdp: &TabularMdp,
    v_star: f64,
    seed: u64,
) -> Result<SeedTrace, HarnessError> {
    let risk = &config.risk;
    let beta = risk.beta;
    let horizon = mdp.horizon();
    let stride = config.record_stride();
    let domain = ExpDomain { beta, horizon };
    let mut agent = config.agent.build(mdp, risk, config.episodes)?;
    let mut rng = seed_stream(config.master_seed, seed);

    let mut trace = SeedTrace {
        seed,
        records: Vec::with_capacity(config.episodes / stride),
        final_cum_regret: 0.0,
        optimism_failures: 0,
        surrogate_violations: 0,
        range_violations: 0,
        min_instant_regret: f64::INFINITY,
    };
    let mut cached: Option<(DeterministicPolicy, f64)> = None;
    let mut cum = 0.0;
    for k in 1..=config.episodes {
        let record = run_episode(mdp, agent.as_mut(), &mut rng, k)?;
        trace.range_violations += count_range_violations(agent.as_ref(), &domain, mdp);

        let v_pi = match &cached {
            Some((pi, v)) if *pi == record.policy => *v,
            _ => {
                let v = policy_values(mdp, &record.policy, risk)?.initial_value(mdp);
                cached = Some((record.policy.clone(), v));
                v
            }
        };
        let instant = v_star - v_pi;
        cum += instant;
        let v_k = record.value_estimate;
        let surrogate = regret_surrogate(beta, horizon, v_k, v_pi);
        let optimistic = v_k >= v_star;
        if !optimistic {
            trace.optimism_failures += 1;
        } else if surrogate < instant - SURROGATE_TOLERANCE {
            trace.surrogate_violations += 1;
        }
        trace.min_instant_regret = trace.min_instant_regret.min(instant);
        if k % stride == 0 {
            trace.records.push(RegretRecord { k, instant_regret: instant, cum_regret: cum, surrogate, optimistic });
        }
    }
    trace.final_cum_regret = cum;
    Ok(trace)
}

/// Upper bound on the episode regret in the exponential domain, valid when
/// `v_k >= V*_1 >= v_pi`.
pub fn regret_surrogate(beta: f64, horizon: usize, v_k: f64, v_pi: f64) -> f64 {
    if beta > 0.0 {
        ((beta * v_k).exp() - (beta * v_pi).exp()) / beta
    } else {
        (-beta * horizon as f64).exp() / beta.abs() * ((beta * v_pi).exp() - (beta * v_k).exp())
    }
}

fn count_range_violations(agent: &dyn Learner, domain: &ExpDomain, mdp: &TabularMdp) -> usize {
    let Some(g) = agent.exp_estimates() else {
        return 0;
    };
    let per_step = mdp.num_states() * mdp.num_actions();
    g.chunks(per_step)
        .enumerate()
        .map(|(h, row)| {
            let (lo, hi) = domain.range(h);
            row.iter().filter(|&&x| !(x >= lo && x <= hi)).count()
        })
        .sum()
}

/// Result of a log-log regression of cumulative regret on `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthFit {
    Slope(f64),
    /// Some seed had no positive cumulative regret in the window.
    ZeroRegret,
}

impl GrowthFit {
    pub fn slope(self) -> Option<f64> {
        match self {
            GrowthFit::Slope(s) => Some(s),
            GrowthFit::ZeroRegret => None,
        }
    }
}

/// Cumulative regret at or below this counts as zero.
const ZERO_REGRET: f64 = 1e-12;

/// Least-squares slope of `log(cum_regret)` against `log(k)` over recorded
/// episodes with `k_lo <= k <= k_hi`, averaged over seeds.
pub fn fit_growth_exponent(trace: &RegretTrace, window: (usize, usize)) -> Result<GrowthFit, HarnessError> {
    let (k_lo, k_hi) = window;
    if k_lo == 0 || k_lo >= k_hi {
        return Err(HarnessError::DegenerateWindow(format!("need 1 <= k_lo < k_hi (got {k_lo}..{k_hi})")));
    }
    if trace.seeds.is_empty() {
        return Err(HarnessError::DegenerateWindow("trace has no seeds".into()));
    }
    let mut slopes = Vec::with_capacity(trace.seeds.len());
    for seed in &trace.seeds {
        let points: Vec<(f64, f64)> = seed
            .records
            .iter()
            .filter(|r| r.k >= k_lo && r.k <= k_hi)
            .map(|r| (r.k as f64, r.cum_regret))
            .collect();
        if points.len() < 2 {
            return Err(HarnessError::DegenerateWindow(format!(
                "{} recorded episodes in {k_lo}..={k_hi}",
                points.len()
            )));
        }
        if points.iter().any(|&(_, c)| c <= ZERO_REGRET) {
            return Ok(GrowthFit::ZeroRegret);
        }
        let xy: Vec<(f64, f64)> = points.iter().map(|&(k, c)| (k.ln(), c.ln())).collect();
        slopes.push(least_squares_slope(&xy));
    }
    Ok(GrowthFit::Slope(slopes.iter().sum::<f64>() / slopes.len() as f64))
}

fn least_squares_slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xy.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Writes `seed,k,instant_regret,cum_regret,surrogate` rows with one header.
pub fn write_trace_csv<W: Write>(trace: &RegretTrace, out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["seed", "k", "instant_regret", "cum_regret", "surrogate"])?;
    for seed in &trace.seeds {
        for r in &seed.records {
            w.write_record(&[
                seed.seed.to_string(),
                r.k.to_string(),
                r.instant_regret.to_string(),
                r.cum_regret.to_string(),
                r.surrogate.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Side-by-side CSV for several traces: the trace columns prefixed by `agent`.
pub fn write_comparison_csv<W: Write>(traces: &[RegretTrace], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["agent", "seed", "k", "instant_regret", "cum_regret", "surrogate"])?;
    for trace in traces {
        for seed in &trace.seeds {
            for r in &seed.records {
                w.write_record(&[
                    trace.agent.clone(),
                    seed.seed.to_string(),
                    r.k.to_string(),
                    r.instant_regret.to_string(),
                    r.cum_regret.to_string(),
                    r.surrogate.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Deterministic per-run summary (no timing information).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub agent: String,
    pub config_hash: String,
    pub episodes: usize,
    pub num_seeds: usize,
    pub beta: f64,
    pub v_star: f64,
    pub final_cum_regret_mean: f64,
    pub final_cum_regret_std: f64,
    pub growth_window: (usize, usize),
    pub growth_exponent: Option<f64>,
    pub zero_regret: bool,
    /// Fraction of seeds optimistic at `s_1` in every episode.
    pub optimism_rate: f64,
    pub surrogate_violations: usize,
    pub range_violations: usize,
}

/// Default regression window: the last 90% of the run.
pub fn default_growth_window(episodes: usize) -> (usize, usize) {
    ((episodes / 10).max(1), episodes)
}

impl TraceSummary {
    pub fn from_trace(trace: &RegretTrace, window: (usize, usize)) -> Self {
        let (mean, std) = trace.final_regret_stats();
        let fit = fit_growth_exponent(trace, window).ok();
        let n = trace.seeds.len();
        Self {
            agent: trace.agent.clone(),
            config_hash: trace.config_hash.clone(),
            episodes: trace.episodes,
            num_seeds: n,
            beta: trace.beta,
            v_star: trace.v_star,
            final_cum_regret_mean: mean,
            final_cum_regret_std: std,
            growth_window: window,
            growth_exponent: fit.and_then(GrowthFit::slope),
            zero_regret: fit == Some(GrowthFit::ZeroRegret),
            optimism_rate: trace.seeds.iter().filter(|s| s.optimistic_throughout()).count() as f64 / n as f64,
            surrogate_violations: trace.seeds.iter().map(|s| s.surrogate_violations).sum(),
            range_violations: trace.seeds.iter().map(|s| s.range_violations).sum(),
        }
    }
}

/// A config file: one MDP, one risk setting, any number of learners.
///
/// `run` takes exactly one agent, `compare` two or more, `solve` only the
/// MDP and the `betas` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub mdp: MdpSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskParams>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<AgentSpec>,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_window: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub betas: Vec<f64>,
}

fn default_episodes() -> usize {
    1000
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl StudyConfig {
    /// One experiment per agent, in config order. Rejects duplicate labels.
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>, HarnessError> {
        let risk = self
            .risk
            .ok_or_else(|| HarnessError::Config("missing \"risk\" section".into()))?;
        if self.agents.is_empty() {
            return Err(HarnessError::Config("no agents configured".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.agents {
            if !seen.insert(a.label()) {
                return Err(HarnessError::Config(format!("duplicate agent id {:?}", a.label())));
            }
        }
        let experiments: Vec<ExperimentConfig> = self
            .agents
            .iter()
            .map(|agent| ExperimentConfig {
                mdp: self.mdp.clone(),
                risk,
                agent: agent.clone(),
                episodes: self.episodes,
                seeds: self.seeds.clone(),
                master_seed: self.master_seed,
                record_every: self.record_every,
            })
            .collect();
        for e in &experiments {
            e.validate()?;
        }
        Ok(experiments)
    }

    pub fn window(&self) -> (usize, usize) {
        self.growth_window.unwrap_or_else(|| default_growth_window(self.episodes))
    }
}
