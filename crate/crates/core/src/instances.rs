//! Benchmark instance families.
//!
//! None of these come with a canonical construction; they are the fixtures
//! the experiments and tests run on. Every generator is a pure function of
//! its arguments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::MdpError;
use crate::mdp::{MdpShape, TabularMdp};

/// Random MDP with Dirichlet(`dirichlet_alpha`) transition rows and uniform
/// rewards in `[0, 1)`. The initial state is 0.
pub fn make_random_mdp(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    seed: u64,
    dirichlet_alpha: f64,
) -> Result<TabularMdp, MdpError> {
    let shape = positive_shape(horizon, num_states, num_actions)?;
    if !(dirichlet_alpha.is_finite() && dirichlet_alpha > 0.0) {
        return Err(MdpError::InvalidParameter(format!(
            "dirichlet_alpha must be positive and finite (got {dirichlet_alpha})"
        )));
    }
    let gamma = Gamma::new(dirichlet_alpha, 1.0)
        .map_err(|e| MdpError::InvalidParameter(format!("dirichlet_alpha: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = Vec::with_capacity(shape.sa_len() * num_states);
    let mut rewards = Vec::with_capacity(shape.sa_len());
    let mut row = vec![0.0; num_states];
    for _ in 0..shape.sa_len() {
        for p in row.iter_mut() {
            *p = gamma.sample(&mut rng);
        }
        let total: f64 = row.iter().sum();
        if total > 0.0 && total.is_finite() {
            row.iter_mut().for_each(|p| *p /= total);
        } else {
            // Every gamma draw underflowed (tiny alpha): the Dirichlet limit is a vertex.
            row.iter_mut().for_each(|p| *p = 0.0);
            row[rng.random_range(0..num_states)] = 1.0;
        }
        transitions.extend_from_slice(&row);
        rewards.push(rng.random::<f64>());
    }
    TabularMdp::new(shape, 0, transitions, rewards)
}

/// Single-state bandit-like MDP: step 1 pays `arm_rewards[a]`, every later
/// step pays `later_reward` whatever the action.
pub fn make_bandit_instance(
    arm_rewards: &[f64],
    horizon: usize,
    later_reward: f64,
) -> Result<TabularMdp, MdpError> {
    let num_actions = arm_rewards.len();
    let shape = positive_shape(horizon, 1, num_actions)?;
    let transitions = vec![1.0; shape.sa_len()];
    let mut rewards = arm_rewards.to_vec();
    rewards.resize(shape.sa_len(), later_reward);
    TabularMdp::new(shape, 0, transitions, rewards)
}

/// The lower-bound style hard instance: one seeded arm beats the others by
/// exactly `gap` at step 1; all later rewards are 0.5.
///
/// The common step-1 reward of the other arms is drawn uniformly from
/// `[0, 1 - gap)`.
pub fn make_bandit_hard_instance(
    num_actions: usize,
    horizon: usize,
    gap: f64,
    seed: u64,
) -> Result<TabularMdp, MdpError> {
    if num_actions < 2 {
        return Err(MdpError::InvalidParameter(format!(
            "bandit-hard instance needs A >= 2 (got {num_actions})"
        )));
    }
    if !(gap > 0.0 && gap < 1.0) {
        return Err(MdpError::InvalidParameter(format!("gap must lie in (0, 1) (got {gap})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let best = rng.random_range(0..num_actions);
    let base = rng.random::<f64>() * (1.0 - gap);
    let mut arms = vec![base; num_actions];
    arms[best] = base + gap;
    make_bandit_instance(&arms, horizon, 0.5)
}

/// Deterministic chain: every action moves `s -> s + 1`, so the state at
/// step `h` is `h`. `S = H + 1`; the reward of action `a` at step `h` is
/// `rewards[h][a]`.
pub fn make_chain(rewards: &[Vec<f64>]) -> Result<TabularMdp, MdpError> {
    let horizon = rewards.len();
    let num_actions = rewards.first().map_or(0, Vec::len);
    let shape = positive_shape(horizon, horizon + 1, num_actions)?;
    let n = shape.num_states;
    let mut transitions = vec![0.0; shape.sa_len() * n];
    let mut flat_rewards = vec![0.0; shape.sa_len()];
    for h in 0..horizon {
        if rewards[h].len() != num_actions {
            return Err(MdpError::Shape(format!("chain rewards at step {} have wrong length", h + 1)));
        }
        for s in 0..n {
            for a in 0..num_actions {
                let idx = shape.sa_index(h, s, a);
                transitions[idx * n + (s + 1).min(n - 1)] = 1.0;
                flat_rewards[idx] = rewards[h][a];
            }
        }
    }
    TabularMdp::new(shape, 0, transitions, flat_rewards)
}

/// Two-step coin flip: step 1 moves to state 1 or 2 with probability 1/2 and
/// pays nothing; step 2 pays 1 in state 1 and 0 in state 2. The return is a
/// fair Bernoulli variable.
pub fn make_coin_flip() -> TabularMdp {
    let shape = MdpShape { horizon: 2, num_states: 3, num_actions: 1 };
    #[rustfmt::skip]
    let transitions = vec![
        0.0, 0.5, 0.5,
        0.0, 1.0, 0.0,
        0.0, 0.0, 1.0,
        1.0, 0.0, 0.0,
        1.0, 0.0, 0.0,
        1.0, 0.0, 0.0,
    ];
    let rewards = vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    TabularMdp::new(shape, 0, transitions, rewards).expect("coin flip instance is valid")
}

fn positive_shape(horizon: usize, num_states: usize, num_actions: usize) -> Result<MdpShape, MdpError> {
    if horizon == 0 || num_states == 0 || num_actions == 0 {
        return Err(MdpError::InvalidParameter(format!(
            "H, S and A must be positive (got H={horizon}, S={num_states}, A={num_actions})"
        )));
    }
    Ok(MdpShape { horizon, num_states, num_actions })
}

/// Declarative description of an MDP inside experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MdpSpec {
    Inline {
        mdp: TabularMdp,
    },
    /// Path to an MDP JSON document; relative paths are resolved by the caller.
    File {
        path: String,
    },
    Random {
        #[serde(rename = "S")]
        num_states: usize,
        #[serde(rename = "A")]
        num_actions: usize,
        #[serde(rename = "H")]
        horizon: usize,
        seed: u64,
        #[serde(default = "default_alpha")]
        dirichlet_alpha: f64,
    },
    BanditHard {
        #[serde(rename = "A")]
        num_actions: usize,
        #[serde(rename = "H")]
        horizon: usize,
        gap: f64,
        seed: u64,
    },
    Chain {
        rewards: Vec<Vec<f64>>,
    },
    CoinFlip,
}

fn default_alpha() -> f64 {
    1.0
}

impl MdpSpec {
    /// Builds the MDP. `File` specs are read from disk as given.
    pub fn build(&self) -> Result<TabularMdp, MdpError> {
        match self {
            MdpSpec::Inline { mdp } => Ok(mdp.clone()),
            MdpSpec::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| MdpError::InvalidParameter(format!("cannot read {path}: {e}")))?;
                serde_json::from_str(&text)
                    .map_err(|e| MdpError::InvalidParameter(format!("{path}: {e}")))
            }
            MdpSpec::Random { num_states, num_actions, horizon, seed, dirichlet_alpha } => {
                make_random_mdp(*num_states, *num_actions, *horizon, *seed, *dirichlet_alpha)
            }
            MdpSpec::BanditHard { num_actions, horizon, gap, seed } => {
                make_bandit_hard_instance(*num_actions, *horizon, *gap, *seed)
            }
            MdpSpec::Chain { rewards } => make_chain(rewards),
            MdpSpec::CoinFlip => Ok(make_coin_flip()),
        }
    }
}
