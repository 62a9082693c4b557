//! Risk-sensitive value iteration with a doubly decaying bonus.
//!
//! Before every episode the whole estimate is rebuilt backwards in `h` from
//! the stored transitions: `w_h(s, a)` is the sample average of
//! `exp(beta (r + V_{h+1}(s')))` over every past visit of `(h, s, a)`, using
//! the `V_{h+1}` just recomputed for this episode.

use serde::{Deserialize, Serialize};

use super::{check_risk, greedy_from_exp, AgentCheckpoint, BonusConfig, ExpDomain, InitRule, Learner, Observation};
use crate::error::AgentError;
use crate::mdp::{DeterministicPolicy, MdpShape};
use crate::oracle::RiskParams;

/// How past transitions are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplayMode {
    /// Keep every transition and re-average over all of them each episode.
    #[default]
    Full,
    /// Keep only next-state counts per `(h, s, a)`. Same estimator, `O(S)`
    /// work per pair instead of `O(N)`.
    Counts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rsvi2Agent {
    shape: MdpShape,
    domain: ExpDomain,
    bonus: BonusConfig,
    init: InitRule,
    replay_mode: ReplayMode,
    iota: f64,
    counts: Vec<u64>,
    g: Vec<f64>,
    // [h][s], H + 1 rows
    v: Vec<f64>,
    // exp(beta r_h(s, a)) for visited pairs
    exp_reward: Vec<f64>,
    replay: Vec<Vec<Transition>>,
    // [h][s][a][s'], Counts mode only
    next_counts: Vec<u64>,
}

impl Rsvi2Agent {
    pub fn new(
        shape: MdpShape,
        risk: &RiskParams,
        bonus: BonusConfig,
        init: InitRule,
        replay_mode: ReplayMode,
        episodes: usize,
    ) -> Result<Self, AgentError> {
        check_risk(shape, risk)?;
        bonus.validate()?;
        let domain = ExpDomain { beta: risk.beta, horizon: shape.horizon };
        let n_s = shape.num_states;
        let mut agent = Self {
            shape,
            domain,
            bonus,
            init,
            replay_mode,
            iota: super::iota(shape, episodes, bonus.delta),
            counts: vec![0; shape.sa_len()],
            g: vec![0.0; shape.sa_len()],
            v: vec![0.0; (shape.horizon + 1) * n_s],
            exp_reward: vec![0.0; shape.sa_len()],
            replay: vec![Vec::new(); shape.horizon],
            next_counts: match replay_mode {
                ReplayMode::Full => Vec::new(),
                ReplayMode::Counts => vec![0; shape.sa_len() * n_s],
            },
        };
        for h in 0..shape.horizon {
            let g0 = domain.initial(h, init);
            for s in 0..n_s {
                for a in 0..shape.num_actions {
                    agent.g[shape.sa_index(h, s, a)] = g0;
                }
                agent.v[h * n_s + s] = g0.ln() / domain.beta;
            }
        }
        Ok(agent)
    }

    pub fn shape(&self) -> MdpShape {
        self.shape
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn stored_transitions(&self, h: usize) -> &[Transition] {
        &self.replay[h]
    }

    pub fn iota(&self) -> f64 {
        self.iota
    }

    /// Bonus for a pair at step `h` visited `n >= 1` times.
    pub fn bonus_for(&self, h: usize, n: u64) -> f64 {
        let mult = self.bonus.multiplier(self.domain.beta, self.shape.horizon, h);
        self.bonus.c * mult * (self.shape.num_states as f64 * self.iota / n as f64).sqrt()
    }

    /// Rebuilds `G` and `V` from all stored data and returns the greedy policy.
    pub fn plan(&mut self) -> DeterministicPolicy {
        let MdpShape { horizon, num_states: n_s, num_actions: n_a } = self.shape;
        let beta = self.domain.beta;
        let mut exp_next = vec![0.0; n_s];
        let mut sums = vec![0.0; n_s * n_a];
        for h in (0..horizon).rev() {
            for (sp, e) in exp_next.iter_mut().enumerate() {
                *e = (beta * self.v[(h + 1) * n_s + sp]).exp();
            }
            sums.iter_mut().for_each(|x| *x = 0.0);
            match self.replay_mode {
                ReplayMode::Full => {
                    for tr in &self.replay[h] {
                        sums[tr.state * n_a + tr.action] += exp_next[tr.next_state];
                    }
                }
                ReplayMode::Counts => {
                    for (sa, sum) in sums.iter_mut().enumerate() {
                        let start = (h * n_s * n_a + sa) * n_s;
                        *sum = self.next_counts[start..start + n_s]
                            .iter()
                            .zip(&exp_next)
                            .map(|(&n, &e)| n as f64 * e)
                            .sum();
                    }
                }
            }
            for s in 0..n_s {
                for a in 0..n_a {
                    let idx = self.shape.sa_index(h, s, a);
                    let n = self.counts[idx];
                    self.g[idx] = if n == 0 {
                        self.domain.initial(h, self.init)
                    } else {
                        let w = self.exp_reward[idx] * sums[s * n_a + a] / n as f64;
                        self.domain.project(w, self.bonus_for(h, n), h)
                    };
                }
                let start = self.shape.sa_index(h, s, 0);
                self.v[h * n_s + s] = self.domain.value(&self.g[start..start + n_a]);
            }
        }
        self.greedy_policy()
    }
}

impl Learner for Rsvi2Agent {
    fn begin_episode(&mut self, _k: usize) -> Result<(), AgentError> {
        self.plan();
        Ok(())
    }

    fn act(&self, h: usize, s: usize) -> usize {
        let start = self.shape.sa_index(h, s, 0);
        super::act_on_row(&self.g[start..start + self.shape.num_actions], self.domain.beta)
    }

    fn observe(&mut self, obs: Observation) -> Result<(), AgentError> {
        let Observation { h, state, action, reward, next_state } = obs;
        let n_s = self.shape.num_states;
        if h >= self.shape.horizon || state >= n_s || action >= self.shape.num_actions || next_state >= n_s
        {
            return Err(AgentError::InvalidConfig(format!("observation out of range: {obs:?}")));
        }
        let idx = self.shape.sa_index(h, state, action);
        self.counts[idx] += 1;
        self.exp_reward[idx] = (self.domain.beta * reward).exp();
        match self.replay_mode {
            ReplayMode::Full => self.replay[h].push(Transition { state, action, reward, next_state }),
            ReplayMode::Counts => self.next_counts[idx * n_s + next_state] += 1,
        }
        Ok(())
    }

    fn greedy_policy(&self) -> DeterministicPolicy {
        greedy_from_exp(self.shape, &self.g, self.domain.beta)
    }

    fn value_estimate(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.shape.num_states + s]
    }

    fn exp_estimates(&self) -> Option<&[f64]> {
        Some(&self.g)
    }

    fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint::Rsvi2(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::BonusStyle;

    fn shape() -> MdpShape {
        MdpShape { horizon: 2, num_states: 2, num_actions: 2 }
    }

    fn agent(beta: f64, style: BonusStyle, c: f64, mode: ReplayMode) -> Rsvi2Agent {
        Rsvi2Agent::new(
            shape(),
            &RiskParams::new(beta),
            BonusConfig::new(c, 0.1, style),
            InitRule::Optimistic,
            mode,
            100,
        )
        .unwrap()
    }

    #[test]
    fn first_episode_is_all_optimistic() {
        for beta in [-1.0, 0.5] {
            let mut a = agent(beta, BonusStyle::DoublyDecaying, 1.0, ReplayMode::Full);
            let pi = a.plan();
            assert_eq!(pi, DeterministicPolicy::constant(shape(), 0));
            for h in 0..2 {
                for s in 0..2 {
                    assert!((a.value_estimate(h, s) - (2 - h) as f64).abs() < 1e-12);
                    for act in 0..2 {
                        let g = a.g[shape().sa_index(h, s, act)];
                        assert_eq!(g, (beta * (2 - h) as f64).exp());
                    }
                }
            }
            assert!(a.value_estimate(2, 0) == 0.0 && a.value_estimate(2, 1) == 0.0);
        }
    }

    #[test]
    fn single_transition_zero_bonus_by_hand() {
        let beta = 0.7;
        let mut a = agent(beta, BonusStyle::Zero, 1.0, ReplayMode::Full);
        a.plan();
        // One visit of (h=1, s=0, a=1) landing in state 1, reward 0.4.
        a.observe(Observation { h: 1, state: 0, action: 1, reward: 0.4, next_state: 1 }).unwrap();
        a.plan();
        let g = a.g[shape().sa_index(1, 0, 1)];
        // V_3 = 0 so the target is exp(beta * 0.4).
        assert!((g - (beta * 0.4f64).exp()).abs() < 1e-15);
        // The unvisited sibling keeps exp(beta * 1), so the greedy action is 0.
        assert_eq!(a.act(1, 0), 0);
    }

    #[test]
    fn huge_bonus_saturates() {
        let mut a = agent(1.0, BonusStyle::DoublyDecaying, 1e9, ReplayMode::Full);
        for k in 0..5 {
            a.plan();
            a.observe(Observation { h: 0, state: 0, action: k % 2, reward: 0.0, next_state: 1 }).unwrap();
            a.observe(Observation { h: 1, state: 1, action: 0, reward: 0.0, next_state: 0 }).unwrap();
        }
        a.plan();
        for h in 0..2 {
            let ceiling = ((2 - h) as f64).exp();
            assert!(a.g[h * 4..h * 4 + 4].iter().all(|&g| g == ceiling));
        }
    }

    #[test]
    fn counts_mode_matches_full_replay() {
        for beta in [-1.3, 0.8] {
            let mut full = agent(beta, BonusStyle::DoublyDecaying, 0.05, ReplayMode::Full);
            let mut counts = agent(beta, BonusStyle::DoublyDecaying, 0.05, ReplayMode::Counts);
            let mut x: u64 = 12345;
            for _ in 0..200 {
                full.plan();
                counts.plan();
                for h in 0..2 {
                    x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let (state, action) = ((x >> 33) as usize % 2, (x >> 40) as usize % 2);
                    let obs = Observation {
                        h,
                        state,
                        action,
                        // Rewards are a function of (h, s, a).
                        reward: 0.1 * (h + state + action) as f64,
                        next_state: (x >> 45) as usize % 2,
                    };
                    full.observe(obs).unwrap();
                    counts.observe(obs).unwrap();
                }
            }
            full.plan();
            counts.plan();
            for (a, b) in full.g.iter().zip(&counts.g) {
                assert!((a - b).abs() <= 1e-12 * a.abs());
            }
        }
    }

    #[test]
    fn counts_match_stored_transitions() {
        let mut a = agent(1.0, BonusStyle::DoublyDecaying, 1.0, ReplayMode::Full);
        a.observe(Observation { h: 0, state: 1, action: 1, reward: 0.2, next_state: 0 }).unwrap();
        a.observe(Observation { h: 0, state: 1, action: 1, reward: 0.2, next_state: 1 }).unwrap();
        assert_eq!(a.counts()[shape().sa_index(0, 1, 1)], 2);
        assert_eq!(a.stored_transitions(0).len(), 2);
        assert!(a.observe(Observation { h: 2, state: 0, action: 0, reward: 0.0, next_state: 0 }).is_err());
    }

    #[test]
    fn rejects_tiny_beta() {
        let err = Rsvi2Agent::new(
            shape(),
            &RiskParams::new(1e-8),
            BonusConfig::default(),
            InitRule::Optimistic,
            ReplayMode::Full,
            10,
        )
        .unwrap_err();
        assert!(matches!(err, AgentError::DegenerateBeta(_)));
    }
}
