//! Exact dynamic programming for the entropic risk measure.
//!
//! For a policy `pi` the entropic value is
//! `V_h(s) = (1/beta) log E[exp(beta * sum_{i>=h} r_i) | s_h = s]`,
//! and the backward recursion is carried out on `exp(beta * Q)` directly:
//!
//! ```text
//! exp(beta Q_h(s,a)) = sum_{s'} P_h(s'|s,a) exp(beta (r_h(s,a) + V_{h+1}(s')))
//! ```
//!
//! Expectations are exact dot products with the kernel rows, so the tables
//! here are the ground truth for regret. Two numeric modes are offered:
//! `DirectExponential` multiplies in the exponential domain and is limited by
//! an overflow budget on `|beta| (H + 1)`; `LogSpace` runs the same backup
//! through a log-sum-exp and has no such limit.

use serde::{Deserialize, Serialize};

use crate::error::RiskError;
use crate::math::{arg_extremum, entropic_argmax, log_sum_exp};
use crate::mdp::{DeterministicPolicy, TabularMdp};

/// Self-consistency tolerance of the exponential Bellman backup.
pub const BACKUP_TOLERANCE: f64 = 1e-12;
/// Agreement tolerance between the two numeric modes.
pub const CROSS_MODE_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_OVERFLOW_BUDGET: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NumericMode {
    #[default]
    DirectExponential,
    LogSpace,
}

/// Risk parameter `beta` (risk-seeking when positive, risk-averse when
/// negative), confidence level `delta` and numeric settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskParams {
    pub beta: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub numeric_mode: NumericMode,
    #[serde(default = "default_budget")]
    pub overflow_budget: f64,
}

fn default_delta() -> f64 {
    0.1
}

fn default_budget() -> f64 {
    DEFAULT_OVERFLOW_BUDGET
}

impl RiskParams {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            delta: default_delta(),
            numeric_mode: NumericMode::default(),
            overflow_budget: DEFAULT_OVERFLOW_BUDGET,
        }
    }

    pub fn with_mode(mut self, mode: NumericMode) -> Self {
        self.numeric_mode = mode;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// Checks `beta != 0`, `delta in (0, 1]` and, in direct mode, the
    /// overflow budget for horizon `horizon`.
    pub fn validate(&self, horizon: usize) -> Result<(), RiskError> {
        if !(self.beta.is_finite() && self.beta != 0.0) {
            return Err(RiskError::InvalidBeta(self.beta));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(RiskError::InvalidDelta(self.delta));
        }
        if self.numeric_mode == NumericMode::DirectExponential {
            check_budget(self.beta, horizon, self.overflow_budget)?;
        }
        Ok(())
    }
}

pub(crate) fn check_budget(beta: f64, horizon: usize, budget: f64) -> Result<(), RiskError> {
    let product = beta.abs() * (horizon as f64 + 1.0);
    if product > budget {
        return Err(RiskError::OverflowBudget { product, budget });
    }
    Ok(())
}

/// Per-step value tables in both the plain and the exponential domain.
///
/// `v` has `H + 1` rows with `v[H] = 0`; `q`, `exp_q` are `[h][s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTables {
    pub beta: f64,
    pub v: Vec<Vec<f64>>,
    pub q: Vec<Vec<Vec<f64>>>,
    pub exp_v: Vec<Vec<f64>>,
    pub exp_q: Vec<Vec<Vec<f64>>>,
}

impl ValueTables {
    fn zeroed(mdp: &TabularMdp, beta: f64) -> Self {
        let (h, s, a) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
        let mut v = vec![vec![0.0; s]; h + 1];
        let mut exp_v = vec![vec![0.0; s]; h + 1];
        v[h] = vec![0.0; s];
        exp_v[h] = vec![1.0; s];
        Self {
            beta,
            v,
            q: vec![vec![vec![0.0; a]; s]; h],
            exp_v,
            exp_q: vec![vec![vec![0.0; a]; s]; h],
        }
    }

    pub fn horizon(&self) -> usize {
        self.q.len()
    }

    /// `V_1(s)` at the MDP's initial state.
    pub fn initial_value(&self, mdp: &TabularMdp) -> f64 {
        self.v[0][mdp.initial_state()]
    }

    /// Largest relative residual of the exponential Bellman backup,
    /// `|exp_q - E_{s'}[exp(beta (r + V_{h+1}(s')))]| / exp_q`, over all
    /// `(h, s, a)`. Uses the plain-domain `v`, so it also checks that `v`
    /// and `exp_q` describe the same values.
    pub fn backup_residual(&self, mdp: &TabularMdp) -> f64 {
        let beta = self.beta;
        let mut worst: f64 = 0.0;
        for h in 0..mdp.horizon() {
            for s in 0..mdp.num_states() {
                for a in 0..mdp.num_actions() {
                    let r = mdp.reward(h, s, a);
                    let rhs: f64 = mdp
                        .transition_row(h, s, a)
                        .iter()
                        .zip(&self.v[h + 1])
                        .map(|(&p, &v)| p * (beta * (r + v)).exp())
                        .sum();
                    let lhs = self.exp_q[h][s][a];
                    worst = worst.max((lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE));
                }
            }
        }
        worst
    }
}

/// Optimal entropic values `V*`, `Q*`.
pub fn optimal_values(mdp: &TabularMdp, params: &RiskParams) -> Result<ValueTables, RiskError> {
    params.validate(mdp.horizon())?;
    Ok(backward_induction(mdp, params, None))
}

/// Entropic values of a fixed deterministic policy.
pub fn policy_values(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    params: &RiskParams,
) -> Result<ValueTables, RiskError> {
    params.validate(mdp.horizon())?;
    policy.check(mdp.shape())?;
    Ok(backward_induction(mdp, params, Some(policy)))
}

fn backward_induction(
    mdp: &TabularMdp,
    params: &RiskParams,
    policy: Option<&DeterministicPolicy>,
) -> ValueTables {
    let beta = params.beta;
    let mut t = ValueTables::zeroed(mdp, beta);
    for h in (0..mdp.horizon()).rev() {
        for s in 0..mdp.num_states() {
            for a in 0..mdp.num_actions() {
                let r = mdp.reward(h, s, a);
                let row = mdp.transition_row(h, s, a);
                match params.numeric_mode {
                    NumericMode::DirectExponential => {
                        let next: f64 = row.iter().zip(&t.exp_v[h + 1]).map(|(p, e)| p * e).sum();
                        let em = (beta * r).exp() * next;
                        t.exp_q[h][s][a] = em;
                        t.q[h][s][a] = em.ln() / beta;
                    }
                    NumericMode::LogSpace => {
                        let next_v = &t.v[h + 1];
                        let log_m = beta * r
                            + log_sum_exp(
                                row.iter()
                                    .zip(next_v)
                                    .filter(|(&p, _)| p > 0.0)
                                    .map(|(&p, &v)| p.ln() + beta * v),
                            );
                        t.exp_q[h][s][a] = log_m.exp();
                        t.q[h][s][a] = log_m / beta;
                    }
                }
            }
            let chosen = match policy {
                Some(pi) => pi.action(h, s),
                None => match params.numeric_mode {
                    NumericMode::DirectExponential => entropic_argmax(&t.exp_q[h][s], beta),
                    NumericMode::LogSpace => arg_extremum(&t.q[h][s], true),
                },
            };
            t.v[h][s] = t.q[h][s][chosen];
            t.exp_v[h][s] = match params.numeric_mode {
                NumericMode::DirectExponential => t.exp_q[h][s][chosen],
                NumericMode::LogSpace => (beta * t.v[h][s]).exp(),
            };
        }
    }
    t
}

/// Moment generating function of the return from step `h` under `policy`:
/// entry `[h][s][a]` is `E[exp(mu * sum_{i>=h} r_i) | s_h = s, a_h = a]`.
///
/// `mu = 0` yields exactly 1 everywhere. At `mu = beta` this coincides with
/// the direct-mode `exp_q` of [`policy_values`].
pub fn mgf_of_return(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    mu: f64,
) -> Result<Vec<Vec<Vec<f64>>>, RiskError> {
    policy.check(mdp.shape())?;
    let (horizon, n_s, n_a) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    if mu == 0.0 {
        return Ok(vec![vec![vec![1.0; n_a]; n_s]; horizon]);
    }
    if !mu.is_finite() {
        return Err(RiskError::InvalidBeta(mu));
    }
    check_budget(mu, horizon, DEFAULT_OVERFLOW_BUDGET)?;
    let params = RiskParams::new(mu);
    Ok(backward_induction(mdp, &params, Some(policy)).exp_q)
}

/// Greedy policy with respect to `tables`: the largest `exp_q` for
/// `beta > 0`, the smallest for `beta < 0`, which in both cases is the
/// largest `Q`. Rows with non-finite `exp_q` fall back to `Q`. Ties go to the
/// lowest action index.
pub fn greedy_policy(tables: &ValueTables, params: &RiskParams) -> DeterministicPolicy {
    let actions = tables
        .exp_q
        .iter()
        .zip(&tables.q)
        .map(|(exp_rows, q_rows)| {
            exp_rows
                .iter()
                .zip(q_rows)
                .map(|(exp_row, q_row)| {
                    if exp_row.iter().all(|x| x.is_finite()) {
                        entropic_argmax(exp_row, params.beta)
                    } else {
                        arg_extremum(q_row, true)
                    }
                })
                .collect()
        })
        .collect();
    DeterministicPolicy { actions }
}

/// `(V*_1(s_1), V^pi_1(s_1))`; their difference is the episode regret of `pi`.
pub fn regret_terms(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
    params: &RiskParams,
) -> Result<(f64, f64), RiskError> {
    let v_star = optimal_values(mdp, params)?.initial_value(mdp);
    let v_pi = policy_values(mdp, policy, params)?.initial_value(mdp);
    Ok((v_star, v_pi))
}

/// Plain expected-return tables (the `beta -> 0` limit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedValueTables {
    pub v: Vec<Vec<f64>>,
    pub q: Vec<Vec<Vec<f64>>>,
}

/// Risk-neutral optimal values by ordinary backward induction.
pub fn expected_optimal_values(mdp: &TabularMdp) -> ExpectedValueTables {
    expected_backward(mdp, None)
}

/// Risk-neutral values of a fixed policy.
pub fn expected_policy_values(
    mdp: &TabularMdp,
    policy: &DeterministicPolicy,
) -> Result<ExpectedValueTables, RiskError> {
    policy.check(mdp.shape())?;
    Ok(expected_backward(mdp, Some(policy)))
}

fn expected_backward(mdp: &TabularMdp, policy: Option<&DeterministicPolicy>) -> ExpectedValueTables {
    let (horizon, n_s, n_a) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let mut v = vec![vec![0.0; n_s]; horizon + 1];
    let mut q = vec![vec![vec![0.0; n_a]; n_s]; horizon];
    for h in (0..horizon).rev() {
        for s in 0..n_s {
            for a in 0..n_a {
                let next: f64 =
                    mdp.transition_row(h, s, a).iter().zip(&v[h + 1]).map(|(p, x)| p * x).sum();
                q[h][s][a] = mdp.reward(h, s, a) + next;
            }
            let chosen = match policy {
                Some(pi) => pi.action(h, s),
                None => arg_extremum(&q[h][s], true),
            };
            v[h][s] = q[h][s][chosen];
        }
    }
    ExpectedValueTables { v, q }
}
