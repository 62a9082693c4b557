//! Brute-force references used by the integration tests.
#![allow(dead_code)]

use riskrl_core::{DeterministicPolicy, TabularMdp};

/// `E[exp(mu * return)]` under `policy` from `(h, s)`, by walking every
/// trajectory with positive probability.
pub fn enumerate_mgf(mdp: &TabularMdp, policy: &DeterministicPolicy, mu: f64, h: usize, s: usize) -> f64 {
    let mut total = 0.0;
    walk(mdp, policy, mu, h, s, 1.0, 0.0, &mut total);
    total
}

#[allow(clippy::too_many_arguments)]
fn walk(mdp: &TabularMdp, policy: &DeterministicPolicy, mu: f64, h: usize, s: usize, prob: f64, ret: f64, total: &mut f64) {
    if h == mdp.horizon() {
        *total += prob * (mu * ret).exp();
        return;
    }
    let a = policy.action(h, s);
    let r = mdp.reward(h, s, a);
    for (next, &p) in mdp.transition_row(h, s, a).iter().enumerate() {
        if p > 0.0 {
            walk(mdp, policy, mu, h + 1, next, prob * p, ret + r, total);
        }
    }
}

/// Entropic value of `policy` at `(h, s)` by enumeration.
pub fn enumerate_value(mdp: &TabularMdp, policy: &DeterministicPolicy, beta: f64, h: usize, s: usize) -> f64 {
    enumerate_mgf(mdp, policy, beta, h, s).ln() / beta
}

/// Every deterministic Markov policy of `mdp`.
pub fn all_policies(mdp: &TabularMdp) -> Vec<DeterministicPolicy> {
    let (n_h, n_s, n_a) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let slots = n_h * n_s;
    let count = n_a.pow(slots as u32);
    (0..count)
        .map(|mut code| {
            let mut actions = vec![vec![0; n_s]; n_h];
            for slot in 0..slots {
                actions[slot / n_s][slot % n_s] = code % n_a;
                code /= n_a;
            }
            DeterministicPolicy { actions }
        })
        .collect()
}

/// Relative error with a floor of 1 on the scale.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
