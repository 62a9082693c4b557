use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riskrl_core::agents::LearningRateTable;
use riskrl_core::instances::{make_bandit_hard_instance, make_random_mdp};
use riskrl_core::oracle::{expected_optimal_values, optimal_values, NumericMode, CROSS_MODE_TOLERANCE};
use riskrl_core::{AgentSpec, Algorithm, BonusConfig, BonusStyle, RiskParams};

#[test]
fn generators_validate_over_many_seeds() {
    for seed in 0..1000 {
        let mdp = make_random_mdp(1 + (seed % 4) as usize, 1 + (seed % 3) as usize, 1 + (seed % 5) as usize, seed, 0.3)
            .unwrap();
        mdp.validate().unwrap();
        let hard = make_bandit_hard_instance(2 + (seed % 4) as usize, 3, 0.2, seed).unwrap();
        hard.validate().unwrap();
    }
}

#[test]
fn step_frequencies_follow_the_row() {
    // Pearson chi-square on 20000 draws from a 4-way row; 3 degrees of freedom,
    // 16.27 is the 0.999 quantile.
    let mdp = make_random_mdp(4, 1, 1, 3, 1.0).unwrap();
    let row = mdp.transition_row(0, 0, 0).to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 20_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[mdp.step(0, 0, 0, &mut rng).unwrap().1] += 1;
    }
    let chi2: f64 = counts
        .iter()
        .zip(&row)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&c, &p)| (c as f64 - n as f64 * p).powi(2) / (n as f64 * p))
        .sum();
    assert!(chi2 < 16.27, "chi2 = {chi2}, counts {counts:?}, row {row:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_value_increases_with_beta(seed in 0u64..10_000, b1 in -3.0f64..3.0, b2 in -3.0f64..3.0) {
        prop_assume!(b1.abs() > 1e-3 && b2.abs() > 1e-3 && (b1 - b2).abs() > 1e-6);
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        let mdp = make_random_mdp(3, 2, 3, seed, 1.0).unwrap();
        let v_lo = optimal_values(&mdp, &RiskParams::new(lo)).unwrap().initial_value(&mdp);
        let v_hi = optimal_values(&mdp, &RiskParams::new(hi)).unwrap().initial_value(&mdp);
        prop_assert!(v_lo <= v_hi + 1e-12, "{lo}: {v_lo} > {hi}: {v_hi}");
    }

    #[test]
    fn numeric_modes_agree(seed in 0u64..10_000, beta in prop::sample::select(vec![-8.0, -1.0, -0.05, 0.05, 1.0, 8.0])) {
        let mdp = make_random_mdp(4, 3, 4, seed, 0.7).unwrap();
        let d = optimal_values(&mdp, &RiskParams::new(beta)).unwrap();
        let l = optimal_values(&mdp, &RiskParams::new(beta).with_mode(NumericMode::LogSpace)).unwrap();
        for (a, b) in d.v.iter().flatten().zip(l.v.iter().flatten()) {
            prop_assert!((a - b).abs() <= CROSS_MODE_TOLERANCE * b.abs().max(1.0));
        }
    }

    #[test]
    fn small_beta_is_risk_neutral(seed in 0u64..10_000, sign in prop::bool::ANY) {
        let beta = if sign { 1e-6 } else { -1e-6 };
        let mdp = make_random_mdp(4, 3, 4, seed, 1.0).unwrap();
        let v = optimal_values(&mdp, &RiskParams::new(beta)).unwrap().initial_value(&mdp);
        let neutral = expected_optimal_values(&mdp).v[0][0];
        prop_assert!((v - neutral).abs() <= 1e-5);
    }

    #[test]
    fn act_does_not_mutate(seed in 0u64..1000, alg in prop::sample::select(vec![Algorithm::Rsvi2, Algorithm::Rsq2])) {
        let mdp = make_random_mdp(3, 3, 3, seed, 1.0).unwrap();
        let risk = RiskParams::new(0.8);
        let mut agent = AgentSpec::new(alg, BonusConfig::new(0.5, 0.1, BonusStyle::DoublyDecaying))
            .build(&mdp, &risk, 50)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in 1..=5 {
            riskrl_core::harness::run_episode(&mdp, agent.as_mut(), &mut rng, k).unwrap();
        }
        let before = serde_json::to_string(&agent.checkpoint()).unwrap();
        let first: Vec<usize> = (0..3).map(|s| agent.act(1, s)).collect();
        let second: Vec<usize> = (0..3).map(|s| agent.act(1, s)).collect();
        prop_assert_eq!(first, second);
        prop_assert_eq!(before, serde_json::to_string(&agent.checkpoint()).unwrap());
    }

    #[test]
    fn act_agrees_with_argmax_of_q(q in prop::collection::vec(0.0f64..4.0, 1..6), beta in prop::sample::select(vec![-2.0, -0.5, 0.5, 2.0])) {
        let g: Vec<f64> = q.iter().map(|x| (beta * x).exp()).collect();
        let a = riskrl_core::agents::act_on_row(&g, beta);
        let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // Equal up to the rounding of exp.
        prop_assert!(q[a] >= best - 1e-12);
    }

    #[test]
    fn learning_rate_weights(h in 1usize..12, t in 1usize..400) {
        let table = LearningRateTable::new(h);
        let w = table.weights(t);
        prop_assert_eq!(w.initial, 0.0);
        prop_assert!((w.sum() - 1.0).abs() < 1e-12);
        let sq: f64 = (1..=t).map(|i| w.get(i).powi(2)).sum();
        prop_assert!(sq <= 2.0 * h as f64 / t as f64 + 1e-12);
        let root: f64 = (1..=t).map(|i| w.get(i) / (i as f64).sqrt()).sum();
        prop_assert!(root >= 1.0 / (t as f64).sqrt() - 1e-12);
        prop_assert!(root <= 2.0 / (t as f64).sqrt() + 1e-12);
    }
}
