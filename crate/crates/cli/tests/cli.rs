use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use riskrl_core::harness::ExperimentConfig;
use serde_json::Value;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn riskrl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskrl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("RISKRL_SEED")
        .output()
        .unwrap()
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, doc: &Value) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, doc.to_string()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_writes_the_output_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = riskrl(&["run", "--config", &config("quickstart.json"), "--set", "episodes=300"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(csv.starts_with("seed,k,instant_regret,cum_regret,surrogate\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 300);
    let summary = read_json(&out.join("summary.json"));
    assert!(summary["final_cum_regret_mean"].as_f64().unwrap() > 0.0);
    assert!(summary["final_cum_regret_std"].is_number());
    assert!(summary.get("growth_exponent").is_some());

    // The resolved config round-trips.
    let resolved: ExperimentConfig =
        serde_json::from_str(&std::fs::read_to_string(out.join("resolved_config.json")).unwrap()).unwrap();
    assert_eq!(resolved.episodes, 300);
    let again: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&resolved).unwrap()).unwrap();
    assert_eq!(resolved, again);
}

#[test]
fn override_reaches_the_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = riskrl(
        &["run", "--config", &config("quickstart.json"), "--set", "agents.bonus.c=4.0", "--set", "episodes=50"],
        &out,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["agent_config"]["bonus"]["c"].as_f64(), Some(4.0));
}

#[test]
fn missing_config_exits_one_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.json");
    let o = riskrl(&["run", "--config", missing.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("nope.json"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn bad_mdp_exits_one_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = serde_json::json!({
        "mdp": {"kind": "inline", "mdp": {"H": 1, "S": 2, "A": 1, "initial_state": 0,
                 "transitions": [[[[0.5, 0.4]], [[1.0, 0.0]]]], "rewards": [[[0.0], [0.0]]]}},
        "risk": {"beta": 1.0},
        "agents": [{"algorithm": "rsq2"}]
    });
    let cfg = write_config(tmp.path(), &doc);
    let o = riskrl(&["validate", "--config", &cfg], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("h=1,s=0,a=0"), "{err}");
}

#[test]
fn solve_chain_coin_and_overflow() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = serde_json::json!({
        "mdp": {"kind": "chain", "rewards": [[0.2, 0.5], [0.3, 0.1]]},
        "betas": [-1.0, 1.0]
    });
    let cfg = write_config(tmp.path(), &doc);
    let out = tmp.path().join("chain");
    let o = riskrl(&["solve", "--config", &cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let solved = read_json(&out.join("solve.json"));
    let vs: Vec<f64> = solved["solutions"].as_array().unwrap().iter().map(|s| s["v_star_initial"].as_f64().unwrap()).collect();
    assert!((vs[0] - 0.8).abs() < 1e-12 && (vs[1] - 0.8).abs() < 1e-12, "{vs:?}");
    assert!((solved["risk_neutral_value"].as_f64().unwrap() - 0.8).abs() < 1e-12);

    let out = tmp.path().join("coin");
    let o = riskrl(&["solve", "--config", &config("solve.json")], &out);
    assert!(o.status.success());
    let solved = read_json(&out.join("solve.json"));
    let at_one = solved["solutions"].as_array().unwrap().iter().find(|s| s["beta"] == 1.0).unwrap();
    let want = ((1.0 + 1f64.exp()) / 2.0).ln();
    assert!((at_one["v_star_initial"].as_f64().unwrap() - want).abs() < 1e-12);

    let o = riskrl(&["solve", "--config", &config("solve.json"), "--set", "betas=[1.0, 20.0]"], &out);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let o = riskrl(
        &["solve", "--config", &config("solve.json"), "--set", "betas=[20.0]", "--set", "risk.beta=20.0", "--set", "risk.numeric_mode=log-space"],
        &out,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_overflow_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = riskrl(&["run", "--config", &config("quickstart.json"), "--set", "risk.beta=9.0"], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn compare_ranks_and_shares_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = serde_json::json!({
        "mdp": {"kind": "random", "S": 3, "A": 2, "H": 5, "seed": 3},
        "risk": {"beta": 1.0},
        "agents": [
            {"id": "doubly", "algorithm": "rsq2"},
            {"id": "fixed", "algorithm": "rsq2", "bonus": {"style": "fixed-multiplier"}},
            {"id": "oracle", "algorithm": "oracle-greedy"}
        ],
        "episodes": 200,
        "seeds": [4, 5]
    });
    let cfg = write_config(tmp.path(), &doc);
    let out = tmp.path().join("out");
    let o = riskrl(&["compare", "--config", &cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for id in ["doubly", "fixed", "oracle"] {
        assert!(out.join(id).join("trace.csv").exists());
        assert!(out.join(id).join("summary.json").exists());
    }
    let csv = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(csv.starts_with("agent,seed,k,"));
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 200);
    let summary = read_json(&out.join("summary.json"));
    let ranking = summary["ranking"].as_array().unwrap();
    assert_eq!(ranking[0]["agent"], "oracle");
    assert!(ranking[0]["final_cum_regret_mean"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(summary["seeds"], serde_json::json!([4, 5]));
}

#[test]
fn duplicate_agent_ids_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = serde_json::json!({
        "mdp": {"kind": "coin_flip"},
        "risk": {"beta": 1.0},
        "agents": [{"id": "a", "algorithm": "rsq2"}, {"id": "a", "algorithm": "rsvi2"}]
    });
    let cfg = write_config(tmp.path(), &doc);
    let o = riskrl(&["compare", "--config", &cfg], &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("duplicate agent id"));
}

#[test]
fn validate_accepts_bundled_configs() {
    let tmp = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let o = riskrl(&["validate", "--config", path.to_str().unwrap()], &tmp.path().join("out"));
        assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
    }
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn bundled_configs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for (cmd, name) in [("run", "quickstart.json"), ("run", "risk_averse.json"), ("compare", "bandit_hard.json"), ("solve", "solve.json")] {
        let a = tmp.path().join(format!("{name}-a"));
        let b = tmp.path().join(format!("{name}-b"));
        assert!(riskrl(&[cmd, "--config", &config(name), "--threads", "2"], &a).status.success());
        assert!(riskrl(&[cmd, "--config", &config(name)], &b).status.success());
        let (sa, sb) = (snapshot(&a), snapshot(&b));
        assert!(!sa.is_empty());
        assert_eq!(sa, sb, "{name}");
    }
}

#[test]
fn seed_env_overrides_master_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = Command::new(env!("CARGO_BIN_EXE_riskrl"))
            .args(["run", "--config", &config("quickstart.json"), "--set", "episodes=1500", "--out"])
            .arg(&out)
            .env("RISKRL_SEED", seed)
            .output()
            .unwrap();
        assert!(o.status.success());
        (read_json(&out.join("resolved_config.json")), std::fs::read(out.join("trace.csv")).unwrap())
    };
    let (cfg_a, csv_a) = run("123", "a");
    let (_, csv_b) = run("124", "b");
    assert_eq!(cfg_a["master_seed"], 123);
    assert_ne!(csv_a, csv_b);
    let o = Command::new(env!("CARGO_BIN_EXE_riskrl"))
        .args(["run", "--config", &config("quickstart.json"), "--out"])
        .arg(tmp.path().join("c"))
        .env("RISKRL_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
