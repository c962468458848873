use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use damarl_cli::config::RunConfig;
use damarl_core::envs::{PreyMode, ScenarioConfig, ScenarioId};
use damarl_core::marl::{evaluate, Policy, ScriptedChaser};
use tempfile::TempDir;

fn damarl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_damarl"))
        .args(args)
        .env_remove("DAMARL_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn short_config(dir: &Path, scenario: &str, extra_scenario: &str, variant: &str, episodes: usize) -> PathBuf {
    write_config(
        dir,
        &format!("{scenario}_{variant}.toml"),
        &format!(
            "[run]\nprecision = \"f64\"\n\n[scenario]\nscenario = \"{scenario}\"\nepisode_length = 6\n{extra_scenario}\n\
             [trainer]\nvariant = \"{variant}\"\nepisodes = {episodes}\nbatch_size = 4\nwarmup = 8\nbuffer_capacity = 64\n"
        ),
    )
}

#[test]
fn verify_random_instances_pass() {
    let o = damarl(&["verify", "--instances", "200", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("200 instances, 0 failed"), "{text}");
    assert!(text.contains("PASS"));
}

const TWO_AGENT_GAME: &str = "\
2 2 2 2
0.6 0.4
0.9 0.1
0.5 0.5
0.2 0.8
1.0 0.0
0.3 0.7
0.0 1.0
0.4 0.6
0.25 0.75
1.0 -1.0
0.5 0.0
0.0 2.0
-0.5 1.5
0 1
0 0
";

#[test]
fn verify_fixture_without_delay_is_exact() {
    let dir = TempDir::new().unwrap();
    write_config(dir.path(), "game.txt", TWO_AGENT_GAME);
    let fixture = write_config(
        dir.path(),
        "fixture.json",
        r#"{"game": "game.txt", "initial_actions": [[], []],
            "policies": [[[0.3, 0.7], [0.9, 0.1]], [[0.5, 0.5]]]}"#,
    );
    let o = damarl(&["verify", "--fixture", fixture.to_str().unwrap()]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("worst kernel diff 0e0, reward diff 0e0, initial diff 0e0"), "{}", stdout(&o));

    let delayed = write_config(
        dir.path(),
        "delayed.json",
        r#"{"game": "game.txt", "initial_actions": [[1], []],
            "policies": [[[0.3, 0.7], [0.9, 0.1], [0.2, 0.8], [0.6, 0.4]], [[0.5, 0.5]]]}"#,
    );
    let o = damarl(&["verify", "--fixture", delayed.to_str().unwrap()]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn corrupted_fixture_fails() {
    let dir = TempDir::new().unwrap();
    // second transition row sums to 1.1
    write_config(dir.path(), "game.txt", &TWO_AGENT_GAME.replace("0.5 0.5\n0.2", "0.5 0.6\n0.2"));
    let fixture = write_config(
        dir.path(),
        "fixture.json",
        r#"{"game": "game.txt", "initial_actions": [[], []],
            "policies": [[[0.3, 0.7], [0.9, 0.1]], [[0.5, 0.5]]]}"#,
    );
    let o = damarl(&["verify", "--fixture", fixture.to_str().unwrap()]);
    assert!(!o.status.success());
    let bad_policy = write_config(
        dir.path(),
        "policy.json",
        r#"{"game": "game.txt", "initial_actions": [[], []],
            "policies": [[[0.3, 0.6], [0.9, 0.1]], [[0.5, 0.5]]]}"#,
    );
    write_config(dir.path(), "game.txt", TWO_AGENT_GAME);
    let o = damarl(&["verify", "--fixture", bad_policy.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn verify_size_cap_is_an_error() {
    let dir = TempDir::new().unwrap();
    // 2 states x 2^17 pending sequences exceeds the enumeration cap
    write_config(dir.path(), "game.txt", TWO_AGENT_GAME);
    let seq = vec!["0"; 17].join(",");
    let fixture = write_config(
        dir.path(),
        "big.json",
        &format!(r#"{{"game": "game.txt", "initial_actions": [[{seq}], []], "policies": [[[1.0, 0.0]], [[1.0]]]}}"#),
    );
    let o = damarl(&["verify", "--fixture", fixture.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("exceeds enumeration cap"), "{}", stderr(&o));
}

#[test]
fn delay_seconds_become_steps() {
    let out = TempDir::new().unwrap();
    let o_ = out.path().to_str().unwrap();
    let o = damarl(&["train", "--scenario", "coop_nav", "--delay-seconds", "0.2", "--dt", "0.2", "--dry-run", "--out", o_]);
    assert!(o.status.success(), "{}", stderr(&o));
    let c = RunConfig::load(&out.path().join("coop_nav_dama_k1/config.toml")).unwrap();
    assert_eq!(c.scenario.delay_steps, vec![1; 3]);

    let o = damarl(&["train", "--scenario", "intersection", "--delay-seconds", "0.8", "--variant", "ma", "--dry-run", "--out", o_]);
    assert!(o.status.success(), "{}", stderr(&o));
    let c = RunConfig::load(&out.path().join("intersection_ma_k8/config.toml")).unwrap();
    assert_eq!(c.scenario.delay_steps, vec![8; 4]);
    assert_eq!(c.scenario.dt, Some(0.1));

    let o = damarl(&["train", "--scenario", "coop_nav", "--delay-seconds", "0.15", "--dt", "0.1", "--out", o_]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("integer number of simulation steps"), "{}", stderr(&o));
}

#[test]
fn config_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[scenario]\nscenario = \"coop_nav\"\n[trainer]\nkappa = 2.0\n");
    let o = damarl(&["train", "--config", cfg.to_str().unwrap(), "--dry-run", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("kappa"), "{}", stderr(&o));
    let o = damarl(&["train", "--scenario", "coop_nav", "--seeds", "", "--dry-run"]);
    assert!(!o.status.success());
}

#[test]
fn resolved_config_round_trips_byte_identically() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    let o = damarl(&[
        "train", "--scenario", "predator_prey", "--delay-seconds", "0.2", "--variant", "da", "--seeds", "3,4", "--dry-run",
        "--out", first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let snapshot = first.join("predator_prey_da_k1/config.toml");
    let text = std::fs::read_to_string(&snapshot).unwrap();
    let o = damarl(&["train", "--config", snapshot.to_str().unwrap(), "--dry-run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&snapshot).unwrap(), text);
    let again = RunConfig::from_toml(&text).unwrap().resolve().unwrap().to_toml().unwrap();
    assert_eq!(again, text);
}

#[test]
fn output_root_from_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_damarl"))
        .args(["train", "--scenario", "coop_nav", "--dry-run"])
        .env("DAMARL_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("coop_nav_dama_k0/config.toml").is_file());
}

fn train_short(config: &Path, out: &Path, seeds: &str) {
    let o = damarl(&[
        "train", "--config", config.to_str().unwrap(), "--seeds", seeds, "--out", out.to_str().unwrap(), "--log-every", "0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn parse_csv(text: &str) -> Vec<(String, String, f64, f64, usize)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].into(), f[1].into(), f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect()
}

#[test]
fn curves_aggregate_seeds() {
    let dir = TempDir::new().unwrap();
    let cfg = short_config(dir.path(), "coop_nav", "delay_steps = [1]", "dama", 4);
    let out = dir.path().join("runs");
    train_short(&cfg, &out, "0,1,2");
    let o = damarl(&["export-plots", out.to_str().unwrap(), "--kind", "curves"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.0 == "coop_nav_dama_k1" && r.4 == 3));

    // recompute from the raw streams
    for (e, row) in rows.iter().enumerate() {
        let ys: Vec<f64> = (0..3)
            .map(|s| {
                let text = std::fs::read_to_string(out.join(format!("coop_nav_dama_k1/seed_{s}/metrics.jsonl"))).unwrap();
                let line: serde_json::Value = serde_json::from_str(text.lines().nth(e + 1).unwrap()).unwrap();
                let r: Vec<f64> = line["returns"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
                r.iter().sum::<f64>() / r.len() as f64
            })
            .collect();
        let mean = ys.iter().sum::<f64>() / 3.0;
        let std = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((row.2 - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        assert!((row.3 - std).abs() <= 1e-12 * std.abs().max(1.0));
    }

    let single = damarl(&["export-plots", out.join("coop_nav_dama_k1/seed_2").to_str().unwrap()]);
    let rows = parse_csv(&stdout(&single));
    assert!(rows.iter().all(|r| r.3 == 0.0 && r.4 == 1));
}

#[test]
fn delay_sweep_has_a_point_per_delay() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("runs");
    for variant in ["ma", "dama"] {
        for k in 0..=10 {
            let cfg = short_config(dir.path(), "coop_comm", &format!("delay_steps = [{k}]"), variant, 1);
            train_short(&cfg, &out, "0");
        }
    }
    let o = damarl(&["export-plots", out.to_str().unwrap(), "--kind", "delay", "--last", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = parse_csv(&stdout(&o));
    for variant in ["coop_comm_ma", "coop_comm_dama"] {
        let xs: Vec<usize> = rows.iter().filter(|r| r.0 == variant).map(|r| r.1.parse().unwrap()).collect();
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..=10).collect::<Vec<_>>(), "{variant}");
    }
}

#[test]
fn missing_metrics_names_the_run() {
    let dir = TempDir::new().unwrap();
    let run = dir.path().join("g/seed_0");
    std::fs::create_dir_all(&run).unwrap();
    let o = damarl(&["export-plots", dir.path().join("g").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("seed_0") && stderr(&o).contains("missing metrics file"), "{}", stderr(&o));
}

#[test]
fn outcome_export_sums_to_one_for_intersection() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "ix.toml",
        "[run]\nprecision = \"f64\"\n[scenario]\nscenario = \"intersection\"\nepisode_length = 20\ndelay_steps = [2]\n\
         [trainer]\nvariant = \"dama\"\nepisodes = 3\nbatch_size = 4\nwarmup = 1000\nbuffer_capacity = 1000\n",
    );
    let out = dir.path().join("runs");
    train_short(&cfg, &out, "0,1");
    let o = damarl(&["export-plots", out.to_str().unwrap(), "--kind", "outcomes", "--last", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 3);
    let total: f64 = rows.iter().map(|r| r.2).sum();
    assert!((total - 1.0).abs() < 1e-12, "{rows:?}");
}

#[test]
fn cross_play_grid_is_four_by_four() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("runs");
    let mut entries = Vec::new();
    for v in ["ddpg", "ma", "da", "dama"] {
        let cfg = short_config(dir.path(), "predator_prey", "prey = \"learned\"\ndelay_steps = [1]", v, 2);
        train_short(&cfg, &out, "0");
        entries.push(format!("{v}={}", out.join(format!("predator_prey_{v}_k1/seed_0")).display()));
    }
    let csv = dir.path().join("grid.csv");
    let mut args = vec!["eval", "--episodes", "2", "--out", csv.to_str().unwrap()];
    for e in &entries {
        args.push("--run");
        args.push(e);
    }
    let o = damarl(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert_eq!(table.lines().count(), 5, "{table}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 17);
}

#[test]
fn scripted_eval_matches_library_rollout() {
    let dir = TempDir::new().unwrap();
    let summary = dir.path().join("s.json");
    let cfg = write_config(dir.path(), "pp.toml", "[scenario]\nscenario = \"predator_prey\"\nprey = \"learned\"\n");
    let o = damarl(&[
        "eval", "--scripted", "--config", cfg.to_str().unwrap(), "--episodes", "4", "--seed", "2", "--out",
        summary.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let got: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();

    let scenario = ScenarioConfig {
        prey: PreyMode::Learned,
        ..ScenarioConfig::new(ScenarioId::PredatorPrey)
    };
    let mut policies: Vec<Box<dyn Policy>> = (0..3).map(|_| Box::new(ScriptedChaser) as Box<dyn Policy>).collect();
    policies.push(Box::new(damarl_core::marl::ConstantPolicy(vec![0.0, 0.0])));
    let want = evaluate(&mut policies, &scenario, 4, 2).unwrap();
    let touches: Vec<usize> = got["touches"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
    assert_eq!(touches, want.touches);
    assert_eq!(got["touches_mean"].as_f64().unwrap(), want.touches_mean);
}

#[test]
fn zero_episode_eval_is_empty() {
    let o = damarl(&["eval", "--scripted", "--scenario", "coop_nav", "--episodes", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("episodes  0"));
}
