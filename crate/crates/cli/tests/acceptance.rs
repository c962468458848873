//! Acceptance criteria, one test each. Every test writes a single
//! `[PASS]` / `[FAIL]` line to stderr (bypassing libtest's capture) before
//! asserting. The training-scale reproductions are `#[ignore]`d; run them
//! with `cargo test --release -p damarl-cli --test acceptance -- --ignored`.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use damarl_core::envs::{make_env, ActionSpace, MultiAgentEnv, ScenarioConfig, ScenarioId};
use damarl_core::game::{random_instance, verify_theorem1, DelayedEnv, DelaySpec, RandomLimits};
use damarl_core::marl::{
    actor_update, critic_update, evaluate, gumbel_softmax, load_actors, soft_update_targets, softmax, train, Batch,
    Policy, Trainer, TrainerConfig, Variant,
};
use damarl_core::nn::{grad_check_with, soft_update, Mlp, MlpSpec, OptimizerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn report(name: &str, pass: bool, detail: &str) {
    let line = format!("[{}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

#[test]
fn reward_process_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut failures, mut largest) = (0.0f64, 0, 0);
    for _ in 0..500 {
        let inst = random_instance::<f64, _>(&mut rng, RandomLimits::default());
        let r = verify_theorem1(&inst.game, &inst.policies, &inst.delays, 1e-10).unwrap();
        worst = worst.max(r.max_kernel_diff).max(r.max_reward_diff).max(r.max_initial_diff);
        failures += usize::from(!r.pass);
        largest = largest.max(r.augmented_states);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures == 0 && worst <= 1e-10 && secs < 30.0;
    report(
        "reward-process equivalence",
        pass,
        &format!("500 instances, {failures} failed, worst diff {worst:e} (tol 1e-10), largest space {largest}, {secs:.2}s"),
    );
    assert!(pass);
}

#[test]
fn gradient_fidelity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_param = 0.0f64;
    let mut worst_input = 0.0f64;
    let mut one_sided = 0;
    for n in 0..200 {
        let critic = n % 2 == 1;
        let input = rng.random_range(2..=40);
        let spec = if critic {
            MlpSpec::critic(input)
        } else {
            let movement = rng.random_range(0..=2);
            let logits = rng.random_range(usize::from(movement == 0)..=5);
            MlpSpec::actor(input, movement, logits)
        };
        let net = Mlp::<f64>::new(&spec, &mut rng).unwrap();
        let x: Vec<f64> = (0..input).map(|_| rng.random_range(-1.0..1.0)).collect();
        let up: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = grad_check_with(&net, &x, &up, 1e-6, true).unwrap();
        worst_param = worst_param.max(r.max_param_error);
        worst_input = worst_input.max(r.max_input_error.unwrap());
        one_sided += r.one_sided;
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_param < 1e-4 && worst_input < 1e-4 && secs < 60.0;
    report(
        "gradient fidelity",
        pass,
        &format!(
            "100 actors + 100 critics, worst parameter error {worst_param:e}, worst input error {worst_input:e} \
             (tol 1e-4), {one_sided} one-sided probes at kinks, {secs:.2}s"
        ),
    );
    assert!(pass);
}

fn random_action(space: &ActionSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..space.dim())
        .map(|c| if c < space.movement { rng.random_range(-1.0..1.0) } else { rng.random::<f64>() })
        .collect()
}

#[test]
fn buffer_causality() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let scenarios = [ScenarioId::CoopComm, ScenarioId::CoopNav, ScenarioId::PredatorPrey, ScenarioId::Intersection];
    let (mut checked, mut mismatches) = (0usize, 0usize);
    for episode in 0..1000 {
        let env = make_env(&ScenarioConfig::new(scenarios[episode % 4])).unwrap();
        let spaces = env.action_spaces();
        let n = env.num_agents();
        let k: Vec<usize> = (0..n).map(|_| rng.random_range(0..=5)).collect();
        let initial: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|i| (0..k[i]).map(|_| random_action(&spaces[i], &mut rng)).collect())
            .collect();
        let mut denv = DelayedEnv::with_spec(env, DelaySpec::new(&k, initial.clone()).unwrap()).unwrap();
        denv.reset(rng.random());
        let mut history: Vec<Vec<Vec<f64>>> = Vec::new();
        for t in 0.. {
            let chosen: Vec<Vec<f64>> = spaces.iter().map(|s| random_action(s, &mut rng)).collect();
            history.push(chosen.clone());
            let out = denv.step(&chosen).unwrap();
            for i in 0..n {
                let expected = if t < k[i] { &initial[i][t] } else { &history[t - k[i]][i] };
                let same = expected.len() == out.executed[i].len()
                    && expected.iter().zip(&out.executed[i]).all(|(a, b)| a.to_bits() == b.to_bits());
                checked += 1;
                mismatches += usize::from(!same);
            }
            if out.done {
                break;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = mismatches == 0 && secs < 10.0;
    report(
        "buffer causality",
        pass,
        &format!("1000 episodes, {checked} executed actions checked bit-for-bit, {mismatches} mismatches, {secs:.2}s"),
    );
    assert!(pass);
}

#[test]
fn zero_delay_collapse() {
    let start = Instant::now();
    let mut identical = true;
    for scenario in [ScenarioId::CoopComm, ScenarioId::CoopNav, ScenarioId::PredatorPrey] {
        let build = |variant| {
            let cfg = TrainerConfig {
                variant,
                episodes: 2,
                batch_size: 64,
                warmup: 10_000,
                buffer_capacity: 10_000,
                seed: 17,
                optimizer: OptimizerKind::default(),
                ..Default::default()
            };
            let mut t = Trainer::<f64>::new(cfg, &ScenarioConfig::new(scenario)).unwrap();
            t.run_episode().unwrap();
            t
        };
        let (mut ma, mut dama) = (build(Variant::Ma), build(Variant::Dama));
        let batch = Batch::from_transitions(&ma.replay().iter().collect::<Vec<_>>()).unwrap();
        let batch_d = Batch::from_transitions(&dama.replay().iter().collect::<Vec<_>>()).unwrap();
        identical &= batch == batch_d;
        let (mut ra, mut rd) = (ChaCha8Rng::seed_from_u64(1), ChaCha8Rng::seed_from_u64(1));
        for _ in 0..3 {
            let la = critic_update(ma.learners_mut(), &batch, 0.99, 0.5, &mut ra).unwrap();
            let ld = critic_update(dama.learners_mut(), &batch, 0.99, 0.5, &mut rd).unwrap();
            let ga = actor_update(ma.learners_mut(), &batch, 0.5, &mut ra).unwrap();
            let gd = actor_update(dama.learners_mut(), &batch, 0.5, &mut rd).unwrap();
            soft_update_targets(ma.learners_mut(), 0.01).unwrap();
            soft_update_targets(dama.learners_mut(), 0.01).unwrap();
            identical &= la == ld && ga == gd;
        }
        for (a, d) in ma.learners().iter().zip(dama.learners()) {
            identical &= a.actor == d.actor
                && a.critic == d.critic
                && a.target_actor == d.target_actor
                && a.target_critic == d.target_critic;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = identical && secs < 5.0;
    report(
        "zero-delay collapse",
        pass,
        &format!("dama vs ma with k = 0, three update rounds on three scenarios, identical = {identical}, {secs:.2}s"),
    );
    assert!(pass);
}

#[test]
fn soft_update_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let source = Mlp::<f64>::new(&MlpSpec::critic(12), &mut rng).unwrap();
    let target0 = Mlp::<f64>::new(&MlpSpec::critic(12), &mut rng).unwrap();
    let mut exact = true;
    for kappa in [0.0, 0.01, 1.0] {
        let mut target = target0.clone();
        soft_update(&mut target, &source, kappa).unwrap();
        for ((&got, &s), &t) in target.params().zip(source.params()).zip(target0.params()) {
            let want = kappa * s + (1.0 - kappa) * t;
            exact &= got.to_bits() == want.to_bits();
        }
        exact &= kappa != 0.0 || target == target0;
        exact &= kappa != 1.0 || target == source;
    }
    report("soft update exactness", exact, "kappa in {0, 0.01, 1}, every parameter bit-identical to the formula");
    assert!(exact);
}

#[test]
fn gumbel_softmax_distribution() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let k = rng.random_range(2..=6);
        let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p = softmax(&logits);
        let mut counts = vec![0usize; k];
        for _ in 0..100_000 {
            let y = gumbel_softmax(&logits, 1.0, &mut rng).unwrap();
            let best = (0..k).fold(0, |b, i| if y[i] > y[b] { i } else { b });
            counts[best] += 1;
        }
        let tv = 0.5 * counts.iter().zip(&p).map(|(&c, &q)| (c as f64 / 1e5 - q).abs()).sum::<f64>();
        worst = worst.max(tv);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 0.01 && secs < 10.0;
    report(
        "Gumbel-Softmax distribution",
        pass,
        &format!("10 logit vectors x 1e5 samples, worst total variation {worst:.5} (tol 0.01), {secs:.2}s"),
    );
    assert!(pass);
}

#[test]
fn determinism() {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("det.toml");
    // long enough that the full-size update (B = 1024) runs for several episodes
    std::fs::write(
        &config,
        "[scenario]\nscenario = \"coop_nav\"\ndelay_steps = [1]\n[trainer]\nvariant = \"dama\"\nepisodes = 45\n",
    )
    .unwrap();
    let run = |out: &Path| {
        let o = Command::new(env!("CARGO_BIN_EXE_damarl"))
            .args(["train", "--config", config.to_str().unwrap(), "--seeds", "7", "--log-every", "0", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("coop_nav_dama_k1/seed_7/metrics.jsonl")).unwrap()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    let updates: usize = String::from_utf8_lossy(&a)
        .lines()
        .skip(1)
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["updates"].as_u64().unwrap() as usize)
        .sum();
    let secs = start.elapsed().as_secs_f64();
    let pass = a == b && updates > 0 && secs < 300.0;
    report(
        "determinism",
        pass,
        &format!(
            "two same-seed train commands, metrics streams of {} bytes identical = {}, {updates} update rounds, {secs:.1}s",
            a.len(),
            a == b
        ),
    );
    assert!(pass);
}

fn final_mean_return(dir: &Path, last: usize) -> f64 {
    let text = std::fs::read_to_string(dir.join("metrics.jsonl")).unwrap();
    let returns: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            let r: Vec<f64> = v["returns"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
            r.iter().sum::<f64>() / r.len() as f64
        })
        .collect();
    let tail = &returns[returns.len().saturating_sub(last)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn train_to(out: &Path, scenario: &ScenarioConfig, variant: Variant, episodes: usize, seed: u64) -> std::path::PathBuf {
    let dir = out.join(format!("{}_{variant}_seed{seed}", scenario.scenario));
    let cfg = TrainerConfig {
        variant,
        episodes,
        seed,
        ..Default::default()
    };
    train::<f32>(&cfg, scenario, &dir, |_| {}).unwrap();
    dir
}

#[test]
#[ignore = "about 5 h per run on one core; 10 runs"]
fn learning_curve_direction() {
    let out = TempDir::new().unwrap();
    let scenario = ScenarioConfig {
        dt: Some(0.2),
        delay_steps: vec![1],
        ..ScenarioConfig::new(ScenarioId::CoopNav)
    };
    let mut wins = 0;
    let mut detail = Vec::new();
    for seed in 0..5 {
        let dama = final_mean_return(&train_to(out.path(), &scenario, Variant::Dama, 10_000, seed), 1000);
        let ma = final_mean_return(&train_to(out.path(), &scenario, Variant::Ma, 10_000, seed), 1000);
        wins += usize::from(dama > ma);
        detail.push(format!("seed {seed}: dama {dama:.2} vs ma {ma:.2}"));
    }
    let pass = wins >= 4;
    report(
        "cooperative navigation, k = 1: DAMA beats MA over the final 1000 episodes",
        pass,
        &format!("{wins}/5 seeds ({})", detail.join("; ")),
    );
    assert!(pass);
}

const INTERSECTION_EPISODES: usize = 2000;

#[test]
#[ignore = "about 4 h per run on one core; 10 runs"]
fn intersection_outcome_direction() {
    let out = TempDir::new().unwrap();
    let base = ScenarioConfig::new(ScenarioId::Intersection);
    let scenario = ScenarioConfig {
        delay_steps: vec![damarl_cli::config::delay_steps(0.8, base.dt()).unwrap()],
        ..base
    };
    let mut rates = Vec::new();
    for variant in [Variant::Dama, Variant::Ma] {
        let (mut success, mut crash, mut episodes) = (0.0, 0.0, 0);
        for seed in 0..5 {
            let dir = train_to(out.path(), &scenario, variant, INTERSECTION_EPISODES, seed);
            let mut policies: Vec<Box<dyn Policy>> = load_actors::<f64>(&dir.join("checkpoints/final"))
                .unwrap()
                .into_iter()
                .map(|p| Box::new(p) as Box<dyn Policy>)
                .collect();
            // 200 evaluation episodes in total, 40 per seed
            let s = evaluate(&mut policies, &scenario, 40, 1_000 + seed).unwrap();
            success += s.success_rate * 40.0;
            crash += s.crash_rate * 40.0;
            episodes += 40;
        }
        rates.push((success / episodes as f64, crash / episodes as f64));
    }
    let (dama, ma) = (rates[0], rates[1]);
    let pass = dama.0 > ma.0 && dama.1 < ma.1;
    report(
        "intersection, 0.8 s delay: DAMA success above and crash below MA",
        pass,
        &format!(
            "success dama {:.3} vs ma {:.3}; crash dama {:.3} vs ma {:.3}; ma success below 0.4: {}",
            dama.0,
            ma.0,
            dama.1,
            ma.1,
            ma.0 < 0.4
        ),
    );
    assert!(pass);
}

const SENSITIVITY_EPISODES: usize = 5000;
const SENSITIVITY_SEEDS: u64 = 3;

fn non_increasing_with_one_inversion(ys: &[f64]) -> bool {
    ys.windows(2).filter(|w| w[1] > w[0]).count() <= 1
}

#[test]
#[ignore = "24 runs of several hours each on one core"]
fn delay_sensitivity_shape() {
    let out = TempDir::new().unwrap();
    let ks = [0usize, 2, 4, 8];
    let mut curves = Vec::new();
    for variant in [Variant::Dama, Variant::Ma] {
        let mut ys = Vec::new();
        for &k in &ks {
            let scenario = ScenarioConfig {
                delay_steps: vec![k],
                ..ScenarioConfig::new(ScenarioId::CoopComm)
            };
            let vals: Vec<f64> = (0..SENSITIVITY_SEEDS)
                .map(|seed| {
                    let dir = out.path().join(format!("k{k}"));
                    final_mean_return(&train_to(&dir, &scenario, variant, SENSITIVITY_EPISODES, seed), 1000)
                })
                .collect();
            ys.push(vals.iter().sum::<f64>() / vals.len() as f64);
        }
        curves.push(ys);
    }
    let (dama, ma) = (&curves[0], &curves[1]);
    let gap2 = dama[1] - ma[1];
    let gap8 = dama[3] - ma[3];
    let pass = non_increasing_with_one_inversion(dama) && non_increasing_with_one_inversion(ma) && gap8 > gap2;
    report(
        "cooperative communication delay sweep shape",
        pass,
        &format!("k = {ks:?}: dama {dama:.2?}, ma {ma:.2?}; gap at k=2 {gap2:.2}, at k=8 {gap8:.2}"),
    );
    assert!(pass);
}
