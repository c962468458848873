use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use damarl_core::marl::{train, EpisodeRecord};

use crate::config::{Precision, RunConfig};

/// Directory of one seed's run.
pub fn run_dir(out: &Path, config: &RunConfig, seed: u64) -> PathBuf {
    out.join(config.group_name()).join(format!("seed_{seed}"))
}

/// Trains one seed of a resolved config into its run directory, writing the
/// single-seed config snapshot first.
pub fn train_seed(config: &RunConfig, seed: u64, out: &Path, log_every: usize) -> Result<PathBuf> {
    let dir = run_dir(out, config, seed);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let snapshot = config.for_seed(seed);
    std::fs::write(dir.join("config.toml"), snapshot.to_toml()?)?;
    let episodes = snapshot.trainer.episodes;
    let progress = |r: &EpisodeRecord| {
        if log_every > 0 && ((r.episode + 1).is_multiple_of(log_every) || r.episode + 1 == episodes) {
            let mean = r.returns.iter().sum::<f64>() / r.returns.len().max(1) as f64;
            eprintln!(
                "{} seed {seed}: episode {}/{episodes}, mean return {mean:.3}",
                config.group_name(),
                r.episode + 1
            );
        }
    };
    let result = match snapshot.run.precision {
        Precision::F32 => train::<f32>(&snapshot.trainer, &snapshot.scenario, &dir, progress),
        Precision::F64 => train::<f64>(&snapshot.trainer, &snapshot.scenario, &dir, progress),
    };
    result.with_context(|| format!("training {}", dir.display()))?;
    Ok(dir)
}

/// Trains every seed of a resolved config, up to `jobs` at a time. Each run
/// is independent and internally sequential.
pub fn train_all(config: &RunConfig, out: &Path, jobs: usize, log_every: usize) -> Result<Vec<PathBuf>> {
    let seeds = &config.run.seeds;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<PathBuf>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, seeds.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&seed) = seeds.get(i) else { break };
                let r = train_seed(config, seed, out, log_every);
                results.lock().expect("no worker panicked").push((i, r));
            });
        }
    });
    let mut results = results.into_inner().expect("no worker panicked");
    results.sort_by_key(|(i, _)| *i);
    results.into_iter().map(|(_, r)| r).collect()
}
