use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use damarl_core::envs::{ScenarioConfig, ScenarioId};
use damarl_core::marl::{evaluate, load_actors, ConstantPolicy, EvalSummary, Policy, ScriptedChaser, Variant};

use crate::config::RunConfig;

/// Accepts a checkpoint directory, a run directory (uses
/// `checkpoints/final`) or a `checkpoints` directory (uses `final`).
pub fn checkpoint_dir(path: &Path) -> PathBuf {
    if path.join("agent_0").is_dir() {
        path.to_path_buf()
    } else if path.join("checkpoints/final").is_dir() {
        path.join("checkpoints/final")
    } else {
        path.join("final")
    }
}

/// Scenario recorded in the run that owns a checkpoint directory.
pub fn scenario_of_checkpoint(path: &Path) -> Result<ScenarioConfig> {
    for dir in path.ancestors().take(4) {
        let file = dir.join("config.toml");
        if file.is_file() {
            return Ok(RunConfig::load(&file)?.scenario);
        }
    }
    bail!(
        "no config.toml found above {}; pass --config or --scenario",
        path.display()
    )
}

pub fn load_policies(path: &Path) -> Result<Vec<Box<dyn Policy>>> {
    let dir = checkpoint_dir(path);
    let actors = load_actors::<f64>(&dir).with_context(|| format!("loading {}", dir.display()))?;
    Ok(actors.into_iter().map(|a| Box::new(a) as Box<dyn Policy>).collect())
}

/// Chasers on every predator slot; every other agent stands still.
pub fn scripted_policies(scenario: &ScenarioConfig) -> Result<Vec<Box<dyn Policy>>> {
    let env = damarl_core::envs::make_env(scenario)?;
    let chase = scenario.scenario == ScenarioId::PredatorPrey;
    Ok(env
        .action_spaces()
        .into_iter()
        .enumerate()
        .map(|(i, space)| {
            if chase && i < 3 {
                Box::new(ScriptedChaser) as Box<dyn Policy>
            } else {
                Box::new(ConstantPolicy(space.noop())) as Box<dyn Policy>
            }
        })
        .collect())
}

pub fn summary_table(s: &EvalSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "episodes  {}", s.episodes);
    for (i, (m, sd)) in s.return_mean.iter().zip(&s.return_std).enumerate() {
        let _ = writeln!(out, "agent {i}   return {m:.4} ± {sd:.4}");
    }
    let _ = writeln!(out, "touches   {:.4} ± {:.4}", s.touches_mean, s.touches_std);
    let _ = writeln!(out, "collisions {:.4}", s.collisions_mean);
    let _ = writeln!(
        out,
        "success {:.4}  crash {:.4}  stuck {:.4}",
        s.success_rate, s.crash_rate, s.stuck_rate
    );
    out
}

/// One cell of the predator-by-prey table.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CrossPlayCell {
    pub predators: Variant,
    pub prey: Variant,
    pub touches_mean: f64,
    pub touches_std: f64,
    pub episodes: usize,
}

/// Predator team from one run against the prey from another, for every
/// pair of `runs` (variant, checkpoint path). Predators are agents 0..3 and
/// the prey is agent 3 of a learned-prey predator-prey run.
pub fn cross_play(
    runs: &[(Variant, PathBuf)],
    scenario: &ScenarioConfig,
    episodes: usize,
    seed: u64,
) -> Result<Vec<CrossPlayCell>> {
    let mut cells = Vec::new();
    for (pv, pdir) in runs {
        for (qv, qdir) in runs {
            let mut predators = load_policies(pdir)?;
            let mut prey = load_policies(qdir)?;
            if predators.len() != 4 || prey.len() != 4 {
                bail!("cross-play needs four-agent predator-prey checkpoints with a learned prey");
            }
            predators.truncate(3);
            predators.push(prey.pop().expect("four policies"));
            let s = evaluate(&mut predators, scenario, episodes, seed)
                .with_context(|| format!("predators {pv} vs prey {qv}"))?;
            cells.push(CrossPlayCell {
                predators: *pv,
                prey: *qv,
                touches_mean: s.touches_mean,
                touches_std: s.touches_std,
                episodes,
            });
        }
    }
    Ok(cells)
}

pub fn cross_play_table(cells: &[CrossPlayCell]) -> String {
    let mut preys: Vec<Variant> = Vec::new();
    for c in cells {
        if !preys.contains(&c.prey) {
            preys.push(c.prey);
        }
    }
    let mut out = format!("{:<12}", "pred \\ prey");
    for q in &preys {
        let _ = write!(out, "{:>18}", q.as_str());
    }
    out.push('\n');
    for row in cells.chunks(preys.len().max(1)) {
        let _ = write!(out, "{:<12}", row[0].predators.as_str());
        for c in row {
            let _ = write!(out, "{:>18}", format!("{:.2} ± {:.2}", c.touches_mean, c.touches_std));
        }
        out.push('\n');
    }
    out
}

pub fn cross_play_csv(cells: &[CrossPlayCell]) -> String {
    let mut out = String::from("predators,prey,touches_mean,touches_std,episodes\n");
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.predators, c.prey, c.touches_mean, c.touches_std, c.episodes
        );
    }
    out
}
