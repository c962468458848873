//! Reward-process equivalence checks on tabular games.
//!
//! A fixture is JSON:
//!
//! ```json
//! {
//!   "game": "game.txt",
//!   "initial_actions": [[0], []],
//!   "policies": [[[0.5, 0.5], [1.0, 0.0]], [[1.0]]]
//! }
//! ```
//!
//! `game` is a path, relative to the fixture, to a game in the plain-text
//! matrix format. `initial_actions[i]` has one action per delay step of agent
//! `i`. `policies[i]` has one row per augmented observation of agent `i`
//! (base observation most significant, then pending actions oldest first).

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use damarl_core::game::{random_instance, text, verify_theorem1, DelaySpec, PolicyTable, RandomLimits, Theorem1Report};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub game: PathBuf,
    pub initial_actions: Vec<Vec<usize>>,
    pub policies: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifySummary {
    pub instances: usize,
    pub failures: usize,
    pub max_kernel_diff: f64,
    pub max_reward_diff: f64,
    pub max_initial_diff: f64,
    pub max_augmented_states: usize,
}

impl VerifySummary {
    pub fn add(&mut self, r: &Theorem1Report) {
        self.instances += 1;
        self.failures += usize::from(!r.pass);
        self.max_kernel_diff = self.max_kernel_diff.max(r.max_kernel_diff);
        self.max_reward_diff = self.max_reward_diff.max(r.max_reward_diff);
        self.max_initial_diff = self.max_initial_diff.max(r.max_initial_diff);
        self.max_augmented_states = self.max_augmented_states.max(r.augmented_states);
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn worst(&self) -> f64 {
        self.max_kernel_diff.max(self.max_reward_diff).max(self.max_initial_diff)
    }

    pub fn report(&self) -> String {
        format!(
            "{} instances, {} failed; worst kernel diff {:e}, reward diff {:e}, initial diff {:e}; \
             largest augmented space {}",
            self.instances,
            self.failures,
            self.max_kernel_diff,
            self.max_reward_diff,
            self.max_initial_diff,
            self.max_augmented_states
        )
    }
}

/// Checks `count` random instances drawn from `seed` within the default
/// limits (at most 4 states, 2 agents, 3 actions each, delay 2).
pub fn verify_random(count: usize, seed: u64, tol: f64) -> Result<VerifySummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = VerifySummary::default();
    for i in 0..count {
        let inst = random_instance::<f64, _>(&mut rng, RandomLimits::default());
        let r = verify_theorem1(&inst.game, &inst.policies, &inst.delays, tol)
            .with_context(|| format!("instance {i}"))?;
        summary.add(&r);
    }
    Ok(summary)
}

pub fn verify_fixture(path: &Path, tol: f64) -> Result<VerifySummary> {
    let fixture: Fixture = serde_json::from_str(
        &std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
    )
    .with_context(|| format!("parsing {}", path.display()))?;
    let game_path = path.parent().unwrap_or(Path::new(".")).join(&fixture.game);
    let game = text::parse_game::<f64>(
        &std::fs::read_to_string(&game_path).with_context(|| format!("reading {}", game_path.display()))?,
    )
    .with_context(|| format!("parsing {}", game_path.display()))?;
    let steps: Vec<usize> = fixture.initial_actions.iter().map(Vec::len).collect();
    let delays = DelaySpec::new(&steps, fixture.initial_actions.clone())?;
    let policies = fixture
        .policies
        .iter()
        .map(|rows| {
            let actions = rows.first().map_or(0, Vec::len);
            PolicyTable::new(actions, rows.iter().flatten().copied().collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut summary = VerifySummary::default();
    summary.add(&verify_theorem1(&game, &policies, &delays, tol)?);
    Ok(summary)
}
