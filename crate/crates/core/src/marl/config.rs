use serde::{Deserialize, Serialize};

use crate::nn::OptimizerKind;

use super::{MarlError, Result};

/// The four trainers: critic scope (own vs all agents) crossed with whether
/// actors and critics see the pending-action part of observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Decentralized critic, delay-unaware.
    Ddpg,
    /// Centralized critic, delay-unaware.
    Ma,
    /// Decentralized critic, delay-aware.
    Da,
    /// Centralized critic, delay-aware.
    Dama,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Ddpg, Variant::Ma, Variant::Da, Variant::Dama];

    pub fn delay_aware(self) -> bool {
        matches!(self, Self::Da | Self::Dama)
    }

    pub fn centralized(self) -> bool {
        matches!(self, Self::Ma | Self::Dama)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ddpg => "ddpg",
            Self::Ma => "ma",
            Self::Da => "da",
            Self::Dama => "dama",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = MarlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpg" => Ok(Self::Ddpg),
            "ma" => Ok(Self::Ma),
            "da" => Ok(Self::Da),
            "dama" => Ok(Self::Dama),
            other => Err(MarlError::Config(format!(
                "unknown variant {other:?} (expected ddpg, ma, da or dama)"
            ))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gaussian exploration scale, annealed linearly from `start` to `end` over
/// the first `fraction` of the episodes and held at `end` afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSchedule {
    pub start: f64,
    pub end: f64,
    pub fraction: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            start: 0.3,
            end: 0.05,
            fraction: 0.6,
        }
    }
}

impl NoiseSchedule {
    pub fn scale(&self, episode: usize, episodes: usize) -> f64 {
        let horizon = self.fraction * episodes as f64;
        if horizon <= 0.0 {
            return self.end;
        }
        let progress = (episode as f64 / horizon).min(1.0);
        self.start + (self.end - self.start) * progress
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub variant: Variant,
    /// Per-agent override of `variant`, e.g. predators and prey trained by
    /// different algorithms.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent_variants: Option<Vec<Variant>>,
    pub episodes: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Stored transitions required before the first update.
    pub warmup: usize,
    /// Environment steps between update rounds.
    pub update_every: usize,
    pub noise: NoiseSchedule,
    pub gumbel_temperature: f64,
    pub clip_norm: f64,
    pub optimizer: OptimizerKind,
    /// Episodes between checkpoints; 0 saves only the final one.
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Dama,
            agent_variants: None,
            episodes: 10_000,
            learning_rate: 0.01,
            gamma: 0.99,
            kappa: 0.01,
            batch_size: 1024,
            buffer_capacity: 1_000_000,
            warmup: 1024,
            update_every: 1,
            noise: NoiseSchedule::default(),
            gumbel_temperature: 1.0,
            clip_norm: 0.5,
            optimizer: OptimizerKind::default(),
            checkpoint_every: 0,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(MarlError::Config(format!("{field}: {why}")));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma", format!("{} not in (0, 1)", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return bad("kappa", format!("{} not in [0, 1]", self.kappa));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", format!("{} must be positive", self.learning_rate));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return bad(
                "batch_size",
                format!("{} must be in 1..={} (buffer_capacity)", self.batch_size, self.buffer_capacity),
            );
        }
        if self.update_every == 0 {
            return bad("update_every", "must be at least 1".into());
        }
        if !(self.gumbel_temperature > 0.0) {
            return bad("gumbel_temperature", format!("{} must be positive", self.gumbel_temperature));
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm", format!("{} must be positive", self.clip_norm));
        }
        let n = &self.noise;
        if !(n.start >= 0.0 && n.end >= 0.0 && (0.0..=1.0).contains(&n.fraction)) {
            return bad("noise", format!("{n:?} needs non-negative scales and fraction in [0, 1]"));
        }
        Ok(())
    }

    /// Variant of each of `num_agents` agents.
    pub fn variants_for(&self, num_agents: usize) -> Result<Vec<Variant>> {
        match &self.agent_variants {
            None => Ok(vec![self.variant; num_agents]),
            Some(v) if v.len() == num_agents => Ok(v.clone()),
            Some(v) => Err(MarlError::Config(format!(
                "agent_variants lists {} agents, scenario has {num_agents}",
                v.len()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_hyperparameter_table() {
        let c = TrainerConfig::default();
        assert_eq!(c.learning_rate, 0.01);
        assert_eq!(c.gamma, 0.99);
        assert_eq!(c.kappa, 0.01);
        assert_eq!(c.buffer_capacity, 1_000_000);
        assert_eq!(c.batch_size, 1024);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_fields_named() {
        let c = TrainerConfig { gamma: 1.0, ..Default::default() };
        assert!(c.validate().unwrap_err().to_string().contains("gamma"));
        let c = TrainerConfig { batch_size: 10, buffer_capacity: 5, ..Default::default() };
        assert!(c.validate().unwrap_err().to_string().contains("batch_size"));
    }

    #[test]
    fn noise_anneals_then_holds() {
        let s = NoiseSchedule::default();
        assert_eq!(s.scale(0, 100), 0.3);
        assert!((s.scale(30, 100) - 0.175).abs() < 1e-12);
        assert!((s.scale(60, 100) - 0.05).abs() < 1e-12);
        assert!((s.scale(99, 100) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn variant_flags() {
        assert!(Variant::Dama.centralized() && Variant::Dama.delay_aware());
        assert!(!Variant::Ddpg.centralized() && !Variant::Ddpg.delay_aware());
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
    }
}
