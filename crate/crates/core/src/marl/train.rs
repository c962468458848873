//! Training loop, metrics stream and checkpoint directories.
//!
//! `metrics.jsonl` starts with `{"header": MetricsHeader}` followed by one
//! [`EpisodeRecord`] per line. Wall-clock time per episode goes to a separate
//! `timing.jsonl` so that the metrics stream depends on the seed alone.
//!
//! A checkpoint directory holds one `agent_<i>/` folder per agent with
//! `actor.bin`, `critic.bin`, `target_actor.bin`, `target_critic.bin` in the
//! [`crate::nn`] checkpoint format and a `layout.json` with the agent's
//! variant and every agent's layout.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{make_env, MultiAgentEnv, Outcome, ScenarioConfig};
use crate::game::{AugmentedObservation, DelayedEnv};
use crate::nn::{read_checkpoint, write_checkpoint, Mlp};
use crate::Scalar;

use super::eval::ActorPolicy;
use super::update::{actor_update_agent, critic_update_agent, soft_update_targets};
use super::{AgentLayout, AgentLearner, LearnerParams, MarlError, ReplayBuffer, Result, TrainerConfig, Transition, Variant};

pub const METRICS_FORMAT: &str = "damarl-metrics/1";

const STREAM_ENV: u64 = 0;
const STREAM_REPLAY: u64 = 1;
const STREAM_UPDATE: u64 = 2;
const STREAM_INIT: u64 = 0x100;
const STREAM_NOISE: u64 = 0x200;

/// Derives an independent seed for `stream` from a run seed with the
/// splitmix64 finalizer applied to `seed + (stream + 1) * golden`.
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsHeader {
    pub format: String,
    pub seed: u64,
    /// `f32` or `f64`.
    pub precision: String,
    pub variants: Vec<Variant>,
    pub delays: Vec<usize>,
    pub trainer: TrainerConfig,
    pub scenario: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Undiscounted return per agent.
    pub returns: Vec<f64>,
    pub touches: usize,
    pub collisions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    pub steps: usize,
    /// Update rounds run during the episode.
    pub updates: usize,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub episode: usize,
    pub wall_seconds: f64,
}

/// One training run: the delayed world, every agent's learner, the shared
/// replay buffer and the seeded random streams.
pub struct Trainer<T> {
    config: TrainerConfig,
    scenario: ScenarioConfig,
    env: DelayedEnv<Box<dyn MultiAgentEnv + Send>>,
    learners: Vec<AgentLearner<T>>,
    replay: ReplayBuffer<T>,
    env_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    update_rng: ChaCha8Rng,
    noise_rngs: Vec<ChaCha8Rng>,
    episode: usize,
    total_steps: usize,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(config: TrainerConfig, scenario: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let scenario = scenario.resolved()?;
        let env = make_env(&scenario)?;
        let n = env.num_agents();
        let delays = scenario.delays_for(n)?;
        let variants = config.variants_for(n)?;
        let layouts: Vec<AgentLayout> = env
            .observation_dims()
            .into_iter()
            .zip(env.action_spaces())
            .zip(&delays)
            .map(|((obs_dim, space), &delay)| AgentLayout { obs_dim, delay, space })
            .collect();
        let env = DelayedEnv::new(env, &delays)?;
        let params = LearnerParams {
            learning_rate: config.learning_rate,
            optimizer: config.optimizer,
            gumbel_temperature: config.gumbel_temperature,
        };
        let seed = config.seed;
        let learners = (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, STREAM_INIT + i as u64));
                AgentLearner::new(i, variants[i], layouts.clone(), &params, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let replay = ReplayBuffer::new(
            config.buffer_capacity,
            config.warmup,
            env.augmented_dims(),
            layouts.iter().map(AgentLayout::action_dim).collect(),
        )?;
        let rng = |stream| ChaCha8Rng::seed_from_u64(split_seed(seed, stream));
        Ok(Self {
            env_rng: rng(STREAM_ENV),
            replay_rng: rng(STREAM_REPLAY),
            update_rng: rng(STREAM_UPDATE),
            noise_rngs: (0..n as u64).map(|i| rng(STREAM_NOISE + i)).collect(),
            config,
            scenario,
            env,
            learners,
            replay,
            episode: 0,
            total_steps: 0,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    /// The scenario with every default filled in.
    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn learners(&self) -> &[AgentLearner<T>] {
        &self.learners
    }

    pub fn learners_mut(&mut self) -> &mut [AgentLearner<T>] {
        &mut self.learners
    }

    pub fn replay(&self) -> &ReplayBuffer<T> {
        &self.replay
    }

    pub fn episodes_done(&self) -> usize {
        self.episode
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn header(&self) -> MetricsHeader {
        MetricsHeader {
            format: METRICS_FORMAT.into(),
            seed: self.config.seed,
            precision: std::any::type_name::<T>().into(),
            variants: self.learners.iter().map(|l| l.variant).collect(),
            delays: self.env.delays(),
            trainer: self.config.clone(),
            scenario: self.scenario.clone(),
        }
    }

    fn policy_input(&self, agent: usize, obs: &AugmentedObservation<f64>) -> Vec<T> {
        obs.to_vec(self.learners[agent].variant.delay_aware())
            .into_iter()
            .map(T::lit)
            .collect()
    }

    /// Runs one episode with exploration and learning.
    pub fn run_episode(&mut self) -> Result<EpisodeRecord> {
        let episode = self.episode;
        let n = self.learners.len();
        let noise = self.config.noise.scale(episode, self.config.episodes);
        let mut obs = self.env.reset(self.env_rng.next_u64());
        let mut record = EpisodeRecord {
            episode,
            returns: vec![0.0; n],
            touches: 0,
            collisions: 0,
            outcome: None,
            steps: 0,
            updates: 0,
            noise,
        };
        let horizon = self.env.env().episode_length();
        for step in 0..horizon {
            let wrap = |e: MarlError| MarlError::Run {
                episode,
                step,
                source: Box::new(e),
            };
            let chosen = (0..n)
                .map(|i| {
                    let input = self.policy_input(i, &obs[i]);
                    let a = self.learners[i].act(&input, T::lit(noise), &mut self.noise_rngs[i])?;
                    Ok(a.into_iter().map(|v| v.as_f64()).collect::<Vec<f64>>())
                })
                .collect::<Result<Vec<_>>>()
                .map_err(wrap)?;
            let out = self.env.step(&chosen).map_err(|e| wrap(e.into()))?;
            let full = |o: &[AugmentedObservation<f64>]| -> Vec<Vec<T>> {
                o.iter().map(|a| a.to_vec(true).into_iter().map(T::lit).collect()).collect()
            };
            let transition = Transition {
                obs: full(&obs),
                actions: chosen.iter().map(|a| a.iter().copied().map(T::lit).collect()).collect(),
                rewards: out.rewards.iter().copied().map(T::lit).collect(),
                next_obs: full(&out.observations),
                done: out.done,
            };
            self.replay.push(&transition).map_err(wrap)?;
            self.total_steps += 1;
            record.steps += 1;
            for (r, v) in record.returns.iter_mut().zip(&out.rewards) {
                *r += v;
            }
            record.touches += out.info.touches;
            record.collisions += out.info.collisions;
            if out.info.outcome.is_some() {
                record.outcome = out.info.outcome;
            }
            if self.total_steps.is_multiple_of(self.config.update_every) && self.replay.is_ready() {
                self.update_round().map_err(wrap)?;
                record.updates += 1;
            }
            obs = out.observations;
            if out.done {
                break;
            }
        }
        self.episode += 1;
        Ok(record)
    }

    /// Per agent: sample a batch, one critic step and one actor step; then
    /// every target network moves toward its online network.
    pub fn update_round(&mut self) -> Result<()> {
        let gamma = T::lit(self.config.gamma);
        let clip = T::lit(self.config.clip_norm);
        for i in 0..self.learners.len() {
            let batch = self.replay.sample(self.config.batch_size, &mut self.replay_rng)?;
            critic_update_agent(&mut self.learners, i, &batch, gamma, clip, &mut self.update_rng)?;
            actor_update_agent(&mut self.learners, i, &batch, clip, &mut self.update_rng)?;
        }
        soft_update_targets(&mut self.learners, T::lit(self.config.kappa))
    }

    /// Greedy policies from the current actors.
    pub fn policies(&self) -> Vec<ActorPolicy<T>> {
        self.learners.iter().map(ActorPolicy::from_learner).collect()
    }
}

/// Trains for `config.episodes` episodes, writing `metrics.jsonl`,
/// `timing.jsonl` and `checkpoints/` under `out`. Periodic checkpoints go
/// to `checkpoints/episode_<e>/`, the last one to `checkpoints/final/`.
pub fn train<T: Scalar>(
    config: &TrainerConfig,
    scenario: &ScenarioConfig,
    out: &Path,
    mut progress: impl FnMut(&EpisodeRecord),
) -> Result<Vec<EpisodeRecord>> {
    let mut trainer = Trainer::<T>::new(config.clone(), scenario)?;
    fs::create_dir_all(out)?;
    let mut metrics = BufWriter::new(File::create(out.join("metrics.jsonl"))?);
    let mut timing = BufWriter::new(File::create(out.join("timing.jsonl"))?);
    serde_json::to_writer(&mut metrics, &serde_json::json!({ "header": trainer.header() }))?;
    metrics.write_all(b"\n")?;
    let mut records = Vec::with_capacity(config.episodes);
    for e in 0..config.episodes {
        let start = Instant::now();
        let record = trainer.run_episode()?;
        serde_json::to_writer(&mut metrics, &record)?;
        metrics.write_all(b"\n")?;
        let wall_seconds = start.elapsed().as_secs_f64();
        serde_json::to_writer(&mut timing, &TimingRecord { episode: e, wall_seconds })?;
        timing.write_all(b"\n")?;
        progress(&record);
        records.push(record);
        if config.checkpoint_every > 0 && (e + 1) % config.checkpoint_every == 0 && e + 1 < config.episodes {
            save_learners(trainer.learners(), &out.join("checkpoints").join(format!("episode_{}", e + 1)))?;
        }
    }
    metrics.flush()?;
    timing.flush()?;
    save_learners(trainer.learners(), &out.join("checkpoints").join("final"))?;
    Ok(records)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayoutFile {
    index: usize,
    variant: Variant,
    layouts: Vec<AgentLayout>,
}

pub fn save_learners<T: Scalar>(learners: &[AgentLearner<T>], dir: &Path) -> Result<()> {
    for l in learners {
        let agent_dir = dir.join(format!("agent_{}", l.index));
        fs::create_dir_all(&agent_dir)?;
        for (name, net) in [
            ("actor", &l.actor),
            ("critic", &l.critic),
            ("target_actor", &l.target_actor),
            ("target_critic", &l.target_critic),
        ] {
            let mut f = BufWriter::new(File::create(agent_dir.join(format!("{name}.bin")))?);
            write_checkpoint(net, &mut f)?;
            f.flush()?;
        }
        let layout = LayoutFile {
            index: l.index,
            variant: l.variant,
            layouts: l.layouts.clone(),
        };
        fs::write(agent_dir.join("layout.json"), serde_json::to_string_pretty(&layout)?)?;
    }
    Ok(())
}

/// Greedy policies from the actors of a checkpoint directory, in agent order.
pub fn load_actors<T: Scalar>(dir: &Path) -> Result<Vec<ActorPolicy<T>>> {
    let mut out = Vec::new();
    loop {
        let agent_dir = dir.join(format!("agent_{}", out.len()));
        if !agent_dir.is_dir() {
            break;
        }
        let layout: LayoutFile = serde_json::from_str(&fs::read_to_string(agent_dir.join("layout.json"))?)?;
        let actor: Mlp<T> = read_checkpoint(std::io::BufReader::new(File::open(agent_dir.join("actor.bin"))?))?;
        let own = layout
            .layouts
            .get(layout.index)
            .copied()
            .ok_or_else(|| MarlError::Config(format!("{}: agent index outside its layouts", agent_dir.display())))?;
        out.push(ActorPolicy::new(layout.variant, own, actor)?);
    }
    if out.is_empty() {
        return Err(MarlError::Config(format!("no agent_0 directory in {}", dir.display())));
    }
    Ok(out)
}
