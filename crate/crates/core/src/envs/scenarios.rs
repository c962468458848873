use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{PreyMode, RewardMagnitudes, ScenarioId};
use super::particle::{Entity, ParticleWorld, DAMPING};
use super::{check_actions, ActionSpace, EnvError, MultiAgentEnv, StepInfo, StepResult};

/// Number of message symbols, one per landmark color.
pub const MESSAGE_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Speaker,
    Listener,
    Navigator,
    Predator,
    Prey,
}

/// Particle-world scenario: cooperative communication, cooperative
/// navigation or predator-prey.
///
/// Observation layouts (all positions in meters, velocities in m/s):
///
/// * speaker: goal color one-hot (3)
/// * listener: own velocity (2), own position (2), landmark positions
///   relative to self (3 x 2), last heard message (3)
/// * navigator: own velocity, own position, landmarks relative (3 x 2),
///   other agents relative positions (2 x 2), other agents velocities (2 x 2)
/// * predator / prey: own velocity, own position, landmarks relative
///   (2 x 2), other agents relative positions (3 x 2), other agents
///   velocities (3 x 2)
///
/// "Other agents" are listed in world order, skipping self.
#[derive(Debug, Clone)]
pub struct ParticleEnv {
    scenario: ScenarioId,
    prey_mode: PreyMode,
    rewards: RewardMagnitudes,
    episode_length: usize,
    world: ParticleWorld,
    roles: Vec<Role>,
    // world agent indices that take actions from outside
    roster: Vec<usize>,
    goal: usize,
    message: Vec<f64>,
    tick: usize,
}

impl ParticleEnv {
    pub fn new(
        scenario: ScenarioId,
        dt: f64,
        episode_length: usize,
        rewards: RewardMagnitudes,
        prey_mode: PreyMode,
    ) -> Result<Self, EnvError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(EnvError::Config(format!("timestep must be positive, got {dt}")));
        }
        if episode_length == 0 {
            return Err(EnvError::Config("episode length must be positive".into()));
        }
        let (roles, mut entities): (Vec<Role>, Vec<Entity>) = match scenario {
            ScenarioId::CoopComm => {
                let mut speaker = Entity::agent(0.075, 0.0, None, false);
                speaker.movable = false;
                let listener = Entity::agent(0.075, 5.0, None, false);
                (vec![Role::Speaker, Role::Listener], vec![speaker, listener])
            }
            ScenarioId::CoopNav => (
                vec![Role::Navigator; 3],
                vec![Entity::agent(0.15, 5.0, None, true); 3],
            ),
            ScenarioId::PredatorPrey => {
                let mut roles = vec![Role::Predator; 3];
                roles.push(Role::Prey);
                let mut entities = vec![Entity::agent(0.075, 3.0, Some(1.0), true); 3];
                entities.push(Entity::agent(0.05, 4.0, Some(1.3), true));
                (roles, entities)
            }
            ScenarioId::Intersection => {
                return Err(EnvError::Config("intersection is not a particle scenario".into()));
            }
        };
        let num_agents = entities.len();
        match scenario {
            ScenarioId::CoopComm => entities.extend((0..3).map(|c| Entity::landmark(0.04, false, c))),
            ScenarioId::CoopNav => entities.extend((0..3).map(|c| Entity::landmark(0.05, false, c))),
            _ => entities.extend((0..2).map(|c| Entity::landmark(0.2, true, c))),
        }
        let roster = (0..num_agents)
            .filter(|&i| !(roles[i] == Role::Prey && prey_mode == PreyMode::Scripted))
            .collect();
        Ok(Self {
            scenario,
            prey_mode,
            rewards,
            episode_length,
            world: ParticleWorld {
                entities,
                num_agents,
                dt,
                damping: DAMPING,
            },
            roles,
            roster,
            goal: 0,
            message: vec![0.0; MESSAGE_DIM],
            tick: 0,
        })
    }

    pub fn scenario(&self) -> ScenarioId {
        self.scenario
    }

    pub fn world(&self) -> &ParticleWorld {
        &self.world
    }

    /// Direct access for scripted setups.
    pub fn world_mut(&mut self) -> &mut ParticleWorld {
        &mut self.world
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    /// Role of roster agent `agent`.
    pub fn role(&self, agent: usize) -> Role {
        self.roles[self.roster[agent]]
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn set_goal(&mut self, goal: usize) {
        self.goal = goal;
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    fn space_for(&self, role: Role) -> ActionSpace {
        match role {
            Role::Speaker => ActionSpace { movement: 0, message: MESSAGE_DIM },
            _ => ActionSpace { movement: 2, message: 0 },
        }
    }

    fn obs_dim_for(&self, role: Role) -> usize {
        let n_agents = self.world.num_agents;
        let n_landmarks = self.world.landmarks().len();
        match role {
            Role::Speaker => MESSAGE_DIM,
            Role::Listener => 4 + 2 * n_landmarks + MESSAGE_DIM,
            _ => 4 + 2 * n_landmarks + 4 * (n_agents - 1),
        }
    }

    fn observe_entity(&self, index: usize) -> Vec<f64> {
        let me = &self.world.entities[index];
        let role = self.roles[index];
        if role == Role::Speaker {
            let mut goal = vec![0.0; MESSAGE_DIM];
            goal[self.goal] = 1.0;
            return goal;
        }
        let mut obs = Vec::with_capacity(self.obs_dim_for(role));
        obs.extend_from_slice(&me.vel);
        obs.extend_from_slice(&me.pos);
        for lm in self.world.landmarks() {
            obs.push(lm.pos[0] - me.pos[0]);
            obs.push(lm.pos[1] - me.pos[1]);
        }
        if role == Role::Listener {
            obs.extend_from_slice(&self.message);
            return obs;
        }
        let others = (0..self.world.num_agents).filter(|&j| j != index);
        for j in others.clone() {
            let other = &self.world.entities[j];
            obs.push(other.pos[0] - me.pos[0]);
            obs.push(other.pos[1] - me.pos[1]);
        }
        for j in others {
            obs.extend_from_slice(&self.world.entities[j].vel);
        }
        obs
    }

    /// Flee the nearest predator at full force.
    fn scripted_prey_force(&self, prey: usize) -> [f64; 2] {
        let me = &self.world.entities[prey];
        let nearest = (0..self.world.num_agents)
            .filter(|&j| self.roles[j] == Role::Predator)
            .min_by(|&a, &b| {
                me.distance(&self.world.entities[a])
                    .total_cmp(&me.distance(&self.world.entities[b]))
            });
        let Some(p) = nearest else { return [0.0; 2] };
        let pred = &self.world.entities[p];
        let away = [me.pos[0] - pred.pos[0], me.pos[1] - pred.pos[1]];
        let norm = away[0].hypot(away[1]);
        if norm < 1e-12 {
            return [me.accel, 0.0];
        }
        [away[0] / norm * me.accel, away[1] / norm * me.accel]
    }

    /// Shared reward `-|listener - goal|^2` for speaker and listener.
    pub fn reward_coop_comm(&self) -> Vec<f64> {
        let listener = &self.world.entities[1];
        let goal = &self.world.landmarks()[self.goal];
        let d2 = (listener.pos[0] - goal.pos[0]).powi(2) + (listener.pos[1] - goal.pos[1]).powi(2);
        vec![-d2; 2]
    }

    /// Shared coverage term `-sum_l min_a dist(a, l)` plus a per-agent
    /// penalty for every other agent it overlaps. Returns rewards and the
    /// number of colliding pairs.
    pub fn reward_coop_nav(&self) -> (Vec<f64>, usize) {
        let agents = self.world.agents();
        let coverage: f64 = self
            .world
            .landmarks()
            .iter()
            .map(|lm| agents.iter().map(|a| a.distance(lm)).fold(f64::INFINITY, f64::min))
            .sum();
        let mut rewards = vec![-coverage; agents.len()];
        let mut pairs = 0;
        for i in 0..agents.len() {
            for j in i + 1..agents.len() {
                if agents[i].overlaps(&agents[j]) {
                    pairs += 1;
                    rewards[i] -= self.rewards.collision;
                    rewards[j] -= self.rewards.collision;
                }
            }
        }
        (rewards, pairs)
    }

    /// Every predator-prey contact pays each predator and charges the prey.
    /// Rewards are indexed by world agent; returns the touch count too.
    pub fn reward_predator_prey(&self) -> (Vec<f64>, usize) {
        let agents = self.world.agents();
        let mut touches = 0;
        for (i, a) in agents.iter().enumerate() {
            if self.roles[i] != Role::Predator {
                continue;
            }
            for (j, b) in agents.iter().enumerate() {
                if self.roles[j] == Role::Prey && a.overlaps(b) {
                    touches += 1;
                }
            }
        }
        let gain = self.rewards.touch * touches as f64;
        let rewards = self
            .roles
            .iter()
            .map(|role| if *role == Role::Prey { -gain } else { gain })
            .collect();
        (rewards, touches)
    }

    /// Rewards for the roster agents and the step's event counts.
    pub fn rewards(&self) -> (Vec<f64>, StepInfo) {
        let mut info = StepInfo::default();
        let per_world_agent = match self.scenario {
            ScenarioId::CoopComm => self.reward_coop_comm(),
            ScenarioId::CoopNav => {
                let (r, pairs) = self.reward_coop_nav();
                info.collisions = pairs;
                r
            }
            _ => {
                let (r, touches) = self.reward_predator_prey();
                info.touches = touches;
                r
            }
        };
        (self.roster.iter().map(|&i| per_world_agent[i]).collect(), info)
    }

    fn place(&mut self, rng: &mut ChaCha8Rng) {
        let landmark_range = if self.scenario == ScenarioId::PredatorPrey { 0.9 } else { 1.0 };
        let num_agents = self.world.num_agents;
        for (i, e) in self.world.entities.iter_mut().enumerate() {
            let range = if i < num_agents { 1.0 } else { landmark_range };
            e.pos = [rng.random_range(-range..range), rng.random_range(-range..range)];
            e.vel = [0.0; 2];
        }
    }
}

impl MultiAgentEnv for ParticleEnv {
    fn num_agents(&self) -> usize {
        self.roster.len()
    }

    fn observation_dims(&self) -> Vec<usize> {
        self.roster.iter().map(|&i| self.obs_dim_for(self.roles[i])).collect()
    }

    fn action_spaces(&self) -> Vec<ActionSpace> {
        self.roster.iter().map(|&i| self.space_for(self.roles[i])).collect()
    }

    fn episode_length(&self) -> usize {
        self.episode_length
    }

    fn dt(&self) -> f64 {
        self.world.dt
    }

    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.place(&mut rng);
        self.goal = rng.random_range(0..3);
        self.message = vec![0.0; MESSAGE_DIM];
        self.tick = 0;
        (0..self.num_agents()).map(|a| self.observe(a)).collect()
    }

    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepResult, EnvError> {
        if self.tick >= self.episode_length {
            return Err(EnvError::EpisodeOver);
        }
        check_actions(actions, &self.action_spaces())?;
        let mut forces = vec![[0.0; 2]; self.world.num_agents];
        for (action, &entity) in actions.iter().zip(&self.roster) {
            match self.roles[entity] {
                Role::Speaker => self.message = action.clone(),
                _ => {
                    let accel = self.world.entities[entity].accel;
                    forces[entity] = [action[0].clamp(-1.0, 1.0) * accel, action[1].clamp(-1.0, 1.0) * accel];
                }
            }
        }
        if self.prey_mode == PreyMode::Scripted {
            for i in 0..self.world.num_agents {
                if self.roles[i] == Role::Prey {
                    forces[i] = self.scripted_prey_force(i);
                }
            }
        }
        self.world.step(&forces);
        self.tick += 1;
        let (rewards, info) = self.rewards();
        Ok(StepResult {
            observations: (0..self.num_agents()).map(|a| self.observe(a)).collect(),
            rewards,
            done: self.tick >= self.episode_length,
            info,
        })
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        self.observe_entity(self.roster[agent])
    }

    fn snapshot(&self) -> serde_json::Value {
        json!({
            "tick": self.tick,
            "goal": self.goal,
            "message": self.message,
            "roles": self.roles,
            "entities": self.world.entities,
        })
    }
}
