use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::RewardMagnitudes;
use super::{check_actions, ActionSpace, EnvError, MultiAgentEnv, Outcome, StepInfo, StepResult};

/// Geometry and vehicle limits of the four-way junction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionParams {
    /// Lateral offset of each lane from the road axis (m).
    pub lane_offset: f64,
    /// Radius of the left-turn arc (m).
    pub turn_radius: f64,
    /// Half width of the square junction box (m).
    pub box_half_width: f64,
    /// Vehicles whose centers come closer than this crash (m).
    pub collision_radius: f64,
    pub spawn_mean: f64,
    pub spawn_std: f64,
    /// Spawn distances are clamped from below to this value (m).
    pub spawn_min: f64,
    pub initial_speed: f64,
    pub max_speed: f64,
    /// Acceleration for a unit action (m/s^2).
    pub max_accel: f64,
}

impl Default for IntersectionParams {
    fn default() -> Self {
        Self {
            lane_offset: 2.5,
            turn_radius: 5.0,
            box_half_width: 10.0,
            collision_radius: 2.0,
            spawn_mean: 50.0,
            spawn_std: 10.0,
            spawn_min: 15.0,
            initial_speed: 10.0,
            max_speed: 15.0,
            max_accel: 5.0,
        }
    }
}

/// Fixed left-turn path: straight approach, quarter-circle arc, straight exit
/// to the junction box edge. Described for a vehicle arriving from the south
/// and rotated by `heading_quarter * 90` degrees counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub heading_quarter: u8,
    /// Distance from the junction center at spawn, along the approach axis.
    pub spawn_distance: f64,
    approach: f64,
    arc: f64,
    exit: f64,
    lane_offset: f64,
    radius: f64,
}

impl Route {
    pub fn new(heading_quarter: u8, spawn_distance: f64, params: &IntersectionParams) -> Self {
        let w = params.lane_offset;
        let r = params.turn_radius;
        Self {
            heading_quarter,
            spawn_distance,
            // arc starts at (w, w - r) for the south-origin lane
            approach: spawn_distance - (r - w),
            arc: FRAC_PI_2 * r,
            exit: params.box_half_width - (r - w),
            lane_offset: w,
            radius: r,
        }
    }

    pub fn length(&self) -> f64 {
        self.approach + self.arc + self.exit
    }

    /// Position in the unrotated frame (south origin, heading north).
    fn local_point(&self, s: f64) -> [f64; 2] {
        let w = self.lane_offset;
        let r = self.radius;
        if s <= self.approach {
            [w, -self.spawn_distance + s]
        } else if s <= self.approach + self.arc {
            let theta = (s - self.approach) / r;
            // arc center (w - r, w - r)
            [w - r + r * theta.cos(), w - r + r * theta.sin()]
        } else {
            let u = s - self.approach - self.arc;
            [w - r - u, w]
        }
    }

    /// World position at arc length `s` from spawn.
    pub fn point(&self, s: f64) -> [f64; 2] {
        let [x, y] = self.local_point(s.clamp(0.0, self.length()));
        match self.heading_quarter % 4 {
            0 => [x, y],
            1 => [-y, x],
            2 => [-x, -y],
            _ => [y, -x],
        }
    }

    /// Remaining distance to the junction center along the approach axis;
    /// negative once the vehicle has passed the approach.
    pub fn distance_to_center(&self, s: f64) -> f64 {
        self.spawn_distance - s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub route: Route,
    /// Arc length travelled (m).
    pub position: f64,
    /// m/s, never negative.
    pub speed: f64,
    pub commanded_accel: f64,
    pub finished: bool,
}

impl Vehicle {
    pub fn xy(&self) -> [f64; 2] {
        self.route.point(self.position)
    }
}

/// Four vehicles from N/S/E/W each taking a left turn through an
/// unsignalized junction, controlling only longitudinal acceleration.
///
/// Every agent observes, for itself first and then the others in cyclic
/// order: x / 50, y / 50, speed / 10, arc position / 50, and 1 while the
/// vehicle is still on the road (0 after it clears the junction).
#[derive(Debug, Clone)]
pub struct IntersectionEnv {
    params: IntersectionParams,
    rewards: RewardMagnitudes,
    dt: f64,
    episode_length: usize,
    vehicles: Vec<Vehicle>,
    outcome: Option<Outcome>,
    tick: usize,
}

const NUM_VEHICLES: usize = 4;
const OBS_PER_VEHICLE: usize = 5;

impl IntersectionEnv {
    pub fn new(
        params: IntersectionParams,
        dt: f64,
        episode_length: usize,
        rewards: RewardMagnitudes,
    ) -> Result<Self, EnvError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(EnvError::Config(format!("timestep must be positive, got {dt}")));
        }
        if episode_length == 0 {
            return Err(EnvError::Config("episode length must be positive".into()));
        }
        if params.spawn_min < params.turn_radius - params.lane_offset {
            return Err(EnvError::Config("spawn_min must leave room for the approach".into()));
        }
        let vehicles = (0..NUM_VEHICLES as u8)
            .map(|q| Vehicle {
                route: Route::new(q, params.spawn_mean, &params),
                position: 0.0,
                speed: params.initial_speed,
                commanded_accel: 0.0,
                finished: false,
            })
            .collect();
        Ok(Self {
            params,
            rewards,
            dt,
            episode_length,
            vehicles,
            outcome: None,
            tick: 0,
        })
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn vehicles_mut(&mut self) -> &mut [Vehicle] {
        &mut self.vehicles
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn params(&self) -> &IntersectionParams {
        &self.params
    }

    fn any_crash(&self) -> bool {
        let active: Vec<[f64; 2]> = self.vehicles.iter().filter(|v| !v.finished).map(Vehicle::xy).collect();
        for i in 0..active.len() {
            for j in i + 1..active.len() {
                let d = (active[i][0] - active[j][0]).hypot(active[i][1] - active[j][1]);
                if d < self.params.collision_radius {
                    return true;
                }
            }
        }
        false
    }

    /// Terminal bonus or penalty for everyone, or the per-step penalty.
    pub fn reward_intersection(&self, outcome: Option<Outcome>) -> Vec<f64> {
        let r = match outcome {
            Some(Outcome::Success) => self.rewards.success,
            Some(Outcome::Crash) => -self.rewards.crash,
            Some(Outcome::Stuck) | None => -self.rewards.step_penalty,
        };
        vec![r; NUM_VEHICLES]
    }
}

impl MultiAgentEnv for IntersectionEnv {
    fn num_agents(&self) -> usize {
        NUM_VEHICLES
    }

    fn observation_dims(&self) -> Vec<usize> {
        vec![NUM_VEHICLES * OBS_PER_VEHICLE; NUM_VEHICLES]
    }

    fn action_spaces(&self) -> Vec<ActionSpace> {
        vec![ActionSpace { movement: 1, message: 0 }; NUM_VEHICLES]
    }

    fn episode_length(&self) -> usize {
        self.episode_length
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spawn = Normal::new(self.params.spawn_mean, self.params.spawn_std).expect("valid spawn distribution");
        for (q, vehicle) in self.vehicles.iter_mut().enumerate() {
            let d = spawn.sample(&mut rng).max(self.params.spawn_min);
            *vehicle = Vehicle {
                route: Route::new(q as u8, d, &self.params),
                position: 0.0,
                speed: self.params.initial_speed,
                commanded_accel: 0.0,
                finished: false,
            };
        }
        self.outcome = None;
        self.tick = 0;
        (0..NUM_VEHICLES).map(|a| self.observe(a)).collect()
    }

    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepResult, EnvError> {
        if self.outcome.is_some() {
            return Err(EnvError::EpisodeOver);
        }
        check_actions(actions, &self.action_spaces())?;
        let (dt, max_accel, max_speed) = (self.dt, self.params.max_accel, self.params.max_speed);
        for (vehicle, action) in self.vehicles.iter_mut().zip(actions) {
            if vehicle.finished {
                continue;
            }
            vehicle.commanded_accel = action[0].clamp(-1.0, 1.0) * max_accel;
            vehicle.speed = (vehicle.speed + vehicle.commanded_accel * dt).clamp(0.0, max_speed);
            vehicle.position += vehicle.speed * dt;
            if vehicle.position >= vehicle.route.length() {
                vehicle.position = vehicle.route.length();
                vehicle.finished = true;
            }
        }
        self.tick += 1;
        let outcome = if self.any_crash() {
            Some(Outcome::Crash)
        } else if self.vehicles.iter().all(|v| v.finished) {
            Some(Outcome::Success)
        } else if self.tick >= self.episode_length {
            Some(Outcome::Stuck)
        } else {
            None
        };
        self.outcome = outcome;
        Ok(StepResult {
            observations: (0..NUM_VEHICLES).map(|a| self.observe(a)).collect(),
            rewards: self.reward_intersection(outcome),
            done: outcome.is_some(),
            info: StepInfo {
                outcome,
                ..StepInfo::default()
            },
        })
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        let mut obs = Vec::with_capacity(NUM_VEHICLES * OBS_PER_VEHICLE);
        for offset in 0..NUM_VEHICLES {
            let v = &self.vehicles[(agent + offset) % NUM_VEHICLES];
            let [x, y] = v.xy();
            obs.extend_from_slice(&[
                x / 50.0,
                y / 50.0,
                v.speed / 10.0,
                v.position / 50.0,
                if v.finished { 0.0 } else { 1.0 },
            ]);
        }
        obs
    }

    fn snapshot(&self) -> serde_json::Value {
        json!({
            "tick": self.tick,
            "outcome": self.outcome,
            "vehicles": self.vehicles.iter().map(|v| json!({
                "route": v.route.heading_quarter,
                "position": v.position,
                "speed": v.speed,
                "accel": v.commanded_accel,
                "xy": v.xy(),
                "finished": v.finished,
            })).collect::<Vec<_>>(),
        })
    }
}
