use rand::Rng;

use super::buffer::{AugmentedSpace, AugmentedState, DelaySpec};
use super::mrp::PolicyTable;
use super::{GameError, Result, PROBABILITY_TOLERANCE};
use crate::Scalar;

/// Finite Markov game seen through enumerable states and joint actions.
///
/// Both a plain tabular game and its delay-augmented version implement this,
/// so the same policy-marginalization code can build either one's reward
/// process.
pub trait MarkovGame<T: Scalar> {
    fn num_agents(&self) -> usize;
    fn num_states(&self) -> usize;
    fn action_counts(&self) -> &[usize];
    fn num_observations(&self, agent: usize) -> usize;
    /// Observation index agent `agent` receives in `state`.
    fn observation(&self, agent: usize, state: usize) -> usize;
    fn initial_probability(&self, state: usize) -> T;
    /// Next states with non-zero probability under joint action `joint`.
    fn successors(&self, state: usize, joint: &[usize]) -> Vec<(usize, T)>;
    fn reward(&self, agent: usize, state: usize, action: usize) -> T;
}

/// Iterator over joint actions in mixed-radix order, agent 0 most significant.
#[derive(Debug, Clone)]
pub struct JointActions {
    counts: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl JointActions {
    pub fn new(counts: &[usize]) -> Self {
        let next = if counts.iter().all(|&c| c > 0) {
            Some(vec![0; counts.len()])
        } else {
            None
        };
        Self {
            counts: counts.to_vec(),
            next,
        }
    }

    pub fn index_of(counts: &[usize], joint: &[usize]) -> usize {
        joint.iter().zip(counts).fold(0, |acc, (&a, &c)| acc * c + a)
    }
}

impl Iterator for JointActions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        for slot in (0..succ.len()).rev() {
            succ[slot] += 1;
            if succ[slot] < self.counts[slot] {
                self.next = Some(succ);
                return Some(current);
            }
            succ[slot] = 0;
        }
        Some(current)
    }
}

/// Finite-state, finite-action `N`-agent Markov game with explicit tables.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMarkovGame<T> {
    num_states: usize,
    action_counts: Vec<usize>,
    initial: Vec<T>,
    // [(s * joint_count + joint) * num_states + s']
    transition: Vec<T>,
    // per agent, [s * |A_i| + a_i]
    rewards: Vec<Vec<T>>,
    // per agent, state -> observation index
    observations: Vec<Vec<usize>>,
    observation_counts: Vec<usize>,
}

impl<T: Scalar> TabularMarkovGame<T> {
    /// Validates and builds a game. `observations[i][s]` is agent `i`'s
    /// observation index in state `s`.
    pub fn new(
        action_counts: Vec<usize>,
        initial: Vec<T>,
        transition: Vec<T>,
        rewards: Vec<Vec<T>>,
        observations: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let num_states = initial.len();
        let num_agents = action_counts.len();
        if num_states == 0 || num_agents == 0 {
            return Err(GameError::InvalidGame("game needs at least one state and one agent".into()));
        }
        if action_counts.contains(&0) {
            return Err(GameError::InvalidGame("every agent needs at least one action".into()));
        }
        let joint_count: usize = action_counts.iter().product();
        if transition.len() != num_states * joint_count * num_states {
            return Err(GameError::InvalidGame(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                num_states * joint_count * num_states
            )));
        }
        if rewards.len() != num_agents || observations.len() != num_agents {
            return Err(GameError::InvalidGame(format!(
                "{num_agents} agents but {} reward tables and {} observation maps",
                rewards.len(),
                observations.len()
            )));
        }
        let tol = T::lit(PROBABILITY_TOLERANCE);
        check_distribution(&initial, tol).map_err(|e| GameError::InvalidGame(format!("initial distribution {e}")))?;
        for (row, slice) in transition.chunks(num_states).enumerate() {
            check_distribution(slice, tol).map_err(|e| {
                GameError::InvalidGame(format!(
                    "transition slice for state {} joint action {} {e}",
                    row / joint_count,
                    row % joint_count
                ))
            })?;
        }
        for (agent, (table, &count)) in rewards.iter().zip(&action_counts).enumerate() {
            if table.len() != num_states * count {
                return Err(GameError::InvalidGame(format!(
                    "agent {agent} reward table has {} entries, expected {}",
                    table.len(),
                    num_states * count
                )));
            }
            if table.iter().any(|r| !r.is_finite()) {
                return Err(GameError::InvalidGame(format!("agent {agent} has a non-finite reward")));
            }
        }
        let mut observation_counts = Vec::with_capacity(num_agents);
        for (agent, map) in observations.iter().enumerate() {
            if map.len() != num_states {
                return Err(GameError::InvalidGame(format!(
                    "agent {agent} observation map covers {} states, expected {num_states}",
                    map.len()
                )));
            }
            observation_counts.push(map.iter().max().map_or(0, |m| m + 1));
        }
        Ok(Self {
            num_states,
            action_counts,
            initial,
            transition,
            rewards,
            observations,
            observation_counts,
        })
    }

    pub fn joint_count(&self) -> usize {
        self.action_counts.iter().product()
    }

    pub fn initial(&self) -> &[T] {
        &self.initial
    }

    /// `p(. | s, joint)` as a dense slice over next states.
    pub fn transition_row(&self, state: usize, joint: &[usize]) -> &[T] {
        let j = JointActions::index_of(&self.action_counts, joint);
        let start = (state * self.joint_count() + j) * self.num_states;
        &self.transition[start..start + self.num_states]
    }

    pub fn transition_table(&self) -> &[T] {
        &self.transition
    }

    pub fn reward_table(&self, agent: usize) -> &[T] {
        &self.rewards[agent]
    }

    pub fn observation_map(&self, agent: usize) -> &[usize] {
        &self.observations[agent]
    }
}

fn check_distribution<T: Scalar>(p: &[T], tol: T) -> std::result::Result<(), String> {
    if let Some(bad) = p.iter().find(|x| !x.is_finite() || **x < T::zero()) {
        return Err(format!("has invalid probability {bad}"));
    }
    let sum: T = p.iter().copied().sum();
    if (sum - T::one()).abs() > tol {
        return Err(format!("sums to {sum}"));
    }
    Ok(())
}

impl<T: Scalar> MarkovGame<T> for TabularMarkovGame<T> {
    fn num_agents(&self) -> usize {
        self.action_counts.len()
    }

    fn num_states(&self) -> usize {
        self.num_states
    }

    fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    fn num_observations(&self, agent: usize) -> usize {
        self.observation_counts[agent]
    }

    fn observation(&self, agent: usize, state: usize) -> usize {
        self.observations[agent][state]
    }

    fn initial_probability(&self, state: usize) -> T {
        self.initial[state]
    }

    fn successors(&self, state: usize, joint: &[usize]) -> Vec<(usize, T)> {
        self.transition_row(state, joint)
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != T::zero())
            .map(|(next, &p)| (next, p))
            .collect()
    }

    fn reward(&self, agent: usize, state: usize, action: usize) -> T {
        self.rewards[agent][state * self.action_counts[agent] + action]
    }
}

/// A tabular game augmented with per-agent pending action sequences.
///
/// Its states are `S x A_1^k_1 x ... x A_N^k_N` (see [`AugmentedSpace`] for
/// the order). Acting applies the base transition to the heads of the pending
/// sequences, shifts every sequence by one and appends the chosen actions.
/// Agent `i`'s reward at an augmented state is the base reward for the
/// action at the head of its own sequence.
#[derive(Debug, Clone)]
pub struct DelayAwareGame<T> {
    base: TabularMarkovGame<T>,
    delays: DelaySpec<usize>,
    space: AugmentedSpace,
    observation_counts: Vec<usize>,
}

/// Augments `game` with the action delays in `delays`, enumerating at most
/// `cap` augmented states.
pub fn augment_game<T: Scalar>(
    game: &TabularMarkovGame<T>,
    delays: &DelaySpec<usize>,
    cap: usize,
) -> Result<DelayAwareGame<T>> {
    delays.validate_tabular(&game.action_counts)?;
    let space = AugmentedSpace::new(game.num_states, &game.action_counts, &delays.steps(), cap)?;
    let observation_counts = (0..game.action_counts.len())
        .map(|agent| game.observation_counts[agent] * space.pending_count(agent))
        .collect();
    Ok(DelayAwareGame {
        base: game.clone(),
        delays: delays.clone(),
        space,
        observation_counts,
    })
}

impl<T: Scalar> DelayAwareGame<T> {
    pub fn base(&self) -> &TabularMarkovGame<T> {
        &self.base
    }

    pub fn space(&self) -> &AugmentedSpace {
        &self.space
    }

    pub fn delays(&self) -> &DelaySpec<usize> {
        &self.delays
    }

    /// Action agent `agent` executes in the environment from `state` when it
    /// chooses `chosen`: the head of its sequence, or `chosen` itself if it
    /// has no delay.
    fn executed(&self, state: &AugmentedState<usize, usize>, agent: usize, chosen: usize) -> usize {
        state.pending[agent].first().copied().unwrap_or(chosen)
    }

    /// Dense copy of the augmented game as a plain tabular game.
    pub fn to_tabular(&self) -> Result<TabularMarkovGame<T>> {
        let n = self.space.len();
        let counts = self.base.action_counts.clone();
        let joint_count = self.base.joint_count();
        let mut transition = vec![T::zero(); n * joint_count * n];
        for x in 0..n {
            for (j, joint) in JointActions::new(&counts).enumerate() {
                for (next, p) in self.successors(x, &joint) {
                    transition[(x * joint_count + j) * n + next] += p;
                }
            }
        }
        let rewards = (0..counts.len())
            .map(|agent| {
                (0..n)
                    .flat_map(|x| (0..counts[agent]).map(move |a| (x, a)))
                    .map(|(x, a)| self.reward(agent, x, a))
                    .collect()
            })
            .collect();
        let observations = (0..counts.len())
            .map(|agent| (0..n).map(|x| self.observation(agent, x)).collect())
            .collect();
        let initial = (0..n).map(|x| self.initial_probability(x)).collect();
        TabularMarkovGame::new(counts, initial, transition, rewards, observations)
    }
}

impl<T: Scalar> MarkovGame<T> for DelayAwareGame<T> {
    fn num_agents(&self) -> usize {
        self.base.num_agents()
    }

    fn num_states(&self) -> usize {
        self.space.len()
    }

    fn action_counts(&self) -> &[usize] {
        &self.base.action_counts
    }

    fn num_observations(&self, agent: usize) -> usize {
        self.observation_counts[agent]
    }

    /// Base observation combined with the agent's own pending sequence.
    fn observation(&self, agent: usize, state: usize) -> usize {
        let x = self.space.decode(state);
        self.base.observation(agent, x.base) * self.space.pending_count(agent)
            + self.space.encode_pending(agent, &x.pending[agent])
    }

    fn initial_probability(&self, state: usize) -> T {
        let x = self.space.decode(state);
        let seeded = x
            .pending
            .iter()
            .enumerate()
            .all(|(agent, seq)| seq.as_slice() == self.delays.initial_actions(agent));
        if seeded {
            self.base.initial_probability(x.base)
        } else {
            T::zero()
        }
    }

    fn successors(&self, state: usize, joint: &[usize]) -> Vec<(usize, T)> {
        let x = self.space.decode(state);
        let executed: Vec<usize> = (0..joint.len()).map(|i| self.executed(&x, i, joint[i])).collect();
        let shifted: Vec<Vec<usize>> = x
            .pending
            .iter()
            .zip(joint)
            .map(|(seq, &chosen)| {
                if seq.is_empty() {
                    Vec::new()
                } else {
                    seq[1..].iter().copied().chain(std::iter::once(chosen)).collect()
                }
            })
            .collect();
        self.base
            .successors(x.base, &executed)
            .into_iter()
            .map(|(next, p)| {
                let next_state = AugmentedState {
                    base: next,
                    pending: shifted.clone(),
                };
                (self.space.encode(&next_state), p)
            })
            .collect()
    }

    fn reward(&self, agent: usize, state: usize, action: usize) -> T {
        let x = self.space.decode(state);
        self.base.reward(agent, x.base, self.executed(&x, agent, action))
    }
}

/// Bounds for [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomLimits {
    pub max_states: usize,
    pub max_agents: usize,
    pub max_actions: usize,
    pub max_delay: usize,
}

impl Default for RandomLimits {
    fn default() -> Self {
        Self {
            max_states: 4,
            max_agents: 2,
            max_actions: 3,
            max_delay: 2,
        }
    }
}

/// A random game with random delays, initial sequences and stochastic
/// policies over its augmented observations.
#[derive(Debug, Clone)]
pub struct RandomInstance<T> {
    pub game: TabularMarkovGame<T>,
    pub delays: DelaySpec<usize>,
    pub policies: Vec<PolicyTable<T>>,
}

fn random_distribution<T: Scalar, R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<T> {
    // occasional exact zeros exercise sparse successor lists
    let mut raw: Vec<f64> = (0..len)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() + 1e-3 })
        .collect();
    if raw.iter().all(|&x| x == 0.0) {
        raw[rng.random_range(0..len)] = 1.0;
    }
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| T::lit(x / total)).collect()
}

/// Random stochastic policy table with `rows` observations and `actions` actions.
pub(crate) fn random_policy<T: Scalar, R: Rng + ?Sized>(rng: &mut R, rows: usize, actions: usize) -> PolicyTable<T> {
    let probs = (0..rows).flat_map(|_| random_distribution::<T, R>(rng, actions)).collect();
    PolicyTable::new(actions, probs).expect("normalized rows")
}

/// Samples a game, delays and policies within `limits`.
pub fn random_instance<T: Scalar, R: Rng + ?Sized>(rng: &mut R, limits: RandomLimits) -> RandomInstance<T> {
    let num_states = rng.random_range(1..=limits.max_states);
    let num_agents = rng.random_range(1..=limits.max_agents);
    let action_counts: Vec<usize> = (0..num_agents).map(|_| rng.random_range(1..=limits.max_actions)).collect();
    let joint_count: usize = action_counts.iter().product();
    let initial = random_distribution(rng, num_states);
    let transition = (0..num_states * joint_count)
        .flat_map(|_| random_distribution::<T, R>(rng, num_states))
        .collect();
    let rewards = action_counts
        .iter()
        .map(|&count| (0..num_states * count).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect())
        .collect();
    let observations: Vec<Vec<usize>> = (0..num_agents)
        .map(|_| {
            let obs_count = rng.random_range(1..=num_states);
            let mut map: Vec<usize> = (0..num_states).map(|s| s % obs_count).collect();
            for i in (1..map.len()).rev() {
                map.swap(i, rng.random_range(0..=i));
            }
            map
        })
        .collect();
    let game = TabularMarkovGame::new(action_counts.clone(), initial, transition, rewards, observations)
        .expect("random game satisfies invariants");
    let steps: Vec<usize> = (0..num_agents).map(|_| rng.random_range(0..=limits.max_delay)).collect();
    let initial_actions = steps
        .iter()
        .zip(&action_counts)
        .map(|(&k, &count)| (0..k).map(|_| rng.random_range(0..count)).collect())
        .collect();
    let delays = DelaySpec::new(&steps, initial_actions).expect("lengths match");
    let policies = (0..num_agents)
        .map(|agent| {
            let rows = game.num_observations(agent) * action_counts[agent].pow(steps[agent] as u32);
            random_policy(rng, rows, action_counts[agent])
        })
        .collect();
    RandomInstance { game, delays, policies }
}
