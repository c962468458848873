use std::collections::BTreeMap;

use serde::Serialize;

use super::buffer::{AugmentedSpace, AugmentedState, DelaySpec};
use super::tabular::{augment_game, JointActions, MarkovGame, TabularMarkovGame};
use super::{GameError, Result, POLICY_TOLERANCE};
use crate::Scalar;

/// Largest augmented state count [`verify_theorem1`] enumerates by default.
pub const DEFAULT_ENUMERATION_CAP: usize = 100_000;

/// Stochastic policy `pi(a | o)` for one agent, one row per observation index.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable<T> {
    num_actions: usize,
    probs: Vec<T>,
}

impl<T: Scalar> PolicyTable<T> {
    /// `probs` is row-major `[observation * num_actions + action]`.
    pub fn new(num_actions: usize, probs: Vec<T>) -> Result<Self> {
        if num_actions == 0 || !probs.len().is_multiple_of(num_actions) {
            return Err(GameError::Shape(format!(
                "{} probabilities do not form rows of {num_actions}",
                probs.len()
            )));
        }
        Ok(Self { num_actions, probs })
    }

    /// Deterministic policy choosing `choice(o)` in observation `o`.
    pub fn deterministic(num_actions: usize, rows: usize, choice: impl Fn(usize) -> usize) -> Self {
        let mut probs = vec![T::zero(); rows * num_actions];
        for o in 0..rows {
            probs[o * num_actions + choice(o)] = T::one();
        }
        Self { num_actions, probs }
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_rows(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    pub fn row(&self, observation: usize) -> &[T] {
        &self.probs[observation * self.num_actions..(observation + 1) * self.num_actions]
    }

    pub fn prob(&self, observation: usize, action: usize) -> T {
        self.probs[observation * self.num_actions + action]
    }

    fn validate(&self, agent: usize, rows: usize, actions: usize) -> Result<()> {
        if self.num_actions != actions || self.num_rows() != rows {
            return Err(GameError::Shape(format!(
                "agent {agent} policy is {}x{}, expected {rows}x{actions}",
                self.num_rows(),
                self.num_actions
            )));
        }
        for o in 0..rows {
            let row = self.row(o);
            let sum: T = row.iter().copied().sum();
            let bad_entry = row.iter().any(|p| !p.is_finite() || *p < T::zero());
            if bad_entry || (sum - T::one()).abs().as_f64() > POLICY_TOLERANCE {
                return Err(GameError::InvalidPolicy {
                    agent,
                    observation: o,
                    sum: sum.as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// Markov reward process: initial distribution, sparse row-stochastic
/// transition kernel and per-agent state rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct MrpKernel<T> {
    initial: Vec<T>,
    // each row sorted by column, no duplicate columns
    rows: Vec<Vec<(usize, T)>>,
    rewards: Vec<Vec<T>>,
}

impl<T: Scalar> MrpKernel<T> {
    fn from_accumulators(initial: Vec<T>, rows: Vec<BTreeMap<usize, T>>, rewards: Vec<Vec<T>>) -> Self {
        let rows = rows.into_iter().map(|row| row.into_iter().collect()).collect();
        Self { initial, rows, rewards }
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn num_agents(&self) -> usize {
        self.rewards.len()
    }

    pub fn initial(&self) -> &[T] {
        &self.initial
    }

    pub fn row(&self, state: usize) -> &[(usize, T)] {
        &self.rows[state]
    }

    pub fn rewards(&self, agent: usize) -> &[T] {
        &self.rewards[agent]
    }

    /// `kappa(next | state)`.
    pub fn entry(&self, state: usize, next: usize) -> T {
        let row = &self.rows[state];
        row.binary_search_by_key(&next, |&(c, _)| c)
            .map(|i| row[i].1)
            .unwrap_or_else(|_| T::zero())
    }

    /// Adds `delta` to one kernel entry, creating it if absent.
    pub fn add_to_entry(&mut self, state: usize, next: usize, delta: T) {
        let row = &mut self.rows[state];
        match row.binary_search_by_key(&next, |&(c, _)| c) {
            Ok(i) => row[i].1 += delta,
            Err(i) => row.insert(i, (next, delta)),
        }
    }

    /// Largest `|sum_j kappa(j | i) - 1|` over rows.
    pub fn max_row_deviation(&self) -> T {
        self.rows
            .iter()
            .map(|row| (row.iter().map(|&(_, p)| p).sum::<T>() - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// Dense `n x n` copy of the kernel, row-major.
    pub fn to_dense(&self) -> Vec<T> {
        let n = self.num_states();
        let mut out = vec![T::zero(); n * n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                out[i * n + j] = p;
            }
        }
        out
    }
}

fn validate_policies<T: Scalar, G: MarkovGame<T>>(game: &G, policies: &[PolicyTable<T>]) -> Result<()> {
    if policies.len() != game.num_agents() {
        return Err(GameError::Shape(format!(
            "{} policies for {} agents",
            policies.len(),
            game.num_agents()
        )));
    }
    for (agent, policy) in policies.iter().enumerate() {
        policy.validate(agent, game.num_observations(agent), game.action_counts()[agent])?;
    }
    Ok(())
}

/// Reward process induced by running `policies` on `game` without delay:
/// `kappa(s'|s) = sum_a p(s'|s,a) prod_i pi_i(a_i|o_i(s))` and
/// `r_i(s) = sum_a r_i(s,a) pi_i(a|o_i(s))`.
pub fn mrp_of_game<T: Scalar, G: MarkovGame<T>>(game: &G, policies: &[PolicyTable<T>]) -> Result<MrpKernel<T>> {
    validate_policies(game, policies)?;
    let n = game.num_states();
    let num_agents = game.num_agents();
    let counts = game.action_counts().to_vec();
    let mut rows = vec![BTreeMap::new(); n];
    let mut rewards = vec![vec![T::zero(); n]; num_agents];
    for (s, row) in rows.iter_mut().enumerate() {
        let obs: Vec<usize> = (0..num_agents).map(|i| game.observation(i, s)).collect();
        for joint in JointActions::new(&counts) {
            let weight = joint
                .iter()
                .enumerate()
                .fold(T::one(), |w, (i, &a)| w * policies[i].prob(obs[i], a));
            if weight == T::zero() {
                continue;
            }
            for (next, p) in game.successors(s, &joint) {
                *row.entry(next).or_insert_with(T::zero) += p * weight;
            }
        }
        for (agent, reward) in rewards.iter_mut().enumerate() {
            reward[s] = (0..counts[agent])
                .map(|a| policies[agent].prob(obs[agent], a) * game.reward(agent, s, a))
                .sum();
        }
    }
    let initial = (0..n).map(|s| game.initial_probability(s)).collect();
    Ok(MrpKernel::from_accumulators(initial, rows, rewards))
}

/// Reward process of policies acting on `game` through action buffers.
///
/// Built directly from buffered interaction rather than from an augmented
/// game: at `x = (s, pending)` every agent draws a fresh action from its
/// policy given its base observation and its own pending sequence, the
/// environment executes the heads of the sequences (or the fresh action for
/// undelayed agents), and the fresh actions are appended behind the shifted
/// tails. Agent `i`'s state reward is `r_i(s, head_i)`.
pub fn damrp_kernel<T: Scalar>(
    game: &TabularMarkovGame<T>,
    policies: &[PolicyTable<T>],
    delays: &DelaySpec<usize>,
) -> Result<MrpKernel<T>> {
    damrp_kernel_with_cap(game, policies, delays, DEFAULT_ENUMERATION_CAP)
}

fn damrp_kernel_with_cap<T: Scalar>(
    game: &TabularMarkovGame<T>,
    policies: &[PolicyTable<T>],
    delays: &DelaySpec<usize>,
    cap: usize,
) -> Result<MrpKernel<T>> {
    let counts = game.action_counts().to_vec();
    let num_agents = counts.len();
    delays.validate_tabular(&counts)?;
    let steps = delays.steps();
    let space = AugmentedSpace::new(game.num_states(), &counts, &steps, cap)?;
    if policies.len() != num_agents {
        return Err(GameError::Shape(format!("{} policies for {num_agents} agents", policies.len())));
    }
    for (agent, policy) in policies.iter().enumerate() {
        let rows = game.num_observations(agent) * space.pending_count(agent);
        policy.validate(agent, rows, counts[agent])?;
    }

    let n = space.len();
    let mut rows = vec![BTreeMap::new(); n];
    let mut rewards = vec![vec![T::zero(); n]; num_agents];
    let mut initial = vec![T::zero(); n];
    for (index, row) in rows.iter_mut().enumerate() {
        let AugmentedState { base: s, pending } = space.decode(index);
        let policy_rows: Vec<&[T]> = (0..num_agents)
            .map(|i| {
                let o = game.observation(i, s) * space.pending_count(i) + space.encode_pending(i, &pending[i]);
                policies[i].row(o)
            })
            .collect();

        for fresh in JointActions::new(&counts) {
            let weight = fresh
                .iter()
                .zip(&policy_rows)
                .fold(T::one(), |w, (&a, row)| w * row[a]);
            if weight == T::zero() {
                continue;
            }
            let executed: Vec<usize> = (0..num_agents)
                .map(|i| if steps[i] > 0 { pending[i][0] } else { fresh[i] })
                .collect();
            let mut next_pending = pending.clone();
            for (i, seq) in next_pending.iter_mut().enumerate() {
                if !seq.is_empty() {
                    seq.remove(0);
                    seq.push(fresh[i]);
                }
            }
            let dense = game.transition_row(s, &executed);
            for (next_s, &p) in dense.iter().enumerate() {
                if p == T::zero() {
                    continue;
                }
                let next = space.encode(&AugmentedState {
                    base: next_s,
                    pending: next_pending.clone(),
                });
                *row.entry(next).or_insert_with(T::zero) += p * weight;
            }
        }

        for (i, reward) in rewards.iter_mut().enumerate() {
            reward[index] = if steps[i] > 0 {
                game.reward(i, s, pending[i][0])
            } else {
                (0..counts[i]).map(|a| policy_rows[i][a] * game.reward(i, s, a)).sum()
            };
        }
        if (0..num_agents).all(|i| pending[i] == delays.initial_actions(i)) {
            initial[index] = game.initial()[s];
        }
    }
    Ok(MrpKernel::from_accumulators(initial, rows, rewards))
}

/// Reward process of `policies` acting without delay on the augmented game.
pub fn mrp_of_damg<T: Scalar>(
    game: &super::DelayAwareGame<T>,
    policies: &[PolicyTable<T>],
) -> Result<MrpKernel<T>> {
    mrp_of_game(game, policies)
}

/// Element-wise maximum absolute differences between two reward processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MrpDiff {
    pub max_kernel_diff: f64,
    pub max_reward_diff: f64,
    pub max_initial_diff: f64,
}

pub fn compare_mrps<T: Scalar>(a: &MrpKernel<T>, b: &MrpKernel<T>) -> Result<MrpDiff> {
    if a.num_states() != b.num_states() || a.num_agents() != b.num_agents() {
        return Err(GameError::Shape(format!(
            "comparing {}-state/{}-agent process with {}-state/{}-agent process",
            a.num_states(),
            a.num_agents(),
            b.num_states(),
            b.num_agents()
        )));
    }
    let mut kernel = 0.0f64;
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        // merge the two sorted sparse rows
        let (mut i, mut j) = (0, 0);
        while i < ra.len() || j < rb.len() {
            let diff = match (ra.get(i), rb.get(j)) {
                (Some(&(ca, pa)), Some(&(cb, pb))) if ca == cb => {
                    i += 1;
                    j += 1;
                    (pa - pb).abs()
                }
                (Some(&(ca, pa)), Some(&(cb, _))) if ca < cb => {
                    i += 1;
                    pa.abs()
                }
                (Some(&(_, pa)), None) => {
                    i += 1;
                    pa.abs()
                }
                (_, Some(&(_, pb))) => {
                    j += 1;
                    pb.abs()
                }
                (None, None) => unreachable!(),
            };
            kernel = kernel.max(diff.as_f64());
        }
    }
    let max_diff = |x: &[T], y: &[T]| {
        x.iter()
            .zip(y)
            .map(|(p, q)| (*p - *q).abs().as_f64())
            .fold(0.0f64, f64::max)
    };
    let reward = a
        .rewards
        .iter()
        .zip(&b.rewards)
        .map(|(x, y)| max_diff(x, y))
        .fold(0.0f64, f64::max);
    Ok(MrpDiff {
        max_kernel_diff: kernel,
        max_reward_diff: reward,
        max_initial_diff: max_diff(&a.initial, &b.initial),
    })
}

/// Outcome of comparing the buffered-interaction process with the process of
/// the augmented game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub augmented_states: usize,
    pub max_kernel_diff: f64,
    pub max_reward_diff: f64,
    pub max_initial_diff: f64,
    /// Worst row-sum deviation from 1 over both kernels.
    pub max_row_deviation: f64,
    pub pass: bool,
}

impl Theorem1Report {
    pub fn from_diff(augmented_states: usize, diff: MrpDiff, max_row_deviation: f64, tol: f64) -> Self {
        let pass = diff.max_kernel_diff <= tol && diff.max_reward_diff <= tol && diff.max_initial_diff <= tol;
        Self {
            augmented_states,
            max_kernel_diff: diff.max_kernel_diff,
            max_reward_diff: diff.max_reward_diff,
            max_initial_diff: diff.max_initial_diff,
            max_row_deviation,
            pass,
        }
    }
}

/// Builds both reward processes and checks they agree within `tol`, using the
/// default enumeration cap.
pub fn verify_theorem1<T: Scalar>(
    game: &TabularMarkovGame<T>,
    policies: &[PolicyTable<T>],
    delays: &DelaySpec<usize>,
    tol: f64,
) -> Result<Theorem1Report> {
    verify_theorem1_with_cap(game, policies, delays, tol, DEFAULT_ENUMERATION_CAP)
}

pub fn verify_theorem1_with_cap<T: Scalar>(
    game: &TabularMarkovGame<T>,
    policies: &[PolicyTable<T>],
    delays: &DelaySpec<usize>,
    tol: f64,
    cap: usize,
) -> Result<Theorem1Report> {
    let direct = damrp_kernel_with_cap(game, policies, delays, cap)?;
    let augmented = augment_game(game, delays, cap)?;
    let composed = mrp_of_damg(&augmented, policies)?;
    let diff = compare_mrps(&direct, &composed)?;
    let deviation = direct
        .max_row_deviation()
        .max(composed.max_row_deviation())
        .as_f64();
    Ok(Theorem1Report::from_diff(direct.num_states(), diff, deviation, tol))
}
