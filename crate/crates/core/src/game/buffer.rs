use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{GameError, Result};

/// Per-agent delay steps `k_i` and the action sequences `c_i` that fill each
/// agent's buffer before its first chosen action comes due.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec<A> {
    initial_actions: Vec<Vec<A>>,
}

impl<A: Clone> DelaySpec<A> {
    /// Builds a spec from explicit delay steps and initial sequences.
    pub fn new(steps: &[usize], initial_actions: Vec<Vec<A>>) -> Result<Self> {
        if steps.len() != initial_actions.len() {
            return Err(GameError::Config(format!(
                "{} delay steps but {} initial action sequences",
                steps.len(),
                initial_actions.len()
            )));
        }
        for (agent, (&k, seq)) in steps.iter().zip(&initial_actions).enumerate() {
            if seq.len() != k {
                return Err(GameError::Config(format!(
                    "agent {agent}: initial action sequence has length {} but delay is {k}",
                    seq.len()
                )));
            }
        }
        Ok(Self { initial_actions })
    }

    /// Fills every agent's initial sequence with its no-op action.
    pub fn with_noop(steps: &[usize], mut noop: impl FnMut(usize) -> A) -> Self {
        let initial_actions = steps
            .iter()
            .enumerate()
            .map(|(agent, &k)| vec![noop(agent); k])
            .collect();
        Self { initial_actions }
    }

    /// No delay for any of `num_agents` agents.
    pub fn zero(num_agents: usize) -> Self {
        Self {
            initial_actions: vec![Vec::new(); num_agents],
        }
    }

    pub fn num_agents(&self) -> usize {
        self.initial_actions.len()
    }

    pub fn steps(&self) -> Vec<usize> {
        self.initial_actions.iter().map(Vec::len).collect()
    }

    pub fn step(&self, agent: usize) -> usize {
        self.initial_actions[agent].len()
    }

    pub fn initial_actions(&self, agent: usize) -> &[A] {
        &self.initial_actions[agent]
    }

    pub fn total_steps(&self) -> usize {
        self.initial_actions.iter().map(Vec::len).sum()
    }
}

impl DelaySpec<usize> {
    /// Checks agent count and that every initial action exists in `A_i`.
    pub fn validate_tabular(&self, action_counts: &[usize]) -> Result<()> {
        if self.num_agents() != action_counts.len() {
            return Err(GameError::Config(format!(
                "delay spec covers {} agents, game has {}",
                self.num_agents(),
                action_counts.len()
            )));
        }
        for (agent, (seq, &count)) in self.initial_actions.iter().zip(action_counts).enumerate() {
            if let Some(&bad) = seq.iter().find(|&&a| a >= count) {
                return Err(GameError::Config(format!(
                    "agent {agent}: initial action {bad} outside action set of size {count}"
                )));
            }
        }
        Ok(())
    }
}

/// FIFO of chosen-but-not-yet-executed actions, one queue per agent.
///
/// Between steps agent `i`'s queue holds exactly `k_i` actions: the head is
/// the action executed next, the tail the most recently chosen one.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionBuffer<A> {
    queues: Vec<VecDeque<A>>,
}

impl<A: Clone> ActionBuffer<A> {
    pub fn new(spec: &DelaySpec<A>) -> Self {
        let queues = (0..spec.num_agents())
            .map(|agent| spec.initial_actions(agent).iter().cloned().collect())
            .collect();
        Self { queues }
    }

    pub fn num_agents(&self) -> usize {
        self.queues.len()
    }

    pub fn delay(&self, agent: usize) -> usize {
        self.queues[agent].len()
    }

    /// Actions agent `agent` has queued, oldest (next to execute) first.
    pub fn pending(&self, agent: usize) -> impl ExactSizeIterator<Item = &A> + '_ {
        self.queues[agent].iter()
    }

    pub fn pending_vec(&self, agent: usize) -> Vec<A> {
        self.queues[agent].iter().cloned().collect()
    }

    /// Pushes one newly chosen action per agent and pops the actions that are
    /// executed this tick. Agents with no delay execute their choice directly.
    pub fn step(&mut self, chosen: Vec<A>) -> Result<Vec<A>> {
        if chosen.len() != self.queues.len() {
            return Err(GameError::Shape(format!(
                "{} chosen actions for {} agents",
                chosen.len(),
                self.queues.len()
            )));
        }
        let executed = self
            .queues
            .iter_mut()
            .zip(chosen)
            .map(|(queue, action)| match queue.pop_front() {
                Some(head) => {
                    queue.push_back(action);
                    head
                }
                None => action,
            })
            .collect();
        Ok(executed)
    }
}

/// Environment state together with each agent's pending action sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AugmentedState<S, A> {
    pub base: S,
    pub pending: Vec<Vec<A>>,
}

/// An agent's policy input: its environment observation and its own pending
/// actions, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedObservation<T> {
    pub obs: Vec<T>,
    pub act: Vec<Vec<T>>,
}

impl<T: Copy> AugmentedObservation<T> {
    pub fn dim(&self) -> usize {
        self.obs.len() + self.act.iter().map(Vec::len).sum::<usize>()
    }

    /// `obs` followed by the pending actions, or `obs` alone when the
    /// consumer is not delay-aware.
    pub fn to_vec(&self, with_actions: bool) -> Vec<T> {
        let mut out = self.obs.clone();
        if with_actions {
            for a in &self.act {
                out.extend_from_slice(a);
            }
        }
        out
    }
}

/// Index layout of the finite augmented state space `S x A_1^k_1 x ... x A_N^k_N`.
///
/// States are ordered lexicographically: base state most significant, then
/// agent 1's pending actions oldest to newest, then agent 2's, and so on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedSpace {
    num_states: usize,
    action_counts: Vec<usize>,
    delays: Vec<usize>,
    // |A_i|^k_i
    pending_counts: Vec<usize>,
    len: usize,
}

impl AugmentedSpace {
    /// Fails with a size error naming the product when it exceeds `cap`.
    pub fn new(num_states: usize, action_counts: &[usize], delays: &[usize], cap: usize) -> Result<Self> {
        if action_counts.len() != delays.len() {
            return Err(GameError::Config(format!(
                "{} action sets but {} delays",
                action_counts.len(),
                delays.len()
            )));
        }
        let mut product: u128 = num_states as u128;
        let mut formula = format!("{num_states}");
        let mut pending_counts = Vec::with_capacity(delays.len());
        for (&count, &k) in action_counts.iter().zip(delays) {
            let pc = (count as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
            product = product.saturating_mul(pc);
            formula.push_str(&format!("·{count}^{k}"));
            pending_counts.push(pc.min(usize::MAX as u128) as usize);
        }
        if product > cap as u128 {
            return Err(GameError::Size { product, formula, cap });
        }
        Ok(Self {
            num_states,
            action_counts: action_counts.to_vec(),
            delays: delays.to_vec(),
            pending_counts,
            len: product as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_agents(&self) -> usize {
        self.delays.len()
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    /// Number of distinct pending sequences for `agent`, `|A_i|^k_i`.
    pub fn pending_count(&self, agent: usize) -> usize {
        self.pending_counts[agent]
    }

    /// Index of a single agent's pending sequence, oldest action most significant.
    pub fn encode_pending(&self, agent: usize, pending: &[usize]) -> usize {
        let base = self.action_counts[agent];
        pending.iter().fold(0, |acc, &a| acc * base + a)
    }

    pub fn decode_pending(&self, agent: usize, mut index: usize) -> Vec<usize> {
        let base = self.action_counts[agent];
        let k = self.delays[agent];
        let mut out = vec![0; k];
        for slot in out.iter_mut().rev() {
            *slot = index % base;
            index /= base;
        }
        out
    }

    pub fn encode(&self, state: &AugmentedState<usize, usize>) -> usize {
        let mut index = state.base;
        for (agent, pending) in state.pending.iter().enumerate() {
            index = index * self.pending_counts[agent] + self.encode_pending(agent, pending);
        }
        index
    }

    pub fn decode(&self, mut index: usize) -> AugmentedState<usize, usize> {
        let mut pending = vec![Vec::new(); self.num_agents()];
        for agent in (0..self.num_agents()).rev() {
            let pc = self.pending_counts[agent];
            pending[agent] = self.decode_pending(agent, index % pc);
            index /= pc;
        }
        AugmentedState { base: index, pending }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_shift_with_two_step_delay() {
        let spec = DelaySpec::new(&[2], vec![vec!["a0", "a1"]]).unwrap();
        let mut buffer = ActionBuffer::new(&spec);
        let executed = buffer.step(vec!["a2"]).unwrap();
        assert_eq!(executed, vec!["a0"]);
        assert_eq!(buffer.pending_vec(0), vec!["a1", "a2"]);
    }

    #[test]
    fn zero_delay_passes_through() {
        let mut buffer = ActionBuffer::new(&DelaySpec::<u8>::zero(1));
        assert_eq!(buffer.step(vec![7]).unwrap(), vec![7]);
        assert_eq!(buffer.delay(0), 0);
        assert_eq!(buffer.pending(0).len(), 0);
    }

    #[test]
    fn seeded_buffer_executes_initial_action_first() {
        let spec = DelaySpec::new(&[1], vec![vec![0usize]]).unwrap();
        let mut buffer = ActionBuffer::new(&spec);
        let policy_output = 3usize;
        assert_eq!(buffer.step(vec![policy_output]).unwrap(), vec![0]);
        assert_eq!(buffer.step(vec![1]).unwrap(), vec![3]);
    }

    #[test]
    fn heterogeneous_delays_keep_queue_lengths() {
        let spec = DelaySpec::with_noop(&[0, 1, 3], |_| 0i32);
        let mut buffer = ActionBuffer::new(&spec);
        for t in 0..10 {
            buffer.step(vec![t, t, t]).unwrap();
            assert_eq!(
                (0..3).map(|i| buffer.delay(i)).collect::<Vec<_>>(),
                vec![0, 1, 3]
            );
        }
    }

    #[test]
    fn wrong_agent_count_is_shape_error() {
        let mut buffer = ActionBuffer::new(&DelaySpec::<u8>::zero(2));
        assert!(matches!(buffer.step(vec![1]), Err(GameError::Shape(_))));
    }

    #[test]
    fn mismatched_initial_sequence_is_config_error() {
        let err = DelaySpec::new(&[2], vec![vec![1usize]]).unwrap_err();
        assert!(matches!(err, GameError::Config(_)));
        let spec = DelaySpec::new(&[1], vec![vec![5usize]]).unwrap();
        assert!(matches!(spec.validate_tabular(&[2]), Err(GameError::Config(_))));
    }

    #[test]
    fn augmented_space_round_trips_and_orders_lexicographically() {
        let space = AugmentedSpace::new(3, &[2, 3], &[1, 2], 1000).unwrap();
        assert_eq!(space.len(), 3 * 2 * 9);
        for index in 0..space.len() {
            assert_eq!(space.encode(&space.decode(index)), index);
        }
        let first = space.decode(0);
        assert_eq!(first.base, 0);
        assert_eq!(first.pending, vec![vec![0], vec![0, 0]]);
        // last agent's newest action varies fastest
        assert_eq!(space.decode(1).pending, vec![vec![0], vec![0, 1]]);
        assert_eq!(space.decode(3).pending, vec![vec![0], vec![1, 0]]);
        assert_eq!(space.decode(9).pending, vec![vec![1], vec![0, 0]]);
        assert_eq!(space.decode(18).base, 1);
    }

    #[test]
    fn size_error_names_product() {
        let err = AugmentedSpace::new(4, &[3, 3], &[5, 5], 100_000).unwrap_err();
        match err {
            GameError::Size { product, formula, cap } => {
                assert_eq!(product, 4 * 3u128.pow(10));
                assert_eq!(formula, "4·3^5·3^5");
                assert_eq!(cap, 100_000);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn augmented_observation_flattens_oldest_first() {
        let obs = AugmentedObservation {
            obs: vec![1.0, 2.0],
            act: vec![vec![3.0, 4.0], vec![5.0, 6.0]],
        };
        assert_eq!(obs.dim(), 6);
        assert_eq!(obs.to_vec(true), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(obs.to_vec(false), vec![1.0, 2.0]);
    }
}
