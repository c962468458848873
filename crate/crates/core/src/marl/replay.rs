use rand::Rng;

use crate::nn::Matrix;
use crate::Scalar;

use super::{MarlError, Result};

/// One joint step: every agent's augmented observation, chosen action and
/// reward, and the next augmented observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub obs: Vec<Vec<T>>,
    pub actions: Vec<Vec<T>>,
    pub rewards: Vec<T>,
    pub next_obs: Vec<Vec<T>>,
    pub done: bool,
}

/// A sampled minibatch with one matrix per agent, rows aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub obs: Vec<Matrix<T>>,
    pub actions: Vec<Matrix<T>>,
    /// `B x N`.
    pub rewards: Matrix<T>,
    pub next_obs: Vec<Matrix<T>>,
    pub done: Vec<bool>,
}

impl<T: Scalar> Batch<T> {
    pub fn len(&self) -> usize {
        self.rewards.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stacks transitions into a batch.
    pub fn from_transitions(items: &[Transition<T>]) -> Result<Self> {
        let n = items.first().map_or(0, |t| t.obs.len());
        let per_agent = |f: &dyn Fn(&Transition<T>) -> &Vec<Vec<T>>| -> Result<Vec<Matrix<T>>> {
            (0..n)
                .map(|i| {
                    let rows: Vec<&[T]> = items.iter().map(|t| f(t)[i].as_slice()).collect();
                    Ok(Matrix::from_rows(&rows)?)
                })
                .collect()
        };
        let rewards: Vec<&[T]> = items.iter().map(|t| t.rewards.as_slice()).collect();
        Ok(Self {
            obs: per_agent(&|t| &t.obs)?,
            actions: per_agent(&|t| &t.actions)?,
            rewards: Matrix::from_rows(&rewards)?,
            next_obs: per_agent(&|t| &t.next_obs)?,
            done: items.iter().map(|t| t.done).collect(),
        })
    }
}

/// Fixed-capacity ring of transitions stored as flat rows. Once full, each
/// push overwrites the oldest record.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    warmup: usize,
    obs_dims: Vec<usize>,
    action_dims: Vec<usize>,
    stride: usize,
    data: Vec<T>,
    done: Vec<bool>,
    len: usize,
    next: usize,
}

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize, warmup: usize, obs_dims: Vec<usize>, action_dims: Vec<usize>) -> Result<Self> {
        if capacity == 0 {
            return Err(MarlError::Config("replay capacity must be positive".into()));
        }
        if obs_dims.len() != action_dims.len() {
            return Err(MarlError::Shape(format!(
                "{} observation widths for {} action widths",
                obs_dims.len(),
                action_dims.len()
            )));
        }
        let stride = 2 * obs_dims.iter().sum::<usize>() + action_dims.iter().sum::<usize>() + obs_dims.len();
        Ok(Self {
            capacity,
            warmup,
            obs_dims,
            action_dims,
            stride,
            data: Vec::new(),
            done: Vec::new(),
            len: 0,
            next: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_ready(&self) -> bool {
        self.len > 0 && self.len >= self.warmup
    }

    pub fn push(&mut self, t: &Transition<T>) -> Result<()> {
        let n = self.obs_dims.len();
        let check = |what: &str, rows: &[Vec<T>], dims: &[usize]| -> Result<()> {
            if rows.len() != n || rows.iter().zip(dims).any(|(r, &d)| r.len() != d) {
                let got: Vec<usize> = rows.iter().map(Vec::len).collect();
                return Err(MarlError::Shape(format!("{what} widths {got:?}, expected {dims:?}")));
            }
            Ok(())
        };
        check("observation", &t.obs, &self.obs_dims)?;
        check("action", &t.actions, &self.action_dims)?;
        check("next observation", &t.next_obs, &self.obs_dims)?;
        if t.rewards.len() != n {
            return Err(MarlError::Shape(format!("{} rewards for {n} agents", t.rewards.len())));
        }
        let row = t
            .obs
            .iter()
            .chain(&t.actions)
            .flatten()
            .chain(&t.rewards)
            .chain(t.next_obs.iter().flatten())
            .copied();
        if self.len < self.capacity {
            self.data.extend(row);
            self.done.push(t.done);
            self.len += 1;
        } else {
            let start = self.next * self.stride;
            for (slot, v) in self.data[start..start + self.stride].iter_mut().zip(row) {
                *slot = v;
            }
            self.done[self.next] = t.done;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    /// Record at storage slot `index`.
    pub fn get(&self, index: usize) -> Transition<T> {
        let row = &self.data[index * self.stride..(index + 1) * self.stride];
        let mut at = 0;
        let mut take = |d: usize| {
            let v = row[at..at + d].to_vec();
            at += d;
            v
        };
        let obs = self.obs_dims.iter().map(|&d| take(d)).collect();
        let actions = self.action_dims.iter().map(|&d| take(d)).collect();
        let rewards = take(self.obs_dims.len());
        let next_obs = self.obs_dims.iter().map(|&d| take(d)).collect();
        Transition {
            obs,
            actions,
            rewards,
            next_obs,
            done: self.done[index],
        }
    }

    /// Records from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = Transition<T>> + '_ {
        let start = if self.len < self.capacity { 0 } else { self.next };
        (0..self.len).map(move |k| self.get((start + k) % self.capacity))
    }

    /// `batch_size` records drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch<T>> {
        if !self.is_ready() {
            return Err(MarlError::NotReady {
                have: self.len,
                need: self.warmup.max(1),
            });
        }
        let items: Vec<Transition<T>> = (0..batch_size).map(|_| self.get(rng.random_range(0..self.len))).collect();
        Batch::from_transitions(&items)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(id: f64) -> Transition<f64> {
        Transition {
            obs: vec![vec![id, id], vec![id]],
            actions: vec![vec![-id], vec![-id, -id]],
            rewards: vec![id, 2.0 * id],
            next_obs: vec![vec![id + 0.5, id + 0.5], vec![id + 0.5]],
            done: id as i64 % 2 == 0,
        }
    }

    fn buffer(capacity: usize, warmup: usize) -> ReplayBuffer<f64> {
        ReplayBuffer::new(capacity, warmup, vec![2, 1], vec![1, 2]).unwrap()
    }

    #[test]
    fn round_trips_records() {
        let mut b = buffer(10, 1);
        for i in 0..3 {
            b.push(&tr(i as f64)).unwrap();
        }
        assert_eq!(b.get(1), tr(1.0));
        assert_eq!(b.iter().collect::<Vec<_>>(), vec![tr(0.0), tr(1.0), tr(2.0)]);
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = buffer(4, 1);
        for i in 0..7 {
            b.push(&tr(i as f64)).unwrap();
        }
        assert_eq!(b.len(), 4);
        let ids: Vec<f64> = b.iter().map(|t| t.rewards[0]).collect();
        assert_eq!(ids, vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn sampling_waits_for_warmup() {
        let mut b = buffer(100, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..4 {
            b.push(&tr(i as f64)).unwrap();
            assert!(matches!(b.sample(2, &mut rng), Err(MarlError::NotReady { need: 5, .. })));
        }
        b.push(&tr(4.0)).unwrap();
        let batch = b.sample(8, &mut rng).unwrap();
        assert_eq!(batch.len(), 8);
        assert_eq!(batch.obs[0].cols(), 2);
        assert_eq!(batch.actions[1].cols(), 2);
        for r in 0..8 {
            let id = batch.rewards.get(r, 0);
            assert_eq!(batch.rewards.get(r, 1), 2.0 * id);
            assert_eq!(batch.next_obs[1].get(r, 0), id + 0.5);
            assert_eq!(batch.done[r], id as i64 % 2 == 0);
        }
    }

    #[test]
    fn shape_checked() {
        let mut b = buffer(4, 1);
        let mut bad = tr(0.0);
        bad.obs[0].push(1.0);
        assert!(matches!(b.push(&bad), Err(MarlError::Shape(_))));
        let mut bad = tr(0.0);
        bad.rewards.pop();
        assert!(matches!(b.push(&bad), Err(MarlError::Shape(_))));
    }
}
