use ndarray::{Array1, Array2};
use rand::Rng;

use crate::env::{scale_observation, ACTION_DIM, OBS_DIM};

/// One environment step. Observations are stored raw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: [f64; OBS_DIM],
    pub a: [f64; ACTION_DIM],
    pub r: f64,
    pub s_next: [f64; OBS_DIM],
    pub done: bool,
}

/// Network-ready minibatch; states are scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    /// 1.0 for terminal transitions.
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn from_transitions<'a>(items: impl IntoIterator<Item = &'a Transition>) -> Self {
        let items: Vec<&Transition> = items.into_iter().collect();
        let n = items.len();
        let mut states = Array2::zeros((n, OBS_DIM));
        let mut next_states = Array2::zeros((n, OBS_DIM));
        let mut actions = Array2::zeros((n, ACTION_DIM));
        let mut rewards = Array1::zeros(n);
        let mut dones = Array1::zeros(n);
        for (i, t) in items.iter().enumerate() {
            for (j, v) in scale_observation(&t.s).into_iter().enumerate() {
                states[[i, j]] = v;
            }
            for (j, v) in scale_observation(&t.s_next).into_iter().enumerate() {
                next_states[[i, j]] = v;
            }
            for (j, &v) in t.a.iter().enumerate() {
                actions[[i, j]] = v;
            }
            rewards[i] = t.r;
            dones[i] = if t.done { 1.0 } else { 0.0 };
        }
        Batch {
            states,
            actions,
            rewards,
            next_states,
            dones,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Bounded FIFO store with uniform sampling (with replacement).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    /// Slot the next insertion overwrites once full.
    head: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            data: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            head: 0,
            inserted: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total insertions, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Stored transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.data.split_at(self.head);
        older.iter().chain(newer.iter())
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.data.get(i)
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(!self.data.is_empty(), "cannot sample an empty buffer");
        (0..n).map(|_| rng.random_range(0..self.data.len())).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Batch {
        let idx = self.sample_indices(n, rng);
        Batch::from_transitions(idx.iter().map(|&i| &self.data[i]))
    }

    pub(crate) fn raw_parts(&self) -> (&[Transition], usize) {
        (&self.data, self.head)
    }

    pub(crate) fn from_raw_parts(
        data: Vec<Transition>,
        capacity: usize,
        head: usize,
        inserted: u64,
    ) -> Self {
        ReplayBuffer {
            data,
            capacity,
            head,
            inserted,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(r: f64) -> Transition {
        Transition {
            s: [0.0; OBS_DIM],
            a: [0.0; ACTION_DIM],
            r,
            s_next: [0.0; OBS_DIM],
            done: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(tr(i as f64));
        }
        assert_eq!(b.len(), 3);
        let rs: Vec<f64> = b.iter().map(|t| t.r).collect();
        assert_eq!(rs, vec![2.0, 3.0, 4.0]);
        assert_eq!(b.inserted(), 5);
    }

    #[test]
    fn batch_scales_states() {
        let mut t = tr(1.0);
        t.s[0] = 5000.0;
        t.s[6] = 90.0;
        t.done = true;
        let b = Batch::from_transitions([&t]);
        assert_eq!(b.states[[0, 0]], 0.5);
        assert_eq!(b.states[[0, 6]], 0.5);
        assert_eq!(b.dones[0], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut buf = ReplayBuffer::new(4);
        buf.push(t);
        assert_eq!(buf.sample(3, &mut rng).len(), 3);
    }
}
