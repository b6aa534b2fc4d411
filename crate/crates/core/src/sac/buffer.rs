use ndarray::{Array1, Array2};
use rand::Rng;

use super::SacError;

/// One replay record. Observations are stored in single precision to keep
/// a full buffer in memory; actions are normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f32>,
    pub action: Vec<f64>,
    pub next_obs: Vec<f32>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub action: Array2<f64>,
    pub next_obs: Array2<f64>,
    pub reward: Array1<f64>,
    pub done: Array1<f64>,
}

/// FIFO ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            next: 0,
            pushed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total pushes since creation, including evicted ones.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Oldest-first view of the contents.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// `n` draws, uniform with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>, SacError> {
        if self.items.len() < n || n == 0 {
            return Err(SacError::BufferTooSmall {
                size: self.items.len(),
                requested: n,
            });
        }
        Ok((0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Batch, SacError> {
        let picks = self.sample(n, rng)?;
        let od = picks[0].obs.len();
        let ad = picks[0].action.len();
        let mut b = Batch {
            obs: Array2::zeros((n, od)),
            action: Array2::zeros((n, ad)),
            next_obs: Array2::zeros((n, od)),
            reward: Array1::zeros(n),
            done: Array1::zeros(n),
        };
        for (r, t) in picks.iter().enumerate() {
            for (c, v) in t.obs.iter().enumerate() {
                b.obs[[r, c]] = f64::from(*v);
            }
            for (c, v) in t.next_obs.iter().enumerate() {
                b.next_obs[[r, c]] = f64::from(*v);
            }
            for (c, v) in t.action.iter().enumerate() {
                b.action[[r, c]] = *v;
            }
            b.reward[r] = t.reward;
            b.done[r] = if t.done { 1.0 } else { 0.0 };
        }
        Ok(b)
    }
}
