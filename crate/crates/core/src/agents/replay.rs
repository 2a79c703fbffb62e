use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

pub const STATE_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Transition<S> {
    pub state: [S; STATE_DIM],
    /// Actor-space action in [-1, 1].
    pub action: S,
    pub reward: S,
    pub next: [S; STATE_DIM],
}

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ReplayBuffer<S> {
    capacity: usize,
    items: Vec<Transition<S>>,
    next: usize,
}

impl<S: Scalar> ReplayBuffer<S> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be > 0");
        Self {
            capacity,
            items: Vec::new(),
            next: 0,
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

    pub fn push(&mut self, t: Transition<S>) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `None` until the buffer holds at least `batch` transitions.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Option<Vec<Transition<S>>> {
        if batch == 0 || self.items.len() < batch {
            return None;
        }
        Some((0..batch).map(|_| self.items[rng.random_range(0..self.items.len())]).collect())
    }
}
