use rand::Rng;

use super::RlError;

/// One (state, action, reward, next-state) record. `done` marks the end
/// of a refinement horizon; targets do not bootstrap past it.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Bounded ring store with a uniform sampler; once full, each push
/// overwrites the oldest transition.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    store: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        ReplayBuffer {
            store: Vec::with_capacity(capacity),
            capacity,
            next: 0,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.store.len() < self.capacity {
            self.store.push(t);
        } else {
            self.store[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Contents oldest to newest.
    pub fn iter_in_order(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.store.len() < self.capacity {
            0
        } else {
            self.next
        };
        self.store[split..].iter().chain(self.store[..split].iter())
    }

    /// Uniform minibatch without replacement.
    pub fn sample<R: Rng>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>, RlError> {
        if self.store.len() < batch {
            return Err(RlError::BufferTooSmall {
                len: self.store.len(),
                batch,
            });
        }
        let mut idx: Vec<usize> = (0..self.store.len()).collect();
        for i in 0..batch {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        Ok(idx[..batch].iter().map(|&i| &self.store[i]).collect())
    }
}
