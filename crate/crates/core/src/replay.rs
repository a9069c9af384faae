//! Transitions and the fixed-capacity FIFO replay buffer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Real,
    Virtual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
    pub source: Source,
}

impl Transition {
    pub fn new(s: Vec<f64>, a: Vec<f64>, r: f64, s_next: Vec<f64>, done: bool, source: Source) -> Result<Self> {
        if s.len() != s_next.len() {
            return Err(Error::shape("Transition.s_next", s.len(), s_next.len()));
        }
        if !r.is_finite() {
            return Err(Error::NonFinite("Transition.r"));
        }
        Ok(Self {
            s,
            a,
            r,
            s_next,
            done,
            source,
        })
    }
}

/// Ring buffer; once full, each push overwrites the oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    write_index: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("buffer.capacity", "must be >= 1"));
        }
        Ok(Self {
            capacity,
            storage: Vec::new(),
            write_index: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.write_index] = t;
        }
        self.write_index = (self.write_index + 1) % self.capacity;
    }

    /// Contents from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity { 0 } else { self.write_index };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }

    /// Storage order, which differs from insertion order after wrap-around.
    pub fn as_slice(&self) -> &[Transition] {
        &self.storage
    }

    /// Uniform sampling with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Result<Vec<&'a Transition>> {
        if self.storage.is_empty() {
            return Err(Error::Precondition("cannot sample from an empty buffer".into()));
        }
        let len = self.storage.len();
        Ok((0..n).map(|_| &self.storage[rng.random_range(0..len)]).collect())
    }
}
