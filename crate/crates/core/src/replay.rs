//! Proportional prioritized replay backed by a sum tree.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReplayError {
    #[error("replay capacity {0} must be a power of two")]
    Capacity(usize),
    #[error("cannot sample {requested} from a buffer holding {count}")]
    Underfilled { requested: usize, count: usize },
    #[error("replay index {index} outside 0..{count}")]
    Index { index: usize, count: usize },
    #[error("{indices} indices but {errors} td errors")]
    LengthMismatch { indices: usize, errors: usize },
}

/// One stored step. Observations are shared so consecutive transitions hold
/// a single copy of the frame between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Arc<[f32]>,
    pub action: usize,
    pub reward: f32,
    pub next_state: Arc<[f32]>,
    pub terminal: bool,
}

/// Binary tree of partial sums (and maxima) over `capacity` leaves.
///
/// Internal nodes are always recomputed from their two children rather than
/// adjusted by deltas, so rounding error never accumulates along a path.
#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    sums: Vec<f64>,
    maxes: Vec<f64>,
}

impl SumTree {
    pub fn new(capacity: usize) -> Result<Self, ReplayError> {
        if capacity == 0 || !capacity.is_power_of_two() {
            return Err(ReplayError::Capacity(capacity));
        }
        Ok(Self { capacity, sums: vec![0.0; 2 * capacity], maxes: vec![0.0; 2 * capacity] })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total(&self) -> f64 {
        self.sums[1]
    }

    pub fn max(&self) -> f64 {
        self.maxes[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.sums[self.capacity + leaf]
    }

    pub fn leaves(&self) -> &[f64] {
        &self.sums[self.capacity..]
    }

    pub fn set(&mut self, leaf: usize, priority: f64) {
        assert!(leaf < self.capacity, "leaf {leaf} out of range");
        assert!(priority >= 0.0 && priority.is_finite(), "priority {priority}");
        let mut node = self.capacity + leaf;
        self.sums[node] = priority;
        self.maxes[node] = priority;
        while node > 1 {
            node /= 2;
            self.sums[node] = self.sums[2 * node] + self.sums[2 * node + 1];
            self.maxes[node] = self.maxes[2 * node].max(self.maxes[2 * node + 1]);
        }
    }

    /// Leaf whose cumulative range contains `prefix` (`0 <= prefix < total`).
    /// Never returns a zero-priority leaf while the total is positive.
    pub fn find(&self, prefix: f64) -> usize {
        let mut node = 1;
        let mut rest = prefix.max(0.0);
        while node < self.capacity {
            let left = 2 * node;
            if rest < self.sums[left] || self.sums[left + 1] <= 0.0 {
                node = left;
            } else {
                rest -= self.sums[left];
                node = left + 1;
            }
        }
        node - self.capacity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    pub capacity: usize,
    pub alpha: f64,
    pub priority_eps: f64,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self { capacity: 1 << 15, alpha: 0.6, priority_eps: 0.01, beta_start: 0.4, beta_end: 1.0 }
    }
}

impl ReplayConfig {
    /// Linear β schedule over `total` steps.
    pub fn beta_at(&self, step: u64, total: u64) -> f64 {
        let frac = if total == 0 { 1.0 } else { (step as f64 / total as f64).min(1.0) };
        self.beta_start + (self.beta_end - self.beta_start) * frac
    }

    pub fn priority(&self, td_error: f64) -> f64 {
        (td_error.abs() + self.priority_eps).powf(self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub indices: Vec<usize>,
    pub weights: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayStats {
    pub count: usize,
    pub total_priority: f64,
    pub max_priority: f64,
}

#[derive(Debug, Clone)]
pub struct PrioritizedReplay<T = Transition> {
    config: ReplayConfig,
    tree: SumTree,
    items: Vec<T>,
    cursor: usize,
}

impl<T> PrioritizedReplay<T> {
    pub fn new(config: ReplayConfig) -> Result<Self, ReplayError> {
        Ok(Self { tree: SumTree::new(config.capacity)?, items: Vec::new(), cursor: 0, config })
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn tree(&self) -> &SumTree {
        &self.tree
    }

    pub fn get(&self, index: usize) -> Option<&T> {
        self.items.get(index)
    }

    pub fn stats(&self) -> ReplayStats {
        ReplayStats { count: self.len(), total_priority: self.tree.total(), max_priority: self.tree.max() }
    }

    /// Store at the current max priority (1 when empty), overwriting the
    /// oldest item once full. Returns the slot used.
    pub fn push(&mut self, item: T) -> usize {
        let slot = self.cursor;
        if slot < self.items.len() {
            self.items[slot] = item;
            // The overwritten item's priority must not feed the max.
            self.tree.set(slot, 0.0);
        } else {
            self.items.push(item);
        }
        let max = self.tree.max();
        self.tree.set(slot, if max > 0.0 { max } else { 1.0 });
        self.cursor = (self.cursor + 1) % self.config.capacity;
        slot
    }

    /// Stratified proportional sample of `n` slots with normalized
    /// importance weights `(count * P(k))^-beta / max`.
    pub fn sample(&self, n: usize, beta: f64, rng: &mut impl Rng) -> Result<Sample, ReplayError> {
        let count = self.len();
        if n == 0 || count < n {
            return Err(ReplayError::Underfilled { requested: n, count });
        }
        let total = self.tree.total();
        let segment = total / n as f64;
        let mut indices = Vec::with_capacity(n);
        let mut raw = Vec::with_capacity(n);
        for k in 0..n {
            let lo = segment * k as f64;
            let u = rng.gen_range(lo..lo + segment);
            let idx = self.tree.find(u).min(count - 1);
            let p = self.tree.get(idx) / total;
            indices.push(idx);
            raw.push((count as f64 * p).powf(-beta));
        }
        let max = raw.iter().copied().fold(f64::MIN, f64::max);
        let weights = raw.iter().map(|w| (w / max) as f32).collect();
        Ok(Sample { indices, weights })
    }

    /// Refresh priorities as `(|td| + eps)^alpha`.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f32]) -> Result<(), ReplayError> {
        if indices.len() != td_errors.len() {
            return Err(ReplayError::LengthMismatch { indices: indices.len(), errors: td_errors.len() });
        }
        for (&i, &td) in indices.iter().zip(td_errors) {
            self.set_priority(i, self.config.priority(td as f64))?;
        }
        Ok(())
    }

    /// Set a raw leaf priority.
    pub fn set_priority(&mut self, index: usize, priority: f64) -> Result<(), ReplayError> {
        if index >= self.len() {
            return Err(ReplayError::Index { index, count: self.len() });
        }
        self.tree.set(index, priority);
        Ok(())
    }
}
