//! A 12-cell deterministic corridor with exits at both ends, used to check
//! the learner against an exactly solvable problem.
//!
//! Cells `0` and `11` are exits. Action 0 moves left, action 1 moves right.
//! Reaching the left exit pays `LEFT_EXIT`, the right exit pays `RIGHT_EXIT`,
//! every other move pays 0. Episodes start in a uniformly chosen interior
//! cell, so under discounting the best direction depends on the cell.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{EnvStep, Environment, TrainError};

pub const CELLS: usize = 12;
pub const ACTIONS: usize = 2;
pub const LEFT_EXIT: f64 = 0.5;
pub const RIGHT_EXIT: f64 = 1.0;

/// Successor cell, reward and terminal flag for `action` in `cell`.
pub fn transition(cell: usize, action: usize) -> (usize, f64, bool) {
    assert!((1..CELLS - 1).contains(&cell), "cell {cell} is not an interior cell");
    let next = if action == 0 { cell - 1 } else { cell + 1 };
    match next {
        0 => (next, LEFT_EXIT, true),
        n if n == CELLS - 1 => (next, RIGHT_EXIT, true),
        n => (n, 0.0, false),
    }
}

/// Optimal action values by value iteration, `[cell][action]`; exit rows are 0.
pub fn value_iteration(gamma: f64) -> Vec<[f64; ACTIONS]> {
    let mut v = [0.0f64; CELLS];
    let mut q = vec![[0.0; ACTIONS]; CELLS];
    loop {
        let mut delta = 0.0f64;
        for s in 1..CELLS - 1 {
            for a in 0..ACTIONS {
                let (n, r, term) = transition(s, a);
                q[s][a] = r + if term { 0.0 } else { gamma * v[n] };
            }
            let best = q[s][0].max(q[s][1]);
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if delta < 1e-12 {
            return q;
        }
    }
}

/// Greedy action per interior cell under `q`; `None` on exact ties.
pub fn greedy_policy(q: &[[f64; ACTIONS]]) -> Vec<Option<usize>> {
    (1..CELLS - 1)
        .map(|s| match q[s][0].partial_cmp(&q[s][1]) {
            Some(std::cmp::Ordering::Greater) => Some(0),
            Some(std::cmp::Ordering::Less) => Some(1),
            _ => None,
        })
        .collect()
}

pub fn one_hot(cell: usize) -> Vec<f32> {
    let mut v = vec![0.0; CELLS];
    v[cell] = 1.0;
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorridorEnv {
    cell: usize,
}

impl Default for CorridorEnv {
    fn default() -> Self {
        Self { cell: CELLS / 2 }
    }
}

impl CorridorEnv {
    pub fn cell(&self) -> usize {
        self.cell
    }
}

impl Environment for CorridorEnv {
    type State = usize;

    fn observe(&self) -> Result<Vec<f32>, TrainError> {
        Ok(one_hot(self.cell))
    }

    fn step(&mut self, action: usize, _rng: &mut ChaCha8Rng) -> Result<EnvStep, TrainError> {
        if action >= ACTIONS {
            return Err(TrainError::Config(format!("corridor action {action} out of range")));
        }
        let (next, reward, terminal) = transition(self.cell, action);
        self.cell = next;
        Ok(EnvStep { reward, terminal })
    }

    fn respawn(&mut self, rng: &mut ChaCha8Rng) {
        self.cell = rng.gen_range(1..CELLS - 1);
    }

    fn initial_state(&self) -> usize {
        CELLS / 2
    }

    fn save(&self) -> usize {
        self.cell
    }

    fn restore(&mut self, state: usize) {
        self.cell = state;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_match_closed_form() {
        let g: f64 = 0.9;
        let q = value_iteration(g);
        for s in 1..CELLS - 1 {
            let right = RIGHT_EXIT * g.powi((CELLS - 2 - s) as i32);
            let left = LEFT_EXIT * g.powi((s - 1) as i32);
            assert!((q[s][0].max(q[s][1]) - left.max(right)).abs() < 1e-9, "cell {s}");
        }
        let policy = greedy_policy(&q);
        assert_eq!(&policy[..2], &[Some(0), Some(0)]);
        assert!(policy[2..].iter().all(|&a| a == Some(1)));
    }
}
