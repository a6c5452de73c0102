use crate::error::{Error, Result};

use super::integrate::IntegratorState;

/// `K + 1` uniformly spaced snapshot times including both endpoints.
pub fn checkpoint_plan(tspan: (f64, f64), k: usize) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(Error::InvalidArgument("checkpoint count must be at least 1".into()));
    }
    let (t0, t1) = tspan;
    let h = (t1 - t0) / k as f64;
    Ok((0..=k).map(|i| if i == k { t1 } else { t0 + i as f64 * h }).collect())
}

/// Uniform checkpoints of a forward pass.
///
/// A snapshot is the full integrator state at the first accepted node at or
/// after each planned time, so a segment can be replayed exactly. Planned
/// times that fall into the same step collapse to one snapshot.
#[derive(Debug, Clone)]
pub struct CheckpointStore<T> {
    pub capacity: usize,
    pub plan: Vec<f64>,
    pub snapshots: Vec<IntegratorState<T>>,
    next: usize,
}

impl<T: Clone> CheckpointStore<T> {
    pub fn new(tspan: (f64, f64), k: usize) -> Result<Self> {
        Ok(Self {
            capacity: k,
            plan: checkpoint_plan(tspan, k)?,
            snapshots: Vec::new(),
            next: 0,
        })
    }

    /// Offers a freshly accepted node; keeps it if it reaches the next planned time.
    pub fn offer(&mut self, state: &IntegratorState<T>) {
        if self.next >= self.plan.len() || state.t < self.plan[self.next] {
            return;
        }
        while self.next < self.plan.len() && self.plan[self.next] <= state.t {
            self.next += 1;
        }
        if self.snapshots.last().is_none_or(|s| state.t > s.t) {
            self.snapshots.push(state.clone());
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Segment `i` spans snapshots `i` and `i + 1`.
    pub fn segments(&self) -> usize {
        self.snapshots.len().saturating_sub(1)
    }
}
