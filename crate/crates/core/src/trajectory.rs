//! Time-stamped snapshots shared by both solvers.

use serde::{Deserialize, Serialize};

/// Per-snapshot scalar diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub mass: f64,
    pub total_variation: f64,
    /// Smallest inter-particle gap; only meaningful for particle states.
    pub min_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot<S> {
    pub time: f64,
    pub state: S,
    pub diagnostics: Diagnostics,
}

/// Snapshots at strictly increasing times, the first one at the initial time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S> {
    snapshots: Vec<Snapshot<S>>,
}

impl<S> Trajectory<S> {
    pub fn new() -> Self {
        Trajectory {
            snapshots: Vec::new(),
        }
    }

    /// Appends a snapshot. Panics if `time` does not exceed the last one.
    pub fn push(&mut self, time: f64, state: S, diagnostics: Diagnostics) {
        if let Some(last) = self.snapshots.last() {
            assert!(
                time > last.time,
                "snapshot times must increase ({time} after {})",
                last.time
            );
        }
        self.snapshots.push(Snapshot {
            time,
            state,
            diagnostics,
        });
    }

    pub fn snapshots(&self) -> &[Snapshot<S>] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn first(&self) -> Option<&Snapshot<S>> {
        self.snapshots.first()
    }

    pub fn last(&self) -> Option<&Snapshot<S>> {
        self.snapshots.last()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.snapshots.iter().map(|s| s.time)
    }

    pub fn map<T>(&self, mut f: impl FnMut(&S) -> T) -> Trajectory<T> {
        Trajectory {
            snapshots: self
                .snapshots
                .iter()
                .map(|s| Snapshot {
                    time: s.time,
                    state: f(&s.state),
                    diagnostics: s.diagnostics,
                })
                .collect(),
        }
    }
}

impl<S> Default for Trajectory<S> {
    fn default() -> Self {
        Trajectory::new()
    }
}
