//! Observed detection and error counts.

use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::types::{BasisLabel, CellId, Intensity, StateLabel};

/// Counts for one (state, basis, intensity) cell.
///
/// `sent` is the number of pulses Alice emitted with that state and
/// intensity; both basis cells of a (state, intensity) pair carry the same
/// value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCount {
    pub sent: u64,
    pub detected: u64,
    pub errors: u64,
}

impl CellCount {
    pub fn merge(&mut self, other: &CellCount) {
        self.sent += other.sent;
        self.detected += other.detected;
        self.errors += other.errors;
    }
}

/// The 24 observed cells. This is the only input the estimators see.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedTallies {
    cells: [CellCount; 24],
}

impl Index<CellId> for ObservedTallies {
    type Output = CellCount;

    fn index(&self, id: CellId) -> &CellCount {
        &self.cells[id.ordinal()]
    }
}

impl IndexMut<CellId> for ObservedTallies {
    fn index_mut(&mut self, id: CellId) -> &mut CellCount {
        &mut self.cells[id.ordinal()]
    }
}

impl ObservedTallies {
    pub fn cell(&self, state: StateLabel, basis: BasisLabel, k: Intensity) -> &CellCount {
        &self[CellId::new(state, basis, k)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, &CellCount)> {
        CellId::all().map(move |id| (id, &self[id]))
    }

    /// Verifies `errors <= detected <= sent` for every cell.
    pub fn check(&self) -> Result<()> {
        for (id, c) in self.iter() {
            let reason = if c.detected > c.sent {
                "detected exceeds sent"
            } else if c.errors > c.detected {
                "errors exceed detected"
            } else {
                continue;
            };
            return Err(Error::InconsistentCell {
                cell: id,
                reason,
                sent: c.sent,
                detected: c.detected,
                errors: c.errors,
            });
        }
        Ok(())
    }

    /// Adds another tally set cell by cell.
    pub fn merge(&mut self, other: &ObservedTallies) {
        for (a, b) in self.cells.iter_mut().zip(other.cells.iter()) {
            a.merge(b);
        }
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a ObservedTallies>) -> ObservedTallies {
        let mut acc = ObservedTallies::default();
        for t in items {
            acc.merge(t);
        }
        acc
    }

    /// Total pulses emitted, counted once per (state, intensity) pair.
    pub fn pulses(&self) -> u64 {
        let mut n = 0;
        for s in StateLabel::ALL {
            for k in Intensity::ALL {
                let z = self.cell(s, BasisLabel::Z, k).sent;
                let x = self.cell(s, BasisLabel::X, k).sent;
                n += z.max(x);
            }
        }
        n
    }

    /// Pools the given states measured in `basis` into one event class.
    pub fn class(&self, states: &[StateLabel], basis: BasisLabel) -> ClassCounts {
        let mut out = ClassCounts::default();
        for &s in states {
            for k in Intensity::ALL {
                let c = self.cell(s, basis, k);
                out.detected[k.index()] += c.detected;
                out.errors[k.index()] += c.errors;
            }
        }
        out
    }
}

/// Detections and errors of one event class, split by intensity
/// (indexed by [`Intensity::index`]).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub detected: [u64; 3],
    pub errors: [u64; 3],
}

impl ClassCounts {
    pub fn detected(&self, k: Intensity) -> u64 {
        self.detected[k.index()]
    }

    pub fn errors(&self, k: Intensity) -> u64 {
        self.errors[k.index()]
    }

    pub fn total_detected(&self) -> u64 {
        self.detected.iter().sum()
    }

    pub fn total_errors(&self) -> u64 {
        self.errors.iter().sum()
    }

    /// Returns the error counts viewed as a detection class of their own.
    pub fn error_view(&self) -> ClassCounts {
        ClassCounts {
            detected: self.errors,
            errors: [0; 3],
        }
    }
}
