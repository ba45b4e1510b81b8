//! Label enumerations shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// A state prepared by Alice.
///
/// The 4-state protocol only ever prepares these four states; there is no
/// `X1` or `Y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StateLabel {
    Z0,
    Z1,
    X0,
    Y0,
}

impl StateLabel {
    pub const ALL: [StateLabel; 4] = [
        StateLabel::Z0,
        StateLabel::Z1,
        StateLabel::X0,
        StateLabel::Y0,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_z(self) -> bool {
        matches!(self, StateLabel::Z0 | StateLabel::Z1)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StateLabel::Z0 => "Z0",
            StateLabel::Z1 => "Z1",
            StateLabel::X0 => "X0",
            StateLabel::Y0 => "Y0",
        }
    }
}

/// A measurement basis available to Bob. There is no Y basis at the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BasisLabel {
    Z,
    X,
}

impl BasisLabel {
    pub const ALL: [BasisLabel; 2] = [BasisLabel::Z, BasisLabel::X];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BasisLabel::Z => "Z",
            BasisLabel::X => "X",
        }
    }
}

/// Which of the three decoy intensities a pulse was sent with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Intensity {
    /// Signal intensity, μ.
    Signal,
    /// Weak decoy, ν.
    Decoy,
    /// Vacuum (or near-vacuum) decoy, ω.
    Vacuum,
}

impl Intensity {
    pub const ALL: [Intensity; 3] = [Intensity::Signal, Intensity::Decoy, Intensity::Vacuum];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Label used in tally files.
    pub fn as_str(self) -> &'static str {
        match self {
            Intensity::Signal => "mu",
            Intensity::Decoy => "nu",
            Intensity::Vacuum => "omega",
        }
    }
}

macro_rules! impl_label_parsing {
    ($ty:ty, $what:literal, { $($pat:pat => $val:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $($pat => Ok($val),)+
                    other => Err(Error::UnknownLabel { kind: $what, label: other.to_string() }),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

impl_label_parsing!(StateLabel, "state", {
    "Z0" | "z0" => StateLabel::Z0,
    "Z1" | "z1" => StateLabel::Z1,
    "X0" | "x0" => StateLabel::X0,
    "Y0" | "y0" => StateLabel::Y0,
});

impl_label_parsing!(BasisLabel, "basis", {
    "Z" | "z" => BasisLabel::Z,
    "X" | "x" => BasisLabel::X,
});

impl_label_parsing!(Intensity, "intensity", {
    "mu" | "signal" => Intensity::Signal,
    "nu" | "decoy" => Intensity::Decoy,
    "omega" | "vacuum" => Intensity::Vacuum,
});

/// Identifies one of the 24 tally cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub state: StateLabel,
    pub basis: BasisLabel,
    pub intensity: Intensity,
}

impl CellId {
    pub fn new(state: StateLabel, basis: BasisLabel, intensity: Intensity) -> Self {
        CellId {
            state,
            basis,
            intensity,
        }
    }

    /// All 24 cells in canonical (state, basis, intensity) order.
    pub fn all() -> impl Iterator<Item = CellId> {
        StateLabel::ALL.into_iter().flat_map(|s| {
            BasisLabel::ALL.into_iter().flat_map(move |b| {
                Intensity::ALL
                    .into_iter()
                    .map(move |k| CellId::new(s, b, k))
            })
        })
    }

    /// Position in canonical order, 0..24.
    pub fn ordinal(self) -> usize {
        (self.state.index() * 2 + self.basis.index()) * 3 + self.intensity.index()
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.state, self.basis, self.intensity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_ordinals_are_dense() {
        let ords: Vec<usize> = CellId::all().map(CellId::ordinal).collect();
        assert_eq!(ords, (0..24).collect::<Vec<_>>());
    }

    #[test]
    fn labels_round_trip_through_text() {
        for c in CellId::all() {
            assert_eq!(c.state.as_str().parse::<StateLabel>().unwrap(), c.state);
            assert_eq!(c.basis.as_str().parse::<BasisLabel>().unwrap(), c.basis);
            assert_eq!(
                c.intensity.as_str().parse::<Intensity>().unwrap(),
                c.intensity
            );
        }
        assert!("X1".parse::<StateLabel>().is_err());
        assert!("Y".parse::<BasisLabel>().is_err());
    }
}
