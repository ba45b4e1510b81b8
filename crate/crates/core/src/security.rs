//! Channel-quality statistics and Eve-information bounds.
//!
//! Correlators follow `⟨A B⟩ = 1 - 2 e`, where `e` is the rate of the
//! designated error outcome of the cell.

use serde::{Deserialize, Serialize};

use crate::decoy::RateBound;
use crate::keyrate::binary_entropy;

/// Closed real interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Interval { lower, upper }
    }

    pub fn point(x: f64) -> Self {
        Interval { lower: x, upper: x }
    }

    /// Lower bound on `|c|` over the interval.
    pub fn abs_lower(&self) -> f64 {
        abs_lower(self.lower, self.upper)
    }
}

/// Bounds on `C1`, `C2` and the resulting lower bound on `C44`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CBounds {
    pub c1: Interval,
    pub c2: Interval,
    pub c44_lower: f64,
}

/// Error-rate bounds of the four cells measured in X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XCellRates {
    pub z0: RateBound,
    pub z1: RateBound,
    pub x0: RateBound,
    pub y0: RateBound,
}

/// `C1 = e_Z0X + e_Z1X - 2 e_X0X`, `C2 = e_Z0X + e_Z1X - 2 e_Y0X`.
///
/// ```
/// let (c1, c2) = rfi_qkd::security::c1_c2_point(0.5, 0.5, 0.01, 0.5);
/// assert!((c1 - 0.98).abs() < 1e-15 && c2.abs() < 1e-15);
/// ```
pub fn c1_c2_point(e_z0x: f64, e_z1x: f64, e_x0x: f64, e_y0x: f64) -> (f64, f64) {
    let z = e_z0x + e_z1x;
    (z - 2.0 * e_x0x, z - 2.0 * e_y0x)
}

/// Interval bounds on `C1` and `C2` from error-rate bounds.
///
/// With `literal` set, the lower side of `C1` subtracts the upper Y0 rate
/// instead of the upper X0 rate, reproducing a known misprint.
pub fn c_bounds(e: &XCellRates, literal: bool) -> CBounds {
    let z_lo = e.z0.lower + e.z1.lower;
    let z_hi = e.z0.upper + e.z1.upper;
    let c1_sub = if literal { e.y0.upper } else { e.x0.upper };
    let c1 = Interval::new(z_lo - 2.0 * c1_sub, z_hi - 2.0 * e.x0.lower);
    let c2 = Interval::new(z_lo - 2.0 * e.y0.upper, z_hi - 2.0 * e.y0.lower);
    CBounds {
        c1,
        c2,
        c44_lower: c44_lower(&c1, &c2),
    }
}

/// Lower bound on `|c|` for `c ∈ [lower, upper]`.
///
/// ```
/// use rfi_qkd::security::abs_lower;
/// assert_eq!(abs_lower(0.1, 0.3), 0.1);
/// assert_eq!(abs_lower(-0.3, -0.1), 0.1);
/// assert_eq!(abs_lower(-0.1, 0.2), 0.0);
/// ```
pub fn abs_lower(lower: f64, upper: f64) -> f64 {
    if lower > 0.0 {
        lower
    } else if upper < 0.0 {
        -upper
    } else {
        0.0
    }
}

/// `sqrt(|C1|_L² + |C2|_L²)`, clamped to [0, 1].
pub fn c44_lower(c1: &Interval, c2: &Interval) -> f64 {
    c1.abs_lower().hypot(c2.abs_lower()).min(1.0)
}

/// Eve's information for the 4-state protocol, `h((1 - C44)/2)`.
pub fn ie_4state(c44: f64) -> f64 {
    binary_entropy((1.0 - c44.clamp(0.0, 1.0)) / 2.0)
}

/// Sum of the four squared XY-plane correlators.
pub fn c_6state(xx: f64, xy: f64, yx: f64, yy: f64) -> f64 {
    xx * xx + xy * xy + yx * yx + yy * yy
}

/// Eve's information for the 6-state protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixStateInfo {
    pub i_e: f64,
    pub u: f64,
    pub v: f64,
    /// The radicand under `v` was negative and was clamped to zero.
    pub radicand_clamped: bool,
}

/// `I_E = (1-E) h((1+u)/2) + E h((1+v)/2)` with
/// `u = min(sqrt(C/2)/(1-E), 1)` and `v = sqrt(C/2 - (1-E)² u²)/E`.
///
/// `literal` swaps the radicand for the misprinted `C/2 - (1 - E² u²)`.
pub fn ie_6state(c: f64, e_zz: f64, literal: bool) -> SixStateInfo {
    let half = (c / 2.0).max(0.0);
    let u = (half.sqrt() / (1.0 - e_zz)).min(1.0);
    let rad = if literal {
        half - (1.0 - e_zz * e_zz * u * u)
    } else {
        half - (1.0 - e_zz).powi(2) * u * u
    };
    // The standard radicand is zero whenever u < 1; ignore round-off there.
    let radicand_clamped = rad < -1e-12;
    let v = if e_zz > 0.0 {
        (rad.max(0.0).sqrt() / e_zz).min(1.0)
    } else {
        0.0
    };
    let i_e =
        (1.0 - e_zz) * binary_entropy((1.0 + u) / 2.0) + e_zz * binary_entropy((1.0 + v) / 2.0);
    SixStateInfo {
        i_e,
        u,
        v,
        radicand_clamped,
    }
}

/// `sqrt(⟨X_A X_B⟩² + ⟨Y_A X_B⟩²)`.
pub fn c_64(xx: f64, yx: f64) -> f64 {
    xx.hypot(yx)
}

/// Correlator interval `[1 - 2ē, 1 - 2e̲]` from an error-rate interval.
pub fn correlator(e: &RateBound) -> Interval {
    Interval::new(1.0 - 2.0 * e.upper, 1.0 - 2.0 * e.lower)
}
