//! Finite-size decoy-state estimation.
//!
//! Every observed count `x` is widened to an interval for its mean with
//! `δ_L = b/2 + sqrt(2bx + b²/4)` and `δ_U = b + sqrt(2bx + b²)`, where
//! `b = ln(1/ε)`. The two-decoy closed forms then turn those intervals into
//! bounds on the vacuum contribution `s0`, the single-photon contribution `s1`
//! and the single-photon error count `t` of an event class.
//!
//! Under [`FormulaSet::Corrected`] (the default) every returned interval is a
//! genuine bound on the corresponding true count:
//!
//! * `s0`: lower from the ν/ω difference, upper `τ0 e^ω n̄_ω / p_ω`;
//! * `s1`: lower from the μ/ν/ω combination, upper `τ1 (e^ν n̄_ν/p_ν - e^ω n̲_ω/p_ω)/(ν-ω)`;
//! * `t`: the same two forms applied to error counts.
//!
//! [`FormulaSet::Printed`] reproduces the literal published forms instead:
//! both sides of the fluctuation interval subtract, the `s1` upper side and
//! the `t` lower side reuse the other side's expression with the bars
//! swapped. Those sides are point estimates rather than bounds; the mode
//! exists for side-by-side comparison.

use serde::{Deserialize, Serialize};

use crate::config::Intensities;
use crate::error::{Error, Result};
use crate::tally::ClassCounts;
use crate::types::Intensity;

/// Which algebraic forms the estimators use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormulaSet {
    #[default]
    Corrected,
    Printed,
}

/// Estimator settings shared by every bound in one analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    /// Failure probability of each fluctuation interval.
    pub eps: f64,
    /// When false every δ is zero (asymptotic estimates).
    pub fluctuations: bool,
    pub formulas: FormulaSet,
}

impl Estimator {
    pub fn new(eps: f64) -> Self {
        Estimator {
            eps,
            fluctuations: true,
            formulas: FormulaSet::Corrected,
        }
    }

    pub fn asymptotic() -> Self {
        Estimator {
            eps: 0.5,
            fluctuations: false,
            formulas: FormulaSet::Corrected,
        }
    }

    pub fn with_formulas(mut self, f: FormulaSet) -> Self {
        self.formulas = f;
        self
    }

    /// Interval for the mean of an observed count.
    fn mean_interval(&self, x: u64) -> (f64, f64) {
        let x = x as f64;
        if !self.fluctuations {
            return (x, x);
        }
        let (dl, du) = deltas(x, self.eps);
        match self.formulas {
            FormulaSet::Corrected => ((x - dl).max(0.0), x + du),
            FormulaSet::Printed => (x - dl, x - du),
        }
    }
}

/// A lower/upper estimate around a point value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedCount {
    pub lower: f64,
    pub point: f64,
    pub upper: f64,
    /// A side was moved into the physical range.
    pub clamped: bool,
    /// The lower side ended above the upper side.
    pub inverted: bool,
}

impl BoundedCount {
    pub fn exact(x: f64) -> Self {
        BoundedCount {
            lower: x,
            point: x,
            upper: x,
            clamped: false,
            inverted: false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Clamps both sides into `[0, max]` and records what happened.
    fn clamped_to(lower: f64, point: f64, upper: f64, max: f64) -> Self {
        let lo = lower.clamp(0.0, max);
        let hi = upper.clamp(0.0, max);
        let clamped = lo != lower || hi != upper;
        let inverted = lo > hi;
        let point = if inverted {
            point.clamp(0.0, max)
        } else {
            point.clamp(lo, hi)
        };
        BoundedCount {
            lower: lo,
            point,
            upper: hi,
            clamped,
            inverted,
        }
    }
}

/// Lower/upper deviations `(δ_L, δ_U)` for an observed count.
pub fn deltas(x: f64, eps: f64) -> (f64, f64) {
    let b = (1.0 / eps).ln();
    let dl = b / 2.0 + (2.0 * b * x + b * b / 4.0).sqrt();
    let du = b + (2.0 * b * x + b * b).sqrt();
    (dl, du)
}

/// Interval `[x - δ_L, x + δ_U]` for the mean of a Bernoulli sum observed at
/// `x`, with the lower side clamped at 0.
///
/// ```
/// let iv = rfi_qkd::decoy::fluctuation_interval(1e6, 1e-10);
/// assert!((1e6 - iv.lower - 6797.663).abs() < 1e-3);
/// assert!((iv.upper - 1e6 - 6809.205).abs() < 1e-3);
/// ```
pub fn fluctuation_interval(x: f64, eps: f64) -> BoundedCount {
    let (dl, du) = deltas(x, eps);
    let lower = x - dl;
    BoundedCount {
        lower: lower.max(0.0),
        point: x,
        upper: x + du,
        clamped: lower < 0.0,
        inverted: false,
    }
}

/// Probability that the source emits `n` photons, averaged over intensities.
pub fn tau(n: u32, k: &Intensities) -> f64 {
    let fact: f64 = (1..=n).map(f64::from).product();
    Intensity::ALL
        .iter()
        .map(|&i| {
            let l = k.get(i);
            (-l.mean).exp() * l.mean.powi(n as i32) * l.prob / fact
        })
        .sum()
}

/// Per-intensity mean intervals divided by the selection probability and
/// scaled by `e^k`, i.e. the quantities that enter every decoy formula.
struct Scaled {
    lo: [f64; 3],
    hi: [f64; 3],
    point: [f64; 3],
}

fn scaled(counts: &[u64; 3], k: &Intensities, est: &Estimator) -> Result<Scaled> {
    let mut s = Scaled {
        lo: [0.0; 3],
        hi: [0.0; 3],
        point: [0.0; 3],
    };
    for i in Intensity::ALL {
        let lvl = k.get(i);
        if lvl.prob <= 0.0 {
            return Err(Error::DecoyPrecondition(
                "every intensity needs a positive selection probability",
            ));
        }
        let f = lvl.mean.exp() / lvl.prob;
        let (lo, hi) = est.mean_interval(counts[i.index()]);
        s.lo[i.index()] = f * lo;
        s.hi[i.index()] = f * hi;
        s.point[i.index()] = f * counts[i.index()] as f64;
    }
    Ok(s)
}

const MU: usize = 0;
const NU: usize = 1;
const OM: usize = 2;

fn decoy_order(k: &Intensities) -> Result<(f64, f64, f64)> {
    let (mu, nu, om) = (k.signal.mean, k.decoy.mean, k.vacuum.mean);
    if nu <= om {
        return Err(Error::DecoyPrecondition(
            "decoy intensity must exceed vacuum intensity",
        ));
    }
    Ok((mu, nu, om))
}

/// `τ0/(ν-ω) (ν e^ω a_ω - ω e^ν b_ν)`; `a`, `b` already carry `e^k/p_k`.
fn vacuum_form(k: &Intensities, om_term: f64, nu_term: f64) -> f64 {
    let (nu, om) = (k.decoy.mean, k.vacuum.mean);
    tau(0, k) / (nu - om) * (nu * om_term - om * nu_term)
}

/// `μτ1/(μ(ν-ω)-(ν²-ω²)) [a_ν - b_ω + (ν²-ω²)/μ² (s0/τ0 - c_μ)]`.
fn three_intensity_form(k: &Intensities, nu_term: f64, om_term: f64, s0: f64, mu_term: f64) -> f64 {
    let (mu, nu, om) = (k.signal.mean, k.decoy.mean, k.vacuum.mean);
    let d2 = nu * nu - om * om;
    mu * tau(1, k) / (mu * (nu - om) - d2)
        * (nu_term - om_term + d2 / (mu * mu) * (s0 / tau(0, k) - mu_term))
}

/// `τ1/(ν-ω) (a_ν - b_ω)`.
fn two_intensity_form(k: &Intensities, nu_term: f64, om_term: f64) -> f64 {
    let (nu, om) = (k.decoy.mean, k.vacuum.mean);
    tau(1, k) / (nu - om) * (nu_term - om_term)
}

/// Bounds on the number of detections caused by vacuum emissions.
pub fn vacuum_bound(class: &ClassCounts, k: &Intensities, est: &Estimator) -> Result<BoundedCount> {
    decoy_order(k)?;
    let s = scaled(&class.detected, k, est)?;
    let lower = vacuum_form(k, s.lo[OM], s.hi[NU]);
    let point = vacuum_form(k, s.point[OM], s.point[NU]);
    let upper = match est.formulas {
        FormulaSet::Corrected => tau(0, k) * s.hi[OM],
        FormulaSet::Printed => vacuum_form(k, s.hi[OM], s.lo[NU]),
    };
    Ok(BoundedCount::clamped_to(
        lower,
        point,
        upper,
        class.total_detected() as f64,
    ))
}

fn check_signal_gap(k: &Intensities) -> Result<()> {
    let (mu, nu, om) = decoy_order(k)?;
    if mu * (nu - om) <= nu * nu - om * om {
        return Err(Error::DecoyPrecondition(
            "need mu(nu - omega) > nu^2 - omega^2",
        ));
    }
    Ok(())
}

/// Bounds on the number of detections caused by single-photon emissions.
pub fn single_photon_bound(
    class: &ClassCounts,
    s0: &BoundedCount,
    k: &Intensities,
    est: &Estimator,
) -> Result<BoundedCount> {
    check_signal_gap(k)?;
    let s = scaled(&class.detected, k, est)?;
    let lower = three_intensity_form(k, s.lo[NU], s.hi[OM], s0.lower, s.hi[MU]);
    let point = three_intensity_form(k, s.point[NU], s.point[OM], s0.point, s.point[MU]);
    let upper = match est.formulas {
        FormulaSet::Corrected => two_intensity_form(k, s.hi[NU], s.lo[OM]),
        FormulaSet::Printed => three_intensity_form(k, s.hi[NU], s.lo[OM], s0.upper, s.lo[MU]),
    };
    Ok(BoundedCount::clamped_to(
        lower,
        point,
        upper,
        class.total_detected() as f64,
    ))
}

/// Bounds on the number of errors among single-photon detections.
///
/// `class` carries the error counts in its `errors` field.
pub fn error_count_bound(
    class: &ClassCounts,
    k: &Intensities,
    est: &Estimator,
) -> Result<BoundedCount> {
    check_signal_gap(k)?;
    let m = scaled(&class.errors, k, est)?;
    let upper = two_intensity_form(k, m.hi[NU], m.lo[OM]);
    let point = two_intensity_form(k, m.point[NU], m.point[OM]);
    let lower = match est.formulas {
        FormulaSet::Corrected => {
            let t0 = vacuum_form(k, m.lo[OM], m.hi[NU]).max(0.0);
            three_intensity_form(k, m.lo[NU], m.hi[OM], t0, m.hi[MU])
        }
        FormulaSet::Printed => two_intensity_form(k, m.lo[NU], m.hi[OM]),
    };
    Ok(BoundedCount::clamped_to(
        lower,
        point,
        upper,
        class.total_errors() as f64,
    ))
}

/// Single-photon error-rate interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub lower: f64,
    pub upper: f64,
    /// The single-photon lower bound was zero, so the upper side was forced to 1.
    pub degenerate: bool,
}

impl RateBound {
    pub fn exact(e: f64) -> Self {
        RateBound {
            lower: e,
            upper: e,
            degenerate: false,
        }
    }
}

/// `e̲ = t̲ / s̄1`, `ē = t̄ / s̲1`, both clamped to [0, 1].
pub fn single_photon_error_rate(t: &BoundedCount, s1: &BoundedCount) -> RateBound {
    let lower = if s1.upper > 0.0 {
        (t.lower / s1.upper).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (upper, degenerate) = if s1.lower > 0.0 {
        ((t.upper / s1.lower).clamp(0.0, 1.0), false)
    } else {
        (1.0, true)
    };
    RateBound {
        lower: lower.min(upper),
        upper,
        degenerate,
    }
}

/// Error-rate interval whose lower side divides the two lower-form
/// estimates, `t̲ / s̲1`.
///
/// Both numerator and denominator drop the same multi-photon terms, so the
/// truncation bias cancels in the ratio; dividing by `s̄1` instead would
/// shrink the lower side by the full `s1` interval width.
pub fn matched_error_rate(t: &BoundedCount, s1: &BoundedCount) -> RateBound {
    let mut r = single_photon_error_rate(t, s1);
    if s1.lower > 0.0 {
        r.lower = (t.lower / s1.lower).clamp(0.0, r.upper);
    }
    r
}
