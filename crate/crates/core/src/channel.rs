//! Analytic channel model: expected gains and error rates per tally cell.
//!
//! Detection follows the threshold-detector weak-coherent-pulse model. A pulse
//! of mean photon number `k` through a link of efficiency `η` clicks with
//! probability `Q = 1 - (1 - e_d) exp(-η k)`. Dark clicks carry a random bit;
//! signal clicks are wrong with the misalignment probability of the
//! (state, basis) pair.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::config::{ChannelParams, ProtocolConfig};
use crate::tally::{CellCount, ObservedTallies};
use crate::types::{BasisLabel, CellId, StateLabel};

/// Expected detection probability and error rate of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellExpectation {
    pub gain: f64,
    pub qber: f64,
}

/// End-to-end efficiency of the fiber plus the receiver path feeding `path`.
pub fn transmittance(distance_km: f64, path: BasisLabel, ch: &ChannelParams) -> f64 {
    let path_db = match path {
        BasisLabel::Z => ch.eta_z_db,
        BasisLabel::X => ch.eta_xy_db,
    };
    10f64.powf(-(ch.alpha_db_per_km * distance_km + path_db) / 10.0) * ch.detector_efficiency
}

/// Error probability for a state prepared at phase `prep` in the XY plane
/// and measured along phase `meas`, with Bob's frame rotated by `beta`.
///
/// Phases: X0 = 0, Y0 = π/2, X1 = π, Y1 = 3π/2; bases X = 0, Y = π/2. The
/// error is the outcome opposite to the prepared bit. The visibility
/// `1 - 2 e0` makes `beta = 0` reproduce the intrinsic error exactly.
pub fn plane_error(prep: f64, meas: f64, beta: f64, e0: f64) -> f64 {
    0.5 * (1.0 - (1.0 - 2.0 * e0) * (prep - meas - beta).cos())
}

/// Single-photon error probability of a cell before dark counts.
///
/// For Z states measured in X the designated error outcome is X1, so the
/// rate is 1/2 irrespective of the rotation.
pub fn misalignment_error(state: StateLabel, basis: BasisLabel, beta: f64, e0: f64) -> f64 {
    match (state, basis) {
        (StateLabel::Z0 | StateLabel::Z1, BasisLabel::Z) => e0,
        (StateLabel::Z0 | StateLabel::Z1, BasisLabel::X) => 0.5,
        // X0/Y0 in Z never reach the estimators, but they still click.
        (StateLabel::X0 | StateLabel::Y0, BasisLabel::Z) => 0.5,
        (StateLabel::X0, BasisLabel::X) => plane_error(0.0, 0.0, beta, e0),
        (StateLabel::Y0, BasisLabel::X) => plane_error(FRAC_PI_2, 0.0, beta, e0),
    }
}

/// Gain and QBER for a pulse of mean photon number `mean` through efficiency
/// `eta`, given the signal-click error probability `e_mis`.
pub fn gain_and_qber(eta: f64, mean: f64, e_mis: f64, dark_count: f64) -> CellExpectation {
    let signal = -(-eta * mean).exp_m1();
    // Written so that the vacuum case returns `dark_count` exactly.
    let gain = dark_count + (1.0 - dark_count) * signal;
    if gain <= 0.0 {
        return CellExpectation {
            gain: 0.0,
            qber: 0.5,
        };
    }
    let qber = ((dark_count / 2.0 + e_mis * signal) / gain).clamp(0.0, 1.0);
    CellExpectation { gain, qber }
}

pub fn cell_expectation(
    state: StateLabel,
    basis: BasisLabel,
    mean: f64,
    distance_km: f64,
    ch: &ChannelParams,
) -> CellExpectation {
    let eta = transmittance(distance_km, basis, ch);
    let e_mis = misalignment_error(state, basis, ch.beta, ch.e0);
    gain_and_qber(eta, mean, e_mis, ch.dark_count)
}

/// Expected counts for an event class, rounded to the nearest integer.
///
/// `sent` pulses are split to Bob's basis with probability `basis_prob`.
pub fn expected_cell(sent: f64, basis_prob: f64, exp: CellExpectation) -> CellCount {
    let detected = sent * basis_prob * exp.gain;
    CellCount {
        sent: sent.round() as u64,
        detected: detected.round() as u64,
        errors: (detected * exp.qber).round() as u64,
    }
}

/// Noise-free tallies: every cell at its expected value.
pub fn expected_tallies(
    cfg: &ProtocolConfig,
    ch: &ChannelParams,
    distance_km: f64,
) -> ObservedTallies {
    let n = cfg.n_total as f64;
    let mut t = ObservedTallies::default();
    for id in CellId::all() {
        let level = cfg.intensities.get(id.intensity);
        let sent = n * cfg.state_prob(id.state) * level.prob;
        let exp = cell_expectation(id.state, id.basis, level.mean, distance_km, ch);
        t[id] = expected_cell(sent, cfg.basis_prob(id.basis), exp);
    }
    t
}

/// Probability that an `n`-photon pulse produces a click.
pub fn photon_yield(eta: f64, n: u32, dark_count: f64) -> f64 {
    dark_count + (1.0 - dark_count) * (1.0 - (1.0 - eta).powi(n as i32))
}

/// Error probability of a click from an `n`-photon pulse.
///
/// Averaging `photon_yield * photon_error` over the Poisson photon-number
/// distribution reproduces the analytic error numerator
/// `e_d/2 + e_mis (1 - exp(-η k))`.
pub fn photon_error(eta: f64, n: u32, e_mis: f64, dark_count: f64) -> f64 {
    let y = photon_yield(eta, n, dark_count);
    if y <= 0.0 {
        return 0.5;
    }
    let wrong = dark_count / 2.0 + e_mis * (1.0 - (1.0 - eta).powi(n as i32));
    (wrong / y).clamp(0.0, 1.0)
}
