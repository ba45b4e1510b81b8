//! Protocol, channel and security parameters, and their validation.
//!
//! Defaults reproduce the reference 200 km operating point: the channel
//! constants of the receiver that produced it, and the intensity and basis
//! choices used for that run.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result, Violation};
use crate::types::{BasisLabel, Intensity, StateLabel};

const SUM_TOLERANCE: f64 = 1e-12;

/// Mean photon number and selection probability of one intensity class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityLevel {
    pub mean: f64,
    pub prob: f64,
}

/// The three decoy intensities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intensities {
    pub signal: IntensityLevel,
    pub decoy: IntensityLevel,
    pub vacuum: IntensityLevel,
}

impl Intensities {
    pub fn get(&self, k: Intensity) -> IntensityLevel {
        match k {
            Intensity::Signal => self.signal,
            Intensity::Decoy => self.decoy,
            Intensity::Vacuum => self.vacuum,
        }
    }

    pub fn mean(&self, k: Intensity) -> f64 {
        self.get(k).mean
    }

    pub fn prob(&self, k: Intensity) -> f64 {
        self.get(k).prob
    }
}

impl Default for Intensities {
    fn default() -> Self {
        Intensities {
            signal: IntensityLevel {
                mean: 0.55,
                prob: 0.54,
            },
            decoy: IntensityLevel {
                mean: 0.28,
                prob: 0.36,
            },
            vacuum: IntensityLevel {
                mean: 0.0,
                prob: 0.10,
            },
        }
    }
}

/// Physical-layer constants of the fiber link and receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Intrinsic (optical misalignment) error probability.
    pub e0: f64,
    /// Fiber attenuation, dB/km.
    pub alpha_db_per_km: f64,
    /// Loss of the receiver's Z path, dB.
    pub eta_z_db: f64,
    /// Loss of the receiver's X/Y interferometer path, dB.
    pub eta_xy_db: f64,
    /// Dark-count probability per detection gate.
    pub dark_count: f64,
    /// Detector efficiency.
    pub detector_efficiency: f64,
    /// Reference-frame rotation in the XY plane, radians in [0, 2π).
    pub beta: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            e0: 0.01,
            alpha_db_per_km: 0.19,
            eta_z_db: 4.0,
            eta_xy_db: 9.0,
            dark_count: 1.3e-7,
            detector_efficiency: 0.6,
            beta: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }
}

/// Failure probabilities and error-correction efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams {
    /// Accuracy of the smooth min-entropy estimate; also the failure
    /// probability of every fluctuation interval.
    pub eps_bar: f64,
    pub eps_ec: f64,
    pub eps_pa: f64,
    /// Error-correction efficiency, f ≥ 1.
    pub ec_efficiency: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        SecurityParams {
            eps_bar: 1e-10,
            eps_ec: 1e-10,
            eps_pa: 1e-10,
            ec_efficiency: 1.1,
        }
    }
}

/// Source and receiver choices plus block size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub intensities: Intensities,
    /// Probability that Alice prepares a Z state (split evenly over Z0/Z1).
    pub p_z_alice: f64,
    pub p_x0: f64,
    pub p_y0: f64,
    /// Probability that Bob measures in Z.
    pub p_z_bob: f64,
    /// Total number of pulses sent.
    pub n_total: u64,
    /// Number of drift groups.
    pub m_groups: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        let p_z = 0.77;
        ProtocolConfig {
            intensities: Intensities::default(),
            p_z_alice: p_z,
            p_x0: (1.0 - p_z) / 2.0,
            p_y0: (1.0 - p_z) / 2.0,
            p_z_bob: 0.5,
            n_total: 3_000_000_000_000,
            m_groups: 6,
        }
    }
}

impl ProtocolConfig {
    /// Sets `p_z_alice` and splits the remainder evenly over X0 and Y0.
    pub fn with_p_z(mut self, p_z: f64) -> Self {
        self.p_z_alice = p_z;
        self.p_x0 = (1.0 - p_z) / 2.0;
        self.p_y0 = (1.0 - p_z) / 2.0;
        self
    }

    pub fn with_n_total(mut self, n: u64) -> Self {
        self.n_total = n;
        self
    }

    pub fn state_prob(&self, s: StateLabel) -> f64 {
        match s {
            StateLabel::Z0 | StateLabel::Z1 => self.p_z_alice / 2.0,
            StateLabel::X0 => self.p_x0,
            StateLabel::Y0 => self.p_y0,
        }
    }

    pub fn basis_prob(&self, b: BasisLabel) -> f64 {
        match b {
            BasisLabel::Z => self.p_z_bob,
            BasisLabel::X => 1.0 - self.p_z_bob,
        }
    }
}

/// A configuration that passed [`validate_config`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Setup {
    pub protocol: ProtocolConfig,
    pub channel: ChannelParams,
    pub security: SecurityParams,
}

fn prob_ok(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

/// Checks every parameter invariant and reports all violations at once.
///
/// ```
/// use rfi_qkd::config::*;
/// let mut cfg = ProtocolConfig::default();
/// cfg.intensities.signal.mean = 0.3;
/// cfg.intensities.vacuum.mean = 0.1;
/// let err = validate_config(cfg, ChannelParams::default(), SecurityParams::default());
/// assert!(err.is_err());
/// ```
pub fn validate_config(
    cfg: ProtocolConfig,
    ch: ChannelParams,
    sec: SecurityParams,
) -> Result<Setup> {
    let mut v = Vec::new();
    let mut check = |ok: bool, field: &'static str, value: f64, reason: &'static str| {
        if !ok {
            v.push(Violation {
                field,
                value: format!("{value}"),
                reason,
            });
        }
    };

    let k = &cfg.intensities;
    let (mu, nu, om) = (k.signal.mean, k.decoy.mean, k.vacuum.mean);
    for (field, x) in [("mu", mu), ("nu", nu), ("omega", om)] {
        check(
            x.is_finite() && x >= 0.0,
            field,
            x,
            "mean photon number must be finite and >= 0",
        );
    }
    check(
        mu > nu + om,
        "mu",
        mu,
        "signal must exceed decoy + vacuum (mu > nu + omega)",
    );
    check(
        nu > om,
        "nu",
        nu,
        "decoy must exceed vacuum intensity (nu > omega)",
    );
    for (field, p) in [
        ("p_mu", k.signal.prob),
        ("p_nu", k.decoy.prob),
        ("p_omega", k.vacuum.prob),
    ] {
        check(prob_ok(p), field, p, "probability must lie in [0, 1]");
    }
    let psum = k.signal.prob + k.decoy.prob + k.vacuum.prob;
    check(
        (psum - 1.0).abs() <= SUM_TOLERANCE,
        "p_mu+p_nu+p_omega",
        psum,
        "must sum to 1",
    );

    for (field, p) in [
        ("p_z_alice", cfg.p_z_alice),
        ("p_x0", cfg.p_x0),
        ("p_y0", cfg.p_y0),
    ] {
        check(prob_ok(p), field, p, "probability must lie in [0, 1]");
    }
    let ssum = cfg.p_z_alice + cfg.p_x0 + cfg.p_y0;
    check(
        (ssum - 1.0).abs() <= SUM_TOLERANCE,
        "p_z_alice+p_x0+p_y0",
        ssum,
        "must sum to 1",
    );
    check(
        cfg.p_z_bob > 0.0 && cfg.p_z_bob < 1.0,
        "p_z_bob",
        cfg.p_z_bob,
        "must lie in (0, 1)",
    );
    check(
        cfg.n_total >= 1,
        "n_total",
        cfg.n_total as f64,
        "must be >= 1",
    );
    check(
        cfg.m_groups >= 1,
        "m_groups",
        cfg.m_groups as f64,
        "must be >= 1",
    );

    for (field, p) in [
        ("e0", ch.e0),
        ("dark_count", ch.dark_count),
        ("detector_efficiency", ch.detector_efficiency),
    ] {
        check(prob_ok(p), field, p, "probability must lie in [0, 1]");
    }
    for (field, x) in [
        ("alpha_db_per_km", ch.alpha_db_per_km),
        ("eta_z_db", ch.eta_z_db),
        ("eta_xy_db", ch.eta_xy_db),
    ] {
        check(
            x.is_finite() && x >= 0.0,
            field,
            x,
            "loss must be finite and >= 0",
        );
    }
    check(
        (0.0..TAU).contains(&ch.beta),
        "beta",
        ch.beta,
        "rotation must lie in [0, 2pi)",
    );

    for (field, e) in [
        ("eps_bar", sec.eps_bar),
        ("eps_ec", sec.eps_ec),
        ("eps_pa", sec.eps_pa),
    ] {
        check(
            e > 0.0 && e < 1.0,
            field,
            e,
            "failure probability must lie in (0, 1)",
        );
    }
    check(
        sec.ec_efficiency >= 1.0,
        "ec_efficiency",
        sec.ec_efficiency,
        "must be >= 1",
    );

    if v.is_empty() {
        Ok(Setup {
            protocol: cfg,
            channel: ch,
            security: sec,
        })
    } else {
        Err(Error::InvalidConfig(v))
    }
}
