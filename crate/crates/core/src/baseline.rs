//! Comparison protocols evaluated on the same analytic channel.
//!
//! * `six-four`: Alice sends all six states, Bob measures Z or X. The X and
//!   Y preparations are pooled into one class each (`X0 + X1`, `Y0 + Y1`),
//!   and `C64 = sqrt(⟨X_A X_B⟩² + ⟨Y_A X_B⟩²)`.
//! * `six-state`: Alice sends six states and Bob measures Z, X or Y with
//!   probabilities 0.5/0.25/0.25; all four XY-plane correlators enter `C`.
//!
//! Both reuse the decoy estimators and key-length formula of the 4-state
//! pipeline; only the channel-quality statistic and Eve's information change.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{expected_tallies, gain_and_qber, plane_error, transmittance};
use crate::config::{ChannelParams, ProtocolConfig, SecurityParams};
use crate::error::{Error, Result};
use crate::keyrate::{
    analyze, class_error_rate, finish_report, raw_key_estimate, AnalysisOptions, KeyRateReport,
};
use crate::security::{c_64, correlator, ie_4state, ie_6state, Interval};
use crate::tally::ClassCounts;
use crate::types::{BasisLabel, Intensity};

/// Bob's Z/X/Y probabilities for the six-state receiver.
pub const SIX_STATE_BOB: [f64; 3] = [0.5, 0.25, 0.25];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Protocol {
    FourState,
    SixFour,
    SixState,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::FourState, Protocol::SixFour, Protocol::SixState];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::FourState => "four-state",
            Protocol::SixFour => "six-four",
            Protocol::SixState => "six-state",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownLabel {
                kind: "protocol",
                label: s.to_string(),
            })
    }
}

/// Expected counts of a class holding `share` of the pulses, measured with
/// probability `basis_prob` through `path`.
fn expected_class(
    cfg: &ProtocolConfig,
    ch: &ChannelParams,
    distance_km: f64,
    share: f64,
    basis_prob: f64,
    e_mis: f64,
    path: BasisLabel,
) -> ClassCounts {
    let eta = transmittance(distance_km, path, ch);
    let mut c = ClassCounts::default();
    for k in Intensity::ALL {
        let lvl = cfg.intensities.get(k);
        let exp = gain_and_qber(eta, lvl.mean, e_mis, ch.dark_count);
        let det = cfg.n_total as f64 * share * lvl.prob * basis_prob * exp.gain;
        c.detected[k.index()] = det.round() as u64;
        c.errors[k.index()] = (det * exp.qber).round() as u64;
    }
    c
}

/// Runs one protocol at one distance on noise-free expected counts.
pub fn protocol_report(
    protocol: Protocol,
    cfg: &ProtocolConfig,
    ch: &ChannelParams,
    sec: &SecurityParams,
    distance_km: f64,
    opts: &AnalysisOptions,
) -> Result<KeyRateReport> {
    if protocol == Protocol::FourState {
        return analyze(
            &expected_tallies(cfg, ch, distance_km),
            &cfg.intensities,
            sec,
            opts,
        );
    }
    let est = opts.estimator(sec);
    let k = &cfg.intensities;
    let p_plane = (1.0 - cfg.p_z_alice) / 2.0;
    let p_zb = if protocol == Protocol::SixState {
        SIX_STATE_BOB[0]
    } else {
        cfg.p_z_bob
    };
    let zz = expected_class(
        cfg,
        ch,
        distance_km,
        cfg.p_z_alice,
        p_zb,
        ch.e0,
        BasisLabel::Z,
    );
    let raw = raw_key_estimate(&zz, k, &est, opts.nzz_scope)?;

    let mut values = BTreeMap::new();
    let mut flags = Vec::new();
    let mut corr = |name: &str, prep: f64, meas: f64, basis_prob: f64| -> Result<Interval> {
        let e_mis = plane_error(prep, meas, ch.beta, ch.e0);
        let class = expected_class(
            cfg,
            ch,
            distance_km,
            p_plane,
            basis_prob,
            e_mis,
            BasisLabel::X,
        );
        let (_, _, _, e) = class_error_rate(&class, k, &est)?;
        let c = correlator(&e);
        values.insert(format!("corr_{name}.lower"), c.lower);
        values.insert(format!("corr_{name}.upper"), c.upper);
        if e.degenerate {
            flags.push(format!("e_{name}_degenerate"));
        }
        Ok(c)
    };

    let (c, i_e) = match protocol {
        Protocol::SixFour => {
            let pxb = 1.0 - cfg.p_z_bob;
            let xx = corr("xx", 0.0, 0.0, pxb)?;
            let yx = corr("yx", FRAC_PI_2, 0.0, pxb)?;
            let c = c_64(xx.abs_lower(), yx.abs_lower()).min(1.0);
            (c, ie_4state(c))
        }
        Protocol::SixState => {
            let [_, pxb, pyb] = SIX_STATE_BOB;
            let xx = corr("xx", 0.0, 0.0, pxb)?;
            let xy = corr("xy", 0.0, FRAC_PI_2, pyb)?;
            let yx = corr("yx", FRAC_PI_2, 0.0, pxb)?;
            let yy = corr("yy", FRAC_PI_2, FRAC_PI_2, pyb)?;
            let c: f64 = [xx, xy, yx, yy]
                .iter()
                .map(|i| i.abs_lower().powi(2))
                .sum::<f64>()
                .min(2.0);
            let info = ie_6state(c, raw.e_zz, opts.literal());
            if info.radicand_clamped {
                flags.push("radicand_clamped".into());
            }
            (c, info.i_e)
        }
        Protocol::FourState => unreachable!(),
    };
    Ok(finish_report(
        values,
        flags,
        &raw,
        c,
        i_e,
        cfg.n_total,
        sec,
        opts,
    ))
}

/// Sifting-limited asymptotic rate of a lossless, noiseless link: the
/// fraction of pulses that are single-photon Z detections.
pub fn sifting_limit(protocol: Protocol, cfg: &ProtocolConfig) -> f64 {
    let p_zb = if protocol == Protocol::SixState {
        SIX_STATE_BOB[0]
    } else {
        cfg.p_z_bob
    };
    let k = &cfg.intensities;
    cfg.p_z_alice * p_zb * crate::decoy::tau(1, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ProtocolConfig, ChannelParams, SecurityParams) {
        (
            ProtocolConfig::default().with_n_total(10_000_000_000_000),
            ChannelParams::default(),
            SecurityParams::default(),
        )
    }

    #[test]
    fn protocol_labels_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.as_str().parse::<Protocol>().unwrap(), p);
        }
        assert!("six".parse::<Protocol>().is_err());
    }

    #[test]
    fn four_state_tracks_six_four() {
        let (cfg, ch, sec) = setup();
        let opts = AnalysisOptions::default();
        for d in [0.0, 50.0, 100.0, 150.0] {
            let a = protocol_report(Protocol::FourState, &cfg, &ch, &sec, d, &opts)
                .unwrap()
                .key_rate;
            let b = protocol_report(Protocol::SixFour, &cfg, &ch, &sec, d, &opts)
                .unwrap()
                .key_rate;
            assert!(((a - b) / b).abs() < 0.05, "{d}: {a} vs {b}");
        }
    }

    #[test]
    fn six_state_is_close() {
        let (cfg, ch, sec) = setup();
        let opts = AnalysisOptions::default();
        let a = protocol_report(Protocol::FourState, &cfg, &ch, &sec, 100.0, &opts)
            .unwrap()
            .key_rate;
        let c = protocol_report(Protocol::SixState, &cfg, &ch, &sec, 100.0, &opts)
            .unwrap()
            .key_rate;
        assert!(c > a / 2.0 && c < a * 2.0, "{a} vs {c}");
    }

    #[test]
    fn lossless_noiseless_rates_approach_sifting_limit() {
        let cfg = ProtocolConfig::default().with_n_total(10_000_000_000_000);
        let ch = ChannelParams {
            e0: 0.0,
            alpha_db_per_km: 0.0,
            eta_z_db: 0.0,
            eta_xy_db: 0.0,
            dark_count: 0.0,
            detector_efficiency: 1.0,
            beta: 0.0,
        };
        let sec = SecurityParams::default();
        let opts = AnalysisOptions::asymptotic();
        for p in Protocol::ALL {
            let r = protocol_report(p, &cfg, &ch, &sec, 0.0, &opts).unwrap();
            let limit = sifting_limit(p, &cfg);
            assert!(
                r.key_rate > 0.9 * limit && r.key_rate <= 1.0 * limit * (1.0 + 1e-9),
                "{p}: {} vs {limit}",
                r.key_rate
            );
        }
    }
}
