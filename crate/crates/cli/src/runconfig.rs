//! The TOML run configuration: one flat table with unit-bearing keys.

use std::f64::consts::TAU;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Deserializer, Serialize};

use rfi_qkd::decoy::FormulaSet;
use rfi_qkd::keyrate::{AnalysisOptions, NzzScope, RhoInputs, RhoMethod};
use rfi_qkd::report::Mode;
use rfi_qkd::simulate::{checked_pulses, DriftModel, DriftParams};
use rfi_qkd::{
    validate_config, BasisLabel, ChannelParams, Intensities, IntensityLevel, ProtocolConfig,
    SecurityParams, Setup,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Analytic,
    Montecarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DriftName {
    None,
    Fixed,
    Linear,
    Sinusoidal,
}

/// Accepts `3000000000000`, `3e12` or `3.0e12`.
fn pulses<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Num {
        Int(u64),
        Float(f64),
    }
    match Num::deserialize(d)? {
        Num::Int(n) => Ok(n),
        Num::Float(x) => checked_pulses(x).map_err(serde::de::Error::custom),
    }
}

fn pulse_list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u64>, D::Error> {
    #[derive(Deserialize)]
    struct Wrap(#[serde(deserialize_with = "pulses")] u64);
    Ok(Vec::<Wrap>::deserialize(d)?
        .into_iter()
        .map(|w| w.0)
        .collect())
}

/// Parses a pulse count given on the command line.
pub fn parse_pulses(s: &str) -> std::result::Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    checked_pulses(x).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub e0: f64,
    pub alpha_db_per_km: f64,
    pub eta_z_db: f64,
    pub eta_xy_db: f64,
    pub dark_count_prob: f64,
    pub detector_efficiency: f64,
    pub beta_rad: f64,

    pub eps_bar: f64,
    pub eps_ec: f64,
    pub eps_pa: f64,
    pub ec_efficiency: f64,

    pub p_z_alice: f64,
    /// Defaults to `(1 - p_z_alice) / 2`.
    pub p_x0: Option<f64>,
    /// Defaults to `(1 - p_z_alice) / 2`.
    pub p_y0: Option<f64>,
    pub p_z_bob: f64,
    pub mu: f64,
    pub nu: f64,
    pub omega: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub p_omega: f64,
    #[serde(deserialize_with = "pulses")]
    pub n_total: u64,
    pub m_groups: usize,

    pub distance_km: f64,
    pub scan_distance_min_km: f64,
    pub scan_distance_max_km: f64,
    pub scan_distance_step_km: f64,
    #[serde(deserialize_with = "pulse_list")]
    pub scan_n_totals: Vec<u64>,

    pub mode: ModeName,
    pub seed: u64,
    pub drift_model: DriftName,
    pub drift_slices: usize,
    pub slice_duration_s: f64,
    pub drift_beta0_rad: f64,
    /// Defaults to one full turn over the run.
    pub drift_rate_rad_per_s: Option<f64>,
    pub drift_amplitude_rad: f64,
    pub drift_period_s: f64,
    pub drift_jitter_rad: f64,
    pub rho_method: RhoMethod,

    pub nzz_scope: NzzScope,
    pub literal_formulas: bool,
    pub asymptotic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        let c = ChannelParams::default();
        let s = SecurityParams::default();
        RunConfig {
            e0: c.e0,
            alpha_db_per_km: c.alpha_db_per_km,
            eta_z_db: c.eta_z_db,
            eta_xy_db: c.eta_xy_db,
            dark_count_prob: c.dark_count,
            detector_efficiency: c.detector_efficiency,
            beta_rad: c.beta,
            eps_bar: s.eps_bar,
            eps_ec: s.eps_ec,
            eps_pa: s.eps_pa,
            ec_efficiency: s.ec_efficiency,
            p_z_alice: p.p_z_alice,
            p_x0: None,
            p_y0: None,
            p_z_bob: p.p_z_bob,
            mu: p.intensities.signal.mean,
            nu: p.intensities.decoy.mean,
            omega: p.intensities.vacuum.mean,
            p_mu: p.intensities.signal.prob,
            p_nu: p.intensities.decoy.prob,
            p_omega: p.intensities.vacuum.prob,
            n_total: p.n_total,
            m_groups: p.m_groups,
            distance_km: 200.0,
            scan_distance_min_km: 0.0,
            scan_distance_max_km: 250.0,
            scan_distance_step_km: 10.0,
            scan_n_totals: vec![100_000_000_000, 1_000_000_000_000, 10_000_000_000_000],
            mode: ModeName::Analytic,
            seed: 1,
            drift_model: DriftName::None,
            drift_slices: 100,
            slice_duration_s: 1.0,
            drift_beta0_rad: 0.0,
            drift_rate_rad_per_s: None,
            drift_amplitude_rad: TAU / 8.0,
            drift_period_s: 100.0,
            drift_jitter_rad: 0.0,
            rho_method: RhoMethod::Printed,
            nzz_scope: NzzScope::AllIntensities,
            literal_formulas: false,
            asymptotic: false,
        }
    }
}

/// Key, default and where the default comes from.
pub const DEFAULT_SOURCES: &[(&str, &str)] = &[
    ("e0", "intrinsic error of the reference receiver"),
    (
        "alpha_db_per_km",
        "standard single-mode fiber loss of the reference link",
    ),
    (
        "eta_z_db",
        "measured loss of the reference receiver's Z path",
    ),
    (
        "eta_xy_db",
        "measured loss of the reference receiver's interferometer path",
    ),
    (
        "dark_count_prob",
        "dark-count probability per gate of the reference detectors",
    ),
    (
        "detector_efficiency",
        "efficiency of the reference detectors",
    ),
    ("beta_rad", "aligned frames"),
    ("eps_bar", "security parameters of the 200 km reference run"),
    ("eps_ec", "security parameters of the 200 km reference run"),
    ("eps_pa", "security parameters of the 200 km reference run"),
    ("ec_efficiency", "typical error-correction efficiency"),
    ("p_z_alice", "basis choice of the 200 km reference run"),
    ("p_x0", "(1 - p_z_alice)/2 unless set"),
    ("p_y0", "(1 - p_z_alice)/2 unless set"),
    (
        "p_z_bob",
        "balanced receiver; not fixed by the reference run",
    ),
    ("mu", "intensities of the 200 km reference run"),
    ("nu", "intensities of the 200 km reference run"),
    ("omega", "intensities of the 200 km reference run"),
    (
        "p_mu",
        "intensity probabilities of the 200 km reference run",
    ),
    (
        "p_nu",
        "intensity probabilities of the 200 km reference run",
    ),
    (
        "p_omega",
        "intensity probabilities of the 200 km reference run",
    ),
    ("n_total", "block length of the 200 km reference run"),
    ("m_groups", "group count of the 200 km reference run"),
    ("distance_km", "reference run distance"),
    ("scan_distance_min_km", "tool default"),
    ("scan_distance_max_km", "tool default"),
    ("scan_distance_step_km", "tool default"),
    (
        "scan_n_totals",
        "tool default: three decades of block length",
    ),
    ("mode", "tool default"),
    ("seed", "tool default"),
    ("drift_model", "tool default: no drift"),
    ("drift_slices", "tool default"),
    (
        "slice_duration_s",
        "one-second slices, as in the reference run",
    ),
    ("drift_beta0_rad", "tool default"),
    (
        "drift_rate_rad_per_s",
        "one full turn over the run unless set",
    ),
    ("drift_amplitude_rad", "tool default"),
    ("drift_period_s", "tool default"),
    ("drift_jitter_rad", "tool default"),
    ("rho_method", "closed-form classifier"),
    ("nzz_scope", "raw key from every intensity"),
    ("literal_formulas", "corrected estimator forms"),
    ("asymptotic", "finite-key analysis"),
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Renders every key with its current value and the source of its default.
    pub fn explain(&self) -> Result<String> {
        let table = toml::Table::try_from(self)?;
        let mut out = String::new();
        for (key, why) in DEFAULT_SOURCES {
            let value = table
                .get(*key)
                .map_or_else(|| "(derived)".to_string(), |v| v.to_string());
            out.push_str(&format!("{key} = {value}    # {why}\n"));
        }
        Ok(out)
    }

    pub fn setup(&self) -> Result<Setup> {
        if !(self.distance_km.is_finite() && self.distance_km >= 0.0) {
            bail!(
                "distance_km = {} must be finite and non-negative",
                self.distance_km
            );
        }
        if !(self.scan_distance_min_km >= 0.0 && self.scan_distance_max_km.is_finite()) {
            bail!("scan distances must be finite and non-negative");
        }
        let plane = (1.0 - self.p_z_alice) / 2.0;
        let protocol = ProtocolConfig {
            intensities: Intensities {
                signal: IntensityLevel {
                    mean: self.mu,
                    prob: self.p_mu,
                },
                decoy: IntensityLevel {
                    mean: self.nu,
                    prob: self.p_nu,
                },
                vacuum: IntensityLevel {
                    mean: self.omega,
                    prob: self.p_omega,
                },
            },
            p_z_alice: self.p_z_alice,
            p_x0: self.p_x0.unwrap_or(plane),
            p_y0: self.p_y0.unwrap_or(plane),
            p_z_bob: self.p_z_bob,
            n_total: self.n_total,
            m_groups: self.m_groups,
        };
        let channel = ChannelParams {
            e0: self.e0,
            alpha_db_per_km: self.alpha_db_per_km,
            eta_z_db: self.eta_z_db,
            eta_xy_db: self.eta_xy_db,
            dark_count: self.dark_count_prob,
            detector_efficiency: self.detector_efficiency,
            beta: self.beta_rad,
        };
        let security = SecurityParams {
            eps_bar: self.eps_bar,
            eps_ec: self.eps_ec,
            eps_pa: self.eps_pa,
            ec_efficiency: self.ec_efficiency,
        };
        Ok(validate_config(protocol, channel, security)?)
    }

    pub fn mode(&self) -> Mode {
        match self.mode {
            ModeName::Analytic => Mode::Analytic,
            ModeName::Montecarlo => Mode::MonteCarlo { seed: self.seed },
        }
    }

    pub fn options(&self) -> AnalysisOptions {
        AnalysisOptions {
            asymptotic: self.asymptotic,
            formulas: if self.literal_formulas {
                FormulaSet::Printed
            } else {
                FormulaSet::Corrected
            },
            nzz_scope: self.nzz_scope,
        }
    }

    pub fn rho_inputs(&self, setup: &Setup) -> RhoInputs {
        RhoInputs {
            eta: rfi_qkd::channel::transmittance(self.distance_km, BasisLabel::X, &setup.channel),
            mu: setup.protocol.intensities.signal.mean,
            dark_count: setup.channel.dark_count,
            e0: setup.channel.e0,
        }
    }

    /// Drift parameters, or `None` when no drift model is selected.
    pub fn drift(&self) -> Result<Option<DriftParams>> {
        let slices = self.drift_slices as u64;
        if self.drift_model == DriftName::None {
            return Ok(None);
        }
        if slices == 0 || !self.n_total.is_multiple_of(slices) {
            bail!(
                "n_total = {} is not a multiple of drift_slices = {}",
                self.n_total,
                self.drift_slices
            );
        }
        let run = self.drift_slices as f64 * self.slice_duration_s;
        let model = match self.drift_model {
            DriftName::None => unreachable!(),
            DriftName::Fixed => DriftModel::Fixed {
                beta: self.drift_beta0_rad,
            },
            DriftName::Linear => DriftModel::Linear {
                beta0: self.drift_beta0_rad,
                rate: self.drift_rate_rad_per_s.unwrap_or(TAU / run),
            },
            DriftName::Sinusoidal => DriftModel::Sinusoidal {
                beta0: self.drift_beta0_rad,
                amplitude: self.drift_amplitude_rad,
                period: self.drift_period_s,
            },
        };
        Ok(Some(DriftParams {
            model,
            slice_duration_s: self.slice_duration_s,
            pulses_per_slice: self.n_total / slices,
            jitter_rad: self.drift_jitter_rad,
        }))
    }
}
