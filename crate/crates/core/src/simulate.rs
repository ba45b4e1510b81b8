//! Monte Carlo tallies with photon-number ground truth, and β drift traces.
//!
//! # Random streams
//!
//! Every draw comes from a `ChaCha8Rng` seeded with the run seed and switched
//! to stream `slice * 256 + id`. Stream `id = 0` splits the slice's pulses
//! over (state, intensity) pairs; stream `id = 1 + pair` samples everything
//! downstream of that pair (basis choice, photon number, clicks, errors).
//! Stream 255 drives drift-trace jitter. Slices and pairs are therefore
//! independent of execution order, and parallel runs are bit-identical to
//! sequential ones.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{misalignment_error, photon_error, photon_yield, transmittance};
use crate::config::{ChannelParams, ProtocolConfig};
use crate::error::{Error, Result};
use crate::tally::{CellCount, ObservedTallies};
use crate::types::{BasisLabel, CellId, Intensity, StateLabel};

/// Largest block the sampler accepts.
pub const MAX_PULSES: u64 = 1 << 62;

const TAIL_MASS: f64 = 1e-12;
const JITTER_STREAM: u64 = 255;

/// Converts a (possibly float-written) pulse count to an integer.
pub fn checked_pulses(n: f64) -> Result<u64> {
    if !n.is_finite() || n < 0.0 || n.fract() != 0.0 || n > MAX_PULSES as f64 {
        return Err(Error::CountOverflow(n));
    }
    Ok(n as u64)
}

/// Observed tallies plus the photon-number split of every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTallies {
    pub observed: ObservedTallies,
    /// `detected_by_photons[cell ordinal][n]`.
    pub detected_by_photons: Vec<Vec<u64>>,
    pub errors_by_photons: Vec<Vec<u64>>,
}

impl OracleTallies {
    fn empty() -> Self {
        OracleTallies {
            observed: ObservedTallies::default(),
            detected_by_photons: vec![Vec::new(); 24],
            errors_by_photons: vec![Vec::new(); 24],
        }
    }

    fn sum_over(
        &self,
        table: &[Vec<u64>],
        states: &[StateLabel],
        basis: BasisLabel,
        n: usize,
    ) -> u64 {
        states
            .iter()
            .flat_map(|&s| Intensity::ALL.map(|k| CellId::new(s, basis, k)))
            .map(|id| table[id.ordinal()].get(n).copied().unwrap_or(0))
            .sum()
    }

    /// True number of clicks caused by `n`-photon pulses in a class.
    pub fn true_detected(&self, states: &[StateLabel], basis: BasisLabel, n: usize) -> u64 {
        self.sum_over(&self.detected_by_photons, states, basis, n)
    }

    /// True number of errors among clicks caused by `n`-photon pulses.
    pub fn true_errors(&self, states: &[StateLabel], basis: BasisLabel, n: usize) -> u64 {
        self.sum_over(&self.errors_by_photons, states, basis, n)
    }

    pub fn merge(&mut self, other: &OracleTallies) {
        self.observed.merge(&other.observed);
        for (a, b) in self
            .detected_by_photons
            .iter_mut()
            .zip(&other.detected_by_photons)
        {
            add_into(a, b);
        }
        for (a, b) in self
            .errors_by_photons
            .iter_mut()
            .zip(&other.errors_by_photons)
        {
            add_into(a, b);
        }
    }
}

fn add_into(a: &mut Vec<u64>, b: &[u64]) {
    if a.len() < b.len() {
        a.resize(b.len(), 0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Poisson probabilities up to the smallest cap with tail below 1e-12; the
/// tail mass is folded into the last entry.
pub fn truncated_poisson(mean: f64) -> Vec<f64> {
    let mut pmf = Vec::new();
    let mut p = (-mean).exp();
    let mut cdf = 0.0;
    for n in 0.. {
        if n > 0 {
            p *= mean / n as f64;
        }
        cdf += p;
        pmf.push(p);
        if 1.0 - cdf < TAIL_MASS {
            break;
        }
    }
    let last = pmf.len() - 1;
    pmf[last] += (1.0 - cdf).max(0.0);
    pmf
}

fn binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// Multinomial draw as a chain of conditional binomials.
fn multinomial(rng: &mut ChaCha8Rng, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i == probs.len() - 1 {
            out[i] = left;
            break;
        }
        let x = binomial(
            rng,
            left,
            if mass > 0.0 { (p / mass).min(1.0) } else { 0.0 },
        );
        out[i] = x;
        left -= x;
        mass -= p;
    }
    out
}

fn stream_rng(seed: u64, slice: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(slice * 256 + id);
    rng
}

/// Samples one slice of `cfg.n_total` pulses.
fn sample_slice(
    cfg: &ProtocolConfig,
    ch: &ChannelParams,
    distance_km: f64,
    seed: u64,
    slice: u64,
) -> Result<OracleTallies> {
    if cfg.n_total > MAX_PULSES {
        return Err(Error::CountOverflow(cfg.n_total as f64));
    }
    let pairs: Vec<(StateLabel, Intensity)> = StateLabel::ALL
        .into_iter()
        .flat_map(|s| Intensity::ALL.map(|k| (s, k)))
        .collect();
    let probs: Vec<f64> = pairs
        .iter()
        .map(|&(s, k)| cfg.state_prob(s) * cfg.intensities.prob(k))
        .collect();
    let sent = multinomial(&mut stream_rng(seed, slice, 0), cfg.n_total, &probs);

    let mut out = OracleTallies::empty();
    for (p, (&(state, k), &n_sent)) in pairs.iter().zip(&sent).enumerate() {
        let mut rng = stream_rng(seed, slice, 1 + p as u64);
        let n_z = binomial(&mut rng, n_sent, cfg.p_z_bob);
        let pmf = truncated_poisson(cfg.intensities.mean(k));
        for (basis, n_basis) in [(BasisLabel::Z, n_z), (BasisLabel::X, n_sent - n_z)] {
            let eta = transmittance(distance_km, basis, ch);
            let e_mis = misalignment_error(state, basis, ch.beta, ch.e0);
            let by_n = multinomial(&mut rng, n_basis, &pmf);
            let id = CellId::new(state, basis, k);
            let mut cell = CellCount {
                sent: n_sent,
                ..Default::default()
            };
            let mut det = Vec::with_capacity(by_n.len());
            let mut err = Vec::with_capacity(by_n.len());
            for (n, &count) in by_n.iter().enumerate() {
                let d = binomial(&mut rng, count, photon_yield(eta, n as u32, ch.dark_count));
                let e = binomial(
                    &mut rng,
                    d,
                    photon_error(eta, n as u32, e_mis, ch.dark_count),
                );
                cell.detected += d;
                cell.errors += e;
                det.push(d);
                err.push(e);
            }
            out.observed[id] = cell;
            out.detected_by_photons[id.ordinal()] = det;
            out.errors_by_photons[id.ordinal()] = err;
        }
    }
    Ok(out)
}

/// Samples one run of `cfg.n_total` pulses at fixed rotation `ch.beta`.
pub fn sample_tallies(
    cfg: &ProtocolConfig,
    ch: &ChannelParams,
    distance_km: f64,
    seed: u64,
) -> Result<OracleTallies> {
    sample_slice(cfg, ch, distance_km, seed, 0)
}

/// How the frame rotation evolves in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DriftModel {
    Fixed {
        beta: f64,
    },
    /// `β0 + rate·t`, rate in rad/s.
    Linear {
        beta0: f64,
        rate: f64,
    },
    /// `β0 + A sin(2πt/T)`.
    Sinusoidal {
        beta0: f64,
        amplitude: f64,
        period: f64,
    },
}

impl DriftModel {
    pub fn beta_at(&self, t: f64) -> f64 {
        let b = match *self {
            DriftModel::Fixed { beta } => beta,
            DriftModel::Linear { beta0, rate } => beta0 + rate * t,
            DriftModel::Sinusoidal {
                beta0,
                amplitude,
                period,
            } => beta0 + amplitude * (TAU * t / period).sin(),
        };
        wrap(b)
    }
}

fn wrap(b: f64) -> f64 {
    let w = b.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Parameters of a drift trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub model: DriftModel,
    pub slice_duration_s: f64,
    pub pulses_per_slice: u64,
    /// Standard deviation of Gaussian noise added to every slice, radians.
    pub jitter_rad: f64,
}

/// Per-slice rotation angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftTrace {
    pub betas: Vec<f64>,
    pub slice_duration_s: f64,
    pub pulses_per_slice: u64,
}

impl DriftTrace {
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn total_pulses(&self) -> u64 {
        self.betas.len() as u64 * self.pulses_per_slice
    }
}

/// Evaluates the drift model at `t_i = i · slice_duration`.
///
/// ```
/// use rfi_qkd::simulate::*;
/// let p = DriftParams {
///     model: DriftModel::Fixed { beta: 0.3 },
///     slice_duration_s: 1.0,
///     pulses_per_slice: 10,
///     jitter_rad: 0.0,
/// };
/// assert_eq!(drift_beta(&p, 10, 0).betas, vec![0.3; 10]);
/// ```
pub fn drift_beta(p: &DriftParams, n_slices: usize, seed: u64) -> DriftTrace {
    let mut rng = stream_rng(seed, 0, JITTER_STREAM);
    let noise = Normal::new(0.0, p.jitter_rad.max(0.0)).expect("finite jitter");
    let betas = (0..n_slices)
        .map(|i| {
            let b = p.model.beta_at(i as f64 * p.slice_duration_s);
            if p.jitter_rad > 0.0 {
                wrap(b + noise.sample(&mut rng))
            } else {
                b
            }
        })
        .collect();
    DriftTrace {
        betas,
        slice_duration_s: p.slice_duration_s,
        pulses_per_slice: p.pulses_per_slice,
    }
}

/// Samples every slice of a trace with its own rotation.
///
/// `cfg.n_total` must equal the trace's total pulse count.
pub fn sample_drifting_tallies(
    cfg: &ProtocolConfig,
    ch: &ChannelParams,
    distance_km: f64,
    trace: &DriftTrace,
    seed: u64,
) -> Result<Vec<OracleTallies>> {
    if trace.total_pulses() != cfg.n_total {
        return Err(Error::TraceMismatch {
            slices: trace.len(),
            per_slice: trace.pulses_per_slice,
            total: cfg.n_total,
        });
    }
    let slice_cfg = cfg.with_n_total(trace.pulses_per_slice);
    trace
        .betas
        .par_iter()
        .enumerate()
        .map(|(i, &beta)| {
            sample_slice(&slice_cfg, &ch.with_beta(beta), distance_km, seed, i as u64)
        })
        .collect()
}
