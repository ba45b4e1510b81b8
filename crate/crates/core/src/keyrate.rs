//! Finite-key length, the end-to-end analysis pipeline, and drift grouping.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Intensities, SecurityParams};
use crate::decoy::{
    error_count_bound, matched_error_rate, single_photon_bound, single_photon_error_rate, tau,
    vacuum_bound, BoundedCount, Estimator, FormulaSet, RateBound,
};
use crate::error::Result;
use crate::security::{c_bounds, ie_4state, CBounds, XCellRates};
use crate::tally::{ClassCounts, ObservedTallies};
use crate::types::{BasisLabel, Intensity, StateLabel};

/// Binary Shannon entropy in bits, with `h(0) = h(1) = 0`.
///
/// ```
/// use rfi_qkd::keyrate::binary_entropy;
/// assert_eq!(binary_entropy(0.5), 1.0);
/// assert!((binary_entropy(0.11) - 0.499_916).abs() < 1e-6);
/// ```
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Which Z-basis detections feed the error-correction and sifting terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NzzScope {
    /// Clicks at every intensity form the raw key.
    #[default]
    AllIntensities,
    /// Only signal-intensity clicks form the raw key.
    SignalOnly,
}

/// Knobs of the analysis pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Drop fluctuation intervals and the finite-size terms of the key length.
    pub asymptotic: bool,
    pub formulas: FormulaSet,
    pub nzz_scope: NzzScope,
}

impl AnalysisOptions {
    pub fn asymptotic() -> Self {
        AnalysisOptions {
            asymptotic: true,
            ..Default::default()
        }
    }

    pub fn estimator(&self, sec: &SecurityParams) -> Estimator {
        Estimator {
            eps: sec.eps_bar,
            fluctuations: !self.asymptotic,
            formulas: self.formulas,
        }
    }

    pub fn literal(&self) -> bool {
        self.formulas == FormulaSet::Printed
    }
}

/// Inputs of the key-length formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyInputs {
    pub s0: f64,
    pub s1: f64,
    pub i_e: f64,
    pub n_zz: f64,
    pub e_zz: f64,
}

/// Key length before and after clamping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyLength {
    pub bits: f64,
    pub raw: f64,
}

impl KeyLength {
    pub fn negative(&self) -> bool {
        self.raw < 0.0
    }
}

/// `ℓ = s0 + s1(1 - I_E) - n f h(E) - log2(2/ε_EC) - 2 log2(2/ε_PA)
///      - 7 sqrt(n log2(2/ε̄)) - 30 log2(N + 1)`, clamped at 0.
///
/// With `finite == false` the last four terms are dropped.
pub fn key_length(k: &KeyInputs, sec: &SecurityParams, n_total: u64, finite: bool) -> KeyLength {
    let mut raw = k.s0 + k.s1 * (1.0 - k.i_e) - k.n_zz * sec.ec_efficiency * binary_entropy(k.e_zz);
    if finite {
        raw -= (2.0 / sec.eps_ec).log2()
            + 2.0 * (2.0 / sec.eps_pa).log2()
            + 7.0 * (k.n_zz * (2.0 / sec.eps_bar).log2()).sqrt()
            + 30.0 * (n_total as f64 + 1.0).log2();
    }
    KeyLength {
        bits: raw.max(0.0),
        raw,
    }
}

/// Output of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub s0_zz_lower: f64,
    pub s1_zz_lower: f64,
    pub c44_lower: f64,
    pub i_e: f64,
    pub e_zz: f64,
    pub n_zz: u64,
    pub key_length: f64,
    pub key_rate: f64,
    pub n_total: u64,
    /// Every named intermediate bound, for audit.
    pub intermediate: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl KeyRateReport {
    pub fn has_key(&self) -> bool {
        self.key_length > 0.0
    }
}

struct Audit {
    values: BTreeMap<String, f64>,
    flags: Vec<String>,
}

impl Audit {
    fn count(&mut self, name: &str, b: &BoundedCount) {
        self.values.insert(format!("{name}.lower"), b.lower);
        self.values.insert(format!("{name}.point"), b.point);
        self.values.insert(format!("{name}.upper"), b.upper);
        if b.clamped {
            self.flags.push(format!("{name}_clamped"));
        }
        if b.inverted {
            self.flags.push(format!("{name}_inverted"));
        }
    }

    fn rate(&mut self, name: &str, r: &RateBound) {
        self.values.insert(format!("{name}.lower"), r.lower);
        self.values.insert(format!("{name}.upper"), r.upper);
        if r.degenerate {
            self.flags.push(format!("{name}_degenerate"));
        }
    }
}

/// Error-rate bounds of the single-photon component of one class.
pub fn class_error_rate(
    class: &ClassCounts,
    k: &Intensities,
    est: &Estimator,
) -> Result<(BoundedCount, BoundedCount, BoundedCount, RateBound)> {
    let s0 = vacuum_bound(class, k, est)?;
    let s1 = single_photon_bound(class, &s0, k, est)?;
    let t = error_count_bound(class, k, est)?;
    let e = match est.formulas {
        FormulaSet::Corrected => matched_error_rate(&t, &s1),
        FormulaSet::Printed => single_photon_error_rate(&t, &s1),
    };
    Ok((s0, s1, t, e))
}

/// Vacuum and single-photon lower bounds of the raw-key class, plus its size
/// and error rate.
pub struct RawKeyEstimate {
    pub s0: BoundedCount,
    pub s1: BoundedCount,
    pub n_zz: u64,
    pub e_zz: f64,
}

pub fn raw_key_estimate(
    zz: &ClassCounts,
    k: &Intensities,
    est: &Estimator,
    scope: NzzScope,
) -> Result<RawKeyEstimate> {
    let mut s0 = vacuum_bound(zz, k, est)?;
    let mut s1 = single_photon_bound(zz, &s0, k, est)?;
    let (n, m) = match scope {
        NzzScope::AllIntensities => (zz.total_detected(), zz.total_errors()),
        NzzScope::SignalOnly => {
            let sig = k.signal;
            let share0 = sig.prob * (-sig.mean).exp() / tau(0, k);
            let share1 = sig.prob * sig.mean * (-sig.mean).exp() / tau(1, k);
            for (b, f) in [(&mut s0, share0), (&mut s1, share1)] {
                b.lower *= f;
                b.point *= f;
                b.upper *= f;
            }
            (zz.detected(Intensity::Signal), zz.errors(Intensity::Signal))
        }
    };
    let e_zz = if n > 0 { m as f64 / n as f64 } else { 0.0 };
    Ok(RawKeyEstimate {
        s0,
        s1,
        n_zz: n,
        e_zz,
    })
}

/// Runs the decoy, channel-quality and key-length stages on observed tallies.
pub fn analyze(
    t: &ObservedTallies,
    k: &Intensities,
    sec: &SecurityParams,
    opts: &AnalysisOptions,
) -> Result<KeyRateReport> {
    t.check()?;
    let est = opts.estimator(sec);
    let mut audit = Audit {
        values: BTreeMap::new(),
        flags: Vec::new(),
    };

    let zz = t.class(&[StateLabel::Z0, StateLabel::Z1], BasisLabel::Z);
    let raw = raw_key_estimate(&zz, k, &est, opts.nzz_scope)?;
    audit.count("s0_zz", &raw.s0);
    audit.count("s1_zz", &raw.s1);

    let mut rates = [RateBound::exact(0.0); 4];
    for (i, s) in StateLabel::ALL.into_iter().enumerate() {
        let tag = format!("{}x", s.as_str().to_lowercase());
        let (s0, s1, te, e) = class_error_rate(&t.class(&[s], BasisLabel::X), k, &est)?;
        audit.count(&format!("s0_{tag}"), &s0);
        audit.count(&format!("s1_{tag}"), &s1);
        audit.count(&format!("t_{tag}"), &te);
        audit.rate(&format!("e_{tag}"), &e);
        rates[i] = e;
    }
    let x = XCellRates {
        z0: rates[0],
        z1: rates[1],
        x0: rates[2],
        y0: rates[3],
    };
    let cb = c_bounds(&x, opts.literal());
    record_c(&mut audit, &cb);
    let i_e = ie_4state(cb.c44_lower);

    Ok(finish(
        audit,
        &raw,
        cb.c44_lower,
        i_e,
        t.pulses(),
        sec,
        opts,
    ))
}

fn record_c(audit: &mut Audit, cb: &CBounds) {
    audit.values.insert("c1.lower".into(), cb.c1.lower);
    audit.values.insert("c1.upper".into(), cb.c1.upper);
    audit.values.insert("c2.lower".into(), cb.c2.lower);
    audit.values.insert("c2.upper".into(), cb.c2.upper);
    let unclamped = cb.c1.abs_lower().hypot(cb.c2.abs_lower());
    if unclamped > 1.0 {
        audit.values.insert("c44.unclamped".into(), unclamped);
        audit.flags.push("c44_clamped".into());
    }
}

/// Assembles a report from the raw-key estimate and an Eve-information bound.
#[allow(clippy::too_many_arguments)]
pub(crate) fn finish_report(
    values: BTreeMap<String, f64>,
    flags: Vec<String>,
    raw: &RawKeyEstimate,
    c: f64,
    i_e: f64,
    n_total: u64,
    sec: &SecurityParams,
    opts: &AnalysisOptions,
) -> KeyRateReport {
    finish(Audit { values, flags }, raw, c, i_e, n_total, sec, opts)
}

fn finish(
    mut audit: Audit,
    raw: &RawKeyEstimate,
    c: f64,
    i_e: f64,
    n_total: u64,
    sec: &SecurityParams,
    opts: &AnalysisOptions,
) -> KeyRateReport {
    let inputs = KeyInputs {
        s0: raw.s0.lower,
        s1: raw.s1.lower,
        i_e,
        n_zz: raw.n_zz as f64,
        e_zz: raw.e_zz,
    };
    let len = key_length(&inputs, sec, n_total, !opts.asymptotic);
    audit.values.insert("key_length.raw".into(), len.raw);
    if len.negative() {
        audit.flags.push("negative_length".into());
    }
    let key_rate = if n_total > 0 {
        len.bits / n_total as f64
    } else {
        audit.flags.push("no_pulses".into());
        0.0
    };
    KeyRateReport {
        s0_zz_lower: raw.s0.lower,
        s1_zz_lower: raw.s1.lower,
        c44_lower: c,
        i_e,
        e_zz: raw.e_zz,
        n_zz: raw.n_zz,
        key_length: len.bits,
        key_rate,
        n_total,
        intermediate: audit.values,
        flags: audit.flags,
    }
}

/// How a slice's X-basis statistics are mapped to a classification angle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMethod {
    /// Closed-form inversion with `e^{+ημ}` inside the square root.
    #[default]
    Printed,
    /// As `Printed` with `e^{-ημ}`.
    NegatedExponent,
    /// `atan2` of the two normalized correlators.
    Quadrature,
}

/// Channel constants the classifier needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoInputs {
    /// Transmittance of the X path.
    pub eta: f64,
    /// Signal intensity.
    pub mu: f64,
    pub dark_count: f64,
    pub e0: f64,
}

/// Classification angle of one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rho {
    pub value: f64,
    /// The arccos argument was outside [-1, 1].
    pub clamped: bool,
}

/// Maps signal-intensity error rates of X0 and Y0 measured in X to an angle
/// in `[0, 2π]`. Returns `None` when the normalized rate or `H` is not
/// positive.
pub fn rho_classify(e_xx: f64, e_yx: f64, p: &RhoInputs, method: RhoMethod) -> Option<Rho> {
    if method == RhoMethod::Quadrature {
        // The visibility scales both correlators alike, so atan2 needs no
        // normalization.
        let angle = (1.0 - 2.0 * e_yx).atan2(1.0 - 2.0 * e_xx).rem_euclid(TAU);
        return Some(Rho {
            value: angle,
            clamped: false,
        });
    }
    let ex = (e_xx - p.e0) / (1.0 - p.e0);
    let ey = (e_yx - p.e0) / (1.0 - p.e0);
    if ex <= 0.0 {
        return None;
    }
    let sign = if method == RhoMethod::Printed {
        1.0
    } else {
        -1.0
    };
    let em = 1.0 - p.dark_count;
    let rad =
        4.0 * (sign * p.eta * p.mu).exp() * ey * (1.0 - ex) + em * em * (1.0 - 2.0 * ex).powi(2);
    if rad < 0.0 {
        return None;
    }
    let h = em * (2.0 * ex - 1.0) + rad.sqrt();
    if h <= 0.0 {
        return None;
    }
    let arg = 2.0 / (p.eta * p.mu) * (h / (2.0 * ex)).ln() - 1.0;
    let clamped = !(-1.0..=1.0).contains(&arg);
    let a = arg.clamp(-1.0, 1.0).acos();
    let value = if e_xx < 0.5 { a } else { TAU - a };
    Some(Rho { value, clamped })
}

/// Signal-intensity X-basis error rates `(E_X0X, E_Y0X)` of a tally set.
pub fn signal_x_rates(t: &ObservedTallies) -> (f64, f64) {
    let r = |s| {
        let c = t.cell(s, BasisLabel::X, Intensity::Signal);
        if c.detected == 0 {
            0.5
        } else {
            c.errors as f64 / c.detected as f64
        }
    };
    (r(StateLabel::X0), r(StateLabel::Y0))
}

/// One classification bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    /// Half-open ρ range; `None` for the overflow bucket.
    pub range: Option<(f64, f64)>,
    pub slices: Vec<usize>,
    pub tallies: ObservedTallies,
    /// `None` when the bucket was empty or lacked a required cell.
    pub report: Option<KeyRateReport>,
    pub diagnostic: Option<String>,
}

impl Bucket {
    pub fn key_length(&self) -> f64 {
        self.report.as_ref().map_or(0.0, |r| r.key_length)
    }
}

/// Slices partitioned into buckets, with per-bucket analyses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedData {
    pub buckets: Vec<Bucket>,
    /// Slices whose classification was degenerate.
    pub overflow: Bucket,
    /// ρ of every slice (`None` when degenerate).
    pub rho: Vec<Option<f64>>,
    pub total_key_length: f64,
    pub n_total: u64,
    pub key_rate: f64,
}

/// Settings of [`group_and_extract`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupingOptions {
    pub m: usize,
    pub rho: RhoInputs,
    pub method: RhoMethod,
}

/// Classifies slices by ρ, analyzes every bucket, and sums the key lengths.
///
/// `m == 1` skips classification and analyzes the pooled tallies.
pub fn group_and_extract(
    slices: &[ObservedTallies],
    g: &GroupingOptions,
    k: &Intensities,
    sec: &SecurityParams,
    opts: &AnalysisOptions,
) -> Result<GroupedData> {
    let m = g.m.max(1);
    for s in slices {
        s.check()?;
    }
    let width = TAU / m as f64;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut overflow = Vec::new();
    let mut rho = Vec::with_capacity(slices.len());
    for (i, s) in slices.iter().enumerate() {
        if m == 1 {
            members[0].push(i);
            rho.push(None);
            continue;
        }
        let (exx, eyx) = signal_x_rates(s);
        match rho_classify(exx, eyx, &g.rho, g.method) {
            Some(r) => {
                let b = ((r.value / width).floor() as usize).min(m - 1);
                members[b].push(i);
                rho.push(Some(r.value));
            }
            None => {
                overflow.push(i);
                rho.push(None);
            }
        }
    }

    let run = |range: Option<(f64, f64)>, idx: Vec<usize>| -> Result<Bucket> {
        let tallies = ObservedTallies::sum(idx.iter().map(|&i| &slices[i]));
        let (report, diagnostic) = if idx.is_empty() {
            (None, Some("empty".to_string()))
        } else if let Some(cell) = missing_cell(&tallies) {
            (None, Some(format!("no detections in {cell}")))
        } else {
            (Some(analyze(&tallies, k, sec, opts)?), None)
        };
        Ok(Bucket {
            range,
            slices: idx,
            tallies,
            report,
            diagnostic,
        })
    };

    let buckets: Vec<Bucket> = members
        .into_par_iter()
        .enumerate()
        .map(|(i, idx)| run(Some((i as f64 * width, (i + 1) as f64 * width)), idx))
        .collect::<Result<_>>()?;
    let overflow = run(None, overflow)?;

    // Fixed-order reduction.
    let total_key_length =
        buckets.iter().map(Bucket::key_length).sum::<f64>() + overflow.key_length();
    let n_total: u64 = slices.iter().map(ObservedTallies::pulses).sum();
    let key_rate = if n_total > 0 {
        total_key_length / n_total as f64
    } else {
        0.0
    };
    Ok(GroupedData {
        buckets,
        overflow,
        rho,
        total_key_length,
        n_total,
        key_rate,
    })
}

/// First estimator cell without detections, if any.
fn missing_cell(t: &ObservedTallies) -> Option<crate::types::CellId> {
    use crate::types::CellId;
    let needed = StateLabel::ALL
        .into_iter()
        .flat_map(|s| {
            Intensity::ALL
                .into_iter()
                .map(move |i| CellId::new(s, BasisLabel::X, i))
        })
        .chain([StateLabel::Z0, StateLabel::Z1].into_iter().flat_map(|s| {
            Intensity::ALL
                .into_iter()
                .map(move |i| CellId::new(s, BasisLabel::Z, i))
        }));
    needed.into_iter().find(|&id| t[id].detected == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{expected_tallies, transmittance};
    use crate::config::{ChannelParams, ProtocolConfig};
    use std::f64::consts::PI;

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert_eq!(binary_entropy(0.5), 1.0);
        // 40-digit reference.
        assert!((binary_entropy(0.11) - 0.499_915_958_164_528).abs() < 1e-13);
    }

    #[test]
    fn empty_inputs_clamp_to_zero() {
        let sec = SecurityParams::default();
        let k = KeyInputs {
            s0: 0.0,
            s1: 0.0,
            i_e: 0.0,
            n_zz: 0.0,
            e_zz: 0.0,
        };
        let l = key_length(&k, &sec, 1000, true);
        assert_eq!(l.bits, 0.0);
        assert!(l.negative());
    }

    #[test]
    fn full_information_leak_cancels_single_photons() {
        let sec = SecurityParams::default();
        let a = KeyInputs {
            s0: 1e6,
            s1: 1e8,
            i_e: 1.0,
            n_zz: 1e8,
            e_zz: 0.0,
        };
        let b = KeyInputs { s1: 0.0, ..a };
        assert_eq!(
            key_length(&a, &sec, 1, false).raw,
            key_length(&b, &sec, 1, false).raw
        );
    }

    #[test]
    fn reference_inputs_land_near_reported_rate() {
        // Single-photon count, C44 and E_ZZ of the 200 km run; vacuum count
        // and raw-key size from the channel model.
        let sec = SecurityParams::default();
        let n = 3e12;
        let i_e = ie_4state(0.6503);
        let k = KeyInputs {
            s0: 2.0e4,
            s1: 3.3e7,
            i_e,
            n_zz: 4.0e7,
            e_zz: 0.0077,
        };
        let r = key_length(&k, &sec, n as u64, true).bits / n;
        assert!(r > 3.04e-6 / 3.0 && r < 3.04e-6 * 3.0, "{r}");
    }

    #[test]
    fn reference_point_pipeline() {
        let cfg = ProtocolConfig::default();
        let ch = ChannelParams::default();
        let t = expected_tallies(&cfg, &ch, 200.0);
        let sec = SecurityParams::default();
        let r = analyze(&t, &cfg.intensities, &sec, &AnalysisOptions::default()).unwrap();
        assert!(r.key_rate > 6e-7 && r.key_rate < 1.5e-5, "{r:#?}");
        assert_eq!(r.key_rate, r.key_length / r.n_total as f64);
        assert!(r.c44_lower > 0.9 && r.c44_lower <= 1.0);
        let a = analyze(&t, &cfg.intensities, &sec, &AnalysisOptions::asymptotic()).unwrap();
        assert!(a.key_rate > r.key_rate);
    }

    #[test]
    fn small_blocks_yield_no_key() {
        let cfg = ProtocolConfig::default().with_n_total(1_000_000);
        let t = expected_tallies(&cfg, &ChannelParams::default(), 200.0);
        let r = analyze(
            &t,
            &cfg.intensities,
            &SecurityParams::default(),
            &AnalysisOptions::default(),
        )
        .unwrap();
        assert_eq!(r.key_length, 0.0);
        assert!(r.flags.iter().any(|f| f == "negative_length"));
    }

    #[test]
    fn rate_decreases_with_distance() {
        let cfg = ProtocolConfig::default().with_n_total(10_000_000_000_000);
        let ch = ChannelParams::default();
        let sec = SecurityParams::default();
        let mut prev = f64::INFINITY;
        for d in (0..=250).step_by(10) {
            let t = expected_tallies(&cfg, &ch, d as f64);
            let r = analyze(&t, &cfg.intensities, &sec, &AnalysisOptions::default())
                .unwrap()
                .key_rate;
            assert!(r < prev || r == 0.0, "{d} km: {r} vs {prev}");
            prev = r;
        }
    }

    fn rho_inputs(d: f64) -> RhoInputs {
        let ch = ChannelParams::default();
        RhoInputs {
            eta: transmittance(d, BasisLabel::X, &ch),
            mu: 0.55,
            dark_count: ch.dark_count,
            e0: ch.e0,
        }
    }

    #[test]
    fn rho_branch_symmetry() {
        // Below E_XX = 1/2 the angle lies on the upper half-turn, above it on
        // the lower one, and the two are mirror images: ρ' = 2π − arccos(arg).
        let p = rho_inputs(50.0);
        let mut seen = 0;
        for i in 1..50 {
            for j in 1..50 {
                let (exx, eyx) = (i as f64 / 50.0, j as f64 / 50.0);
                let Some(r) = rho_classify(exx, eyx, &p, RhoMethod::Printed) else {
                    continue;
                };
                seen += 1;
                if exx < 0.5 {
                    assert!((0.0..=PI).contains(&r.value), "{exx} {eyx} {r:?}");
                } else {
                    assert!((PI..=TAU).contains(&r.value), "{exx} {eyx} {r:?}");
                }
                let ex = (exx - p.e0) / (1.0 - p.e0);
                let ey = (eyx - p.e0) / (1.0 - p.e0);
                let em = 1.0 - p.dark_count;
                let h = em * (2.0 * ex - 1.0)
                    + (4.0 * (p.eta * p.mu).exp() * ey * (1.0 - ex)
                        + em * em * (1.0 - 2.0 * ex).powi(2))
                    .sqrt();
                let a = (2.0 / (p.eta * p.mu) * (h / (2.0 * ex)).ln() - 1.0)
                    .clamp(-1.0, 1.0)
                    .acos();
                let expect = if exx < 0.5 { a } else { TAU - a };
                assert!((r.value - expect).abs() < 1e-12);
            }
        }
        assert!(seen > 1000);
    }

    #[test]
    fn rho_clamps_and_degenerates() {
        let p = rho_inputs(50.0);
        let r = rho_classify(0.3, 0.1, &p, RhoMethod::Printed).unwrap();
        assert!(r.clamped);
        assert_eq!(r.value, std::f64::consts::PI);
        assert!(rho_classify(0.005, 0.5, &p, RhoMethod::Printed).is_none());
        assert!(rho_classify(0.3, 0.3, &p, RhoMethod::NegatedExponent).is_some());
    }

    #[test]
    fn quadrature_tracks_rotation() {
        use crate::channel::misalignment_error;
        let p = rho_inputs(0.0);
        for i in 0..36 {
            let beta = TAU * i as f64 / 36.0;
            let exx = misalignment_error(StateLabel::X0, BasisLabel::X, beta, p.e0);
            let eyx = misalignment_error(StateLabel::Y0, BasisLabel::X, beta, p.e0);
            let r = rho_classify(exx, eyx, &p, RhoMethod::Quadrature)
                .unwrap()
                .value;
            let d = (r - beta).rem_euclid(TAU);
            assert!(d.min(TAU - d) < 1e-9, "{beta} -> {r}");
        }
    }

    #[test]
    fn single_bucket_equals_pooled_analysis() {
        let cfg = ProtocolConfig::default().with_n_total(20_000_000_000);
        let ch = ChannelParams::default();
        let sec = SecurityParams::default();
        let slices: Vec<_> = (0..4).map(|_| expected_tallies(&cfg, &ch, 20.0)).collect();
        let pooled = ObservedTallies::sum(slices.iter());
        let g = GroupingOptions {
            m: 1,
            rho: rho_inputs(20.0),
            method: RhoMethod::Printed,
        };
        let opts = AnalysisOptions::default();
        let grouped = group_and_extract(&slices, &g, &cfg.intensities, &sec, &opts).unwrap();
        let direct = analyze(&pooled, &cfg.intensities, &sec, &opts).unwrap();
        assert_eq!(grouped.total_key_length, direct.key_length);
        assert_eq!(grouped.buckets[0].tallies, pooled);
    }

    #[test]
    fn buckets_conserve_counts() {
        let cfg = ProtocolConfig::default().with_n_total(1_000_000_000);
        let sec = SecurityParams::default();
        let slices: Vec<_> = (0..12)
            .map(|i| {
                let ch = ChannelParams::default().with_beta(TAU * i as f64 / 12.0);
                expected_tallies(&cfg, &ch, 30.0)
            })
            .collect();
        for method in [
            RhoMethod::Printed,
            RhoMethod::NegatedExponent,
            RhoMethod::Quadrature,
        ] {
            let g = GroupingOptions {
                m: 6,
                rho: rho_inputs(30.0),
                method,
            };
            let out = group_and_extract(
                &slices,
                &g,
                &cfg.intensities,
                &sec,
                &AnalysisOptions::default(),
            )
            .unwrap();
            let mut all: Vec<&ObservedTallies> = out.buckets.iter().map(|b| &b.tallies).collect();
            all.push(&out.overflow.tallies);
            assert_eq!(
                ObservedTallies::sum(all),
                ObservedTallies::sum(slices.iter())
            );
        }
    }
}
