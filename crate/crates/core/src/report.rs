//! Single-point runs, distance/block-size scans, protocol comparisons, and
//! their CSV rendering.
//!
//! Points run in parallel; rows come back in input order, so output is
//! identical across thread counts. Floats are written as `{:.6e}`; a
//! non-finite value is written as 0 with a flag naming the column.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{protocol_report, Protocol};
use crate::channel::expected_tallies;
use crate::config::Setup;
use crate::error::Result;
use crate::keyrate::{analyze, AnalysisOptions, KeyRateReport};
use crate::simulate::sample_tallies;
use crate::tally::ObservedTallies;

/// Where tallies come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Expected counts, rounded.
    Analytic,
    /// One Monte Carlo sample.
    MonteCarlo { seed: u64 },
}

/// Tallies of one run at `distance_km`.
pub fn point_tallies(setup: &Setup, distance_km: f64, mode: Mode) -> Result<ObservedTallies> {
    match mode {
        Mode::Analytic => Ok(expected_tallies(
            &setup.protocol,
            &setup.channel,
            distance_km,
        )),
        Mode::MonteCarlo { seed } => {
            Ok(sample_tallies(&setup.protocol, &setup.channel, distance_km, seed)?.observed)
        }
    }
}

/// Full pipeline at one distance.
pub fn point_report(
    setup: &Setup,
    distance_km: f64,
    mode: Mode,
    opts: &AnalysisOptions,
) -> Result<KeyRateReport> {
    let t = point_tallies(setup, distance_km, mode)?;
    analyze(&t, &setup.protocol.intensities, &setup.security, opts)
}

/// Inclusive distance grid; empty when `max < min` or `step <= 0`.
pub fn distance_grid(min: f64, max: f64, step: f64) -> Vec<f64> {
    if step.is_nan() || step <= 0.0 || max < min {
        return Vec::new();
    }
    let n = ((max - min) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| min + i as f64 * step).collect()
}

/// Scalar summary of one report, or of a failed point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowValues {
    pub key_rate: f64,
    pub c_lower: f64,
    pub i_e: f64,
    pub e_zz: f64,
    pub s1_lower: f64,
    pub flags: Vec<String>,
}

impl RowValues {
    fn from_result(r: Result<KeyRateReport>) -> Self {
        match r {
            Ok(r) => RowValues {
                key_rate: r.key_rate,
                c_lower: r.c44_lower,
                i_e: r.i_e,
                e_zz: r.e_zz,
                s1_lower: r.s1_zz_lower,
                flags: r.flags,
            },
            Err(e) => RowValues {
                key_rate: 0.0,
                c_lower: 0.0,
                i_e: 1.0,
                e_zz: 0.0,
                s1_lower: 0.0,
                flags: vec![format!("error: {e}")],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n_total: u64,
    pub distance_km: f64,
    pub values: RowValues,
}

/// One row per (block size, distance), block size outermost.
pub fn scan(
    setup: &Setup,
    distances: &[f64],
    n_totals: &[u64],
    mode: Mode,
    opts: &AnalysisOptions,
) -> Vec<ScanRow> {
    let points: Vec<(u64, f64)> = n_totals
        .iter()
        .flat_map(|&n| distances.iter().map(move |&d| (n, d)))
        .collect();
    points
        .par_iter()
        .map(|&(n, d)| {
            let s = Setup {
                protocol: setup.protocol.with_n_total(n),
                ..*setup
            };
            ScanRow {
                n_total: n,
                distance_km: d,
                values: RowValues::from_result(point_report(&s, d, mode, opts)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub distance_km: f64,
    pub protocol: Protocol,
    pub values: RowValues,
}

/// All protocols at every distance, ordered by distance then protocol.
pub fn compare(setup: &Setup, distances: &[f64], opts: &AnalysisOptions) -> Vec<CompareRow> {
    let points: Vec<(f64, Protocol)> = distances
        .iter()
        .flat_map(|&d| Protocol::ALL.into_iter().map(move |p| (d, p)))
        .collect();
    points
        .par_iter()
        .map(|&(d, p)| {
            let r = protocol_report(p, &setup.protocol, &setup.channel, &setup.security, d, opts);
            CompareRow {
                distance_km: d,
                protocol: p,
                values: RowValues::from_result(r),
            }
        })
        .collect()
}

/// Formats a float for CSV output, replacing non-finite values by 0.
pub fn format_value(x: f64, column: &str, flags: &mut Vec<String>) -> String {
    if x.is_finite() {
        format!("{x:.6e}")
    } else {
        flags.push(format!("non_finite_{column}"));
        format!("{:.6e}", 0.0)
    }
}

fn write_csv(
    out: impl Write,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| crate::error::Error::Io(e.into());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub const SCAN_HEADER: [&str; 7] = [
    "n_total",
    "distance_km",
    "key_rate",
    "c44_lower",
    "e_zz",
    "s1_lower",
    "flags",
];
pub const COMPARE_HEADER: [&str; 7] = [
    "distance_km",
    "protocol",
    "key_rate",
    "c_lower",
    "i_e",
    "e_zz",
    "flags",
];

pub fn write_scan_csv(out: impl Write, rows: &[ScanRow]) -> Result<()> {
    write_csv(
        out,
        &SCAN_HEADER,
        rows.iter().map(|r| {
            let mut flags = r.values.flags.clone();
            let mut row = vec![r.n_total.to_string()];
            for (x, col) in [
                (r.distance_km, "distance_km"),
                (r.values.key_rate.max(0.0), "key_rate"),
                (r.values.c_lower, "c44_lower"),
                (r.values.e_zz, "e_zz"),
                (r.values.s1_lower, "s1_lower"),
            ] {
                row.push(format_value(x, col, &mut flags));
            }
            row.push(flags.join(";"));
            row
        }),
    )
}

pub fn write_compare_csv(out: impl Write, rows: &[CompareRow]) -> Result<()> {
    write_csv(
        out,
        &COMPARE_HEADER,
        rows.iter().map(|r| {
            let mut flags = r.values.flags.clone();
            let mut row = vec![
                format_value(r.distance_km, "distance_km", &mut flags),
                r.protocol.to_string(),
            ];
            for (x, col) in [
                (r.values.key_rate.max(0.0), "key_rate"),
                (r.values.c_lower, "c_lower"),
                (r.values.i_e, "i_e"),
                (r.values.e_zz, "e_zz"),
            ] {
                row.push(format_value(x, col, &mut flags));
            }
            row.push(flags.join(";"));
            row
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_edges() {
        assert_eq!(distance_grid(0.0, 20.0, 10.0), vec![0.0, 10.0, 20.0]);
        assert!(distance_grid(10.0, 0.0, 10.0).is_empty());
        assert!(distance_grid(0.0, 10.0, 0.0).is_empty());
        assert_eq!(distance_grid(0.0, 0.3, 0.1).len(), 4);
    }

    #[test]
    fn empty_scan_is_header_only() {
        let rows = scan(
            &Setup::default(),
            &[],
            &[1_000_000],
            Mode::Analytic,
            &AnalysisOptions::default(),
        );
        let mut buf = Vec::new();
        write_scan_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "n_total,distance_km,key_rate,c44_lower,e_zz,s1_lower,flags\n"
        );
    }

    #[test]
    fn non_finite_values_are_flagged() {
        let mut flags = Vec::new();
        assert_eq!(format_value(f64::NAN, "x", &mut flags), "0.000000e0");
        assert_eq!(flags, vec!["non_finite_x".to_string()]);
        assert_eq!(format_value(3.04e-6, "x", &mut flags), "3.040000e-6");
    }

    #[test]
    fn scan_rows_ordered_and_nested() {
        let rows = scan(
            &Setup::default(),
            &[0.0, 100.0],
            &[10_u64.pow(11), 10_u64.pow(13)],
            Mode::Analytic,
            &AnalysisOptions::default(),
        );
        let keys: Vec<(u64, f64)> = rows.iter().map(|r| (r.n_total, r.distance_km)).collect();
        assert_eq!(
            keys,
            vec![
                (10_u64.pow(11), 0.0),
                (10_u64.pow(11), 100.0),
                (10_u64.pow(13), 0.0),
                (10_u64.pow(13), 100.0)
            ]
        );
        assert!(rows[2].values.key_rate >= rows[0].values.key_rate);
    }
}
