//! CSV tally files.
//!
//! One row per cell with header `state,basis,intensity,sent,detected,errors`.
//! Slice files add a leading `slice` column and hold 24 rows per slice.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::tally::{CellCount, ObservedTallies};
use crate::types::{BasisLabel, CellId, Intensity, StateLabel};

const COLUMNS: [&str; 6] = ["state", "basis", "intensity", "sent", "detected", "errors"];

fn parse_err(line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_err(line, 0, format!("{other:?}")),
    }
}

/// Reads a tally file. Files without a `slice` column yield one slice;
/// slice files yield their slices in ascending slice order.
///
/// Every slice must list all 24 cells exactly once and satisfy
/// `errors <= detected <= sent`.
pub fn read_tallies(input: impl Read) -> Result<Vec<ObservedTallies>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let sliced = header.get(0) == Some("slice");
    let offset = usize::from(sliced);
    let expect: Vec<&str> = if sliced {
        std::iter::once("slice").chain(COLUMNS).collect()
    } else {
        COLUMNS.to_vec()
    };
    if header.iter().collect::<Vec<_>>() != expect {
        return Err(parse_err(
            1,
            1,
            format!("expected header `{}`", expect.join(",")),
        ));
    }

    let mut slices: BTreeMap<u64, (ObservedTallies, [bool; 24])> = BTreeMap::new();
    let mut last_line = 1;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        last_line = line;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<u64> {
            field(i).parse().map_err(|_| {
                parse_err(
                    line,
                    i + 1,
                    format!("`{}` is not a nonnegative integer", field(i)),
                )
            })
        };
        let slice = if sliced { num(0)? } else { 0 };
        let label = |i: usize, e: Error| parse_err(line, i + 1, e.to_string());
        let state: StateLabel = field(offset).parse().map_err(|e| label(offset, e))?;
        let basis: BasisLabel = field(offset + 1)
            .parse()
            .map_err(|e| label(offset + 1, e))?;
        let k: Intensity = field(offset + 2)
            .parse()
            .map_err(|e| label(offset + 2, e))?;
        let id = CellId::new(state, basis, k);
        let count = CellCount {
            sent: num(offset + 3)?,
            detected: num(offset + 4)?,
            errors: num(offset + 5)?,
        };
        let (t, seen) = slices.entry(slice).or_default();
        if seen[id.ordinal()] {
            return Err(parse_err(line, 1, format!("duplicate cell {id}")));
        }
        seen[id.ordinal()] = true;
        t[id] = count;
    }
    if slices.is_empty() {
        return Err(parse_err(last_line, 0, "no tally rows"));
    }
    let mut out = Vec::with_capacity(slices.len());
    for (slice, (t, seen)) in slices {
        if let Some(id) = CellId::all().find(|id| !seen[id.ordinal()]) {
            let whose = if sliced {
                format!("slice {slice}: ")
            } else {
                String::new()
            };
            return Err(parse_err(last_line, 0, format!("{whose}missing cell {id}")));
        }
        t.check()?;
        out.push(t);
    }
    Ok(out)
}

fn write_rows(out: impl Write, slices: &[ObservedTallies], sliced: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if sliced {
        header.insert(0, "slice");
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, t) in slices.iter().enumerate() {
        for (id, c) in t.iter() {
            let mut row = vec![
                id.state.to_string(),
                id.basis.to_string(),
                id.intensity.to_string(),
                c.sent.to_string(),
                c.detected.to_string(),
                c.errors.to_string(),
            ];
            if sliced {
                row.insert(0, i.to_string());
            }
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes one tally set.
pub fn write_tallies(out: impl Write, t: &ObservedTallies) -> Result<()> {
    write_rows(out, std::slice::from_ref(t), false)
}

/// Writes per-slice tallies, numbering slices from 0.
pub fn write_slices(out: impl Write, slices: &[ObservedTallies]) -> Result<()> {
    write_rows(out, slices, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::expected_tallies;
    use crate::config::{ChannelParams, ProtocolConfig};

    fn sample() -> ObservedTallies {
        expected_tallies(
            &ProtocolConfig::default().with_n_total(1_000_000_000),
            &ChannelParams::default(),
            30.0,
        )
    }

    #[test]
    fn round_trip() {
        let t = sample();
        let mut buf = Vec::new();
        write_tallies(&mut buf, &t).unwrap();
        assert_eq!(read_tallies(&buf[..]).unwrap(), vec![t.clone()]);

        let mut buf = Vec::new();
        write_slices(
            &mut buf,
            &[t.clone(), ObservedTallies::default(), t.clone()],
        )
        .unwrap();
        let back = read_tallies(&buf[..]).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[2], t);
    }

    #[test]
    fn aliases_accepted() {
        let mut buf = Vec::new();
        write_tallies(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap().replace(",mu,", ",signal,");
        assert_eq!(read_tallies(text.as_bytes()).unwrap()[0], sample());
    }

    #[test]
    fn errors_carry_positions() {
        let mut buf = Vec::new();
        write_tallies(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();

        let mut bad = lines.clone();
        bad[3] = bad[3].replacen("Z0", "X1", 1);
        match read_tallies(bad.join("\n").as_bytes()) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (4, 1)),
            other => panic!("{other:?}"),
        }

        let mut bad = lines.clone();
        let mut fields: Vec<&str> = lines[2].split(',').collect();
        fields[4] = "-7";
        bad[2] = fields.join(",");
        match read_tallies(bad.join("\n").as_bytes()) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 5)),
            other => panic!("{other:?}"),
        }

        lines.pop();
        match read_tallies(lines.join("\n").as_bytes()) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("missing cell (Y0,X,omega)"), "{message}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inconsistent_cell_named() {
        let text = "state,basis,intensity,sent,detected,errors\n".to_string()
            + &CellId::all()
                .map(|id| {
                    let (d, e) = if id.ordinal() == 5 { (3, 4) } else { (3, 1) };
                    format!("{},{},{},10,{d},{e}\n", id.state, id.basis, id.intensity)
                })
                .collect::<String>();
        match read_tallies(text.as_bytes()) {
            Err(Error::InconsistentCell { cell, .. }) => assert_eq!(cell.ordinal(), 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_header() {
        assert!(matches!(
            read_tallies("a,b\n1,2\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
