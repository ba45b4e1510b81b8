use std::path::Path;
use std::process::{Command, Output};

use rfi_qkd::keyrate::{group_and_extract, GroupedData, GroupingOptions, RhoInputs, RhoMethod};
use rfi_qkd::tallyfile::read_tallies;
use rfi_qkd::{BasisLabel, KeyRateReport, Setup};

fn rfiqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfiqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn point_exit_codes() {
    assert_eq!(rfiqkd(&["point"]).status.code(), Some(0));
    let none = rfiqkd(&["point", "--n-total", "1e6"]);
    assert_eq!(none.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&none.stdout).contains("negative_length"));
    assert_eq!(
        rfiqkd(&["point", "--distance", "-5"]).status.code(),
        Some(1)
    );
    assert_eq!(rfiqkd(&["point", "--mode", "bogus"]).status.code(), Some(1));
    assert_eq!(rfiqkd(&["--help"]).status.code(), Some(0));
}

#[test]
fn point_prints_intermediate_bounds() {
    let o = rfiqkd(&["point"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for key in [
        "s1_zz.lower",
        "c1.lower",
        "c2.upper",
        "t_y0x.upper",
        "key_rate",
    ] {
        assert!(text.contains(key), "{key} missing");
    }
}

#[test]
fn dump_then_process_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let tallies = dir.path().join("t.csv");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for mode in ["analytic", "montecarlo"] {
        let o = rfiqkd(&[
            "point",
            "--mode",
            mode,
            "--seed",
            "4",
            "--dump-tallies",
            path(&tallies),
            "--out",
            path(&a),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let o = rfiqkd(&["process", path(&tallies), "--out", path(&b)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let ra: KeyRateReport = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
        let rb: KeyRateReport = serde_json::from_slice(&std::fs::read(&b).unwrap()).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}

#[test]
fn inconsistent_cell_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.csv");
    assert_eq!(
        rfiqkd(&["simulate", "--n-total", "1e9", "--out", path(&file)])
            .status
            .code(),
        Some(0)
    );
    let text = std::fs::read_to_string(&file).unwrap();
    let broken: String = text
        .lines()
        .map(|l| {
            if l.starts_with("Y0,X,nu,") {
                "Y0,X,nu,10,5,6".to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&file, broken).unwrap();
    let o = rfiqkd(&["process", path(&file)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("(Y0,X,nu)"), "{}", stderr(&o));
}

#[test]
fn parse_errors_cite_position() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.csv");
    std::fs::write(
        &file,
        "state,basis,intensity,sent,detected,errors\nZ0,Z,mu,10,x,0\n",
    )
    .unwrap();
    let o = rfiqkd(&["process", path(&file)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn slice_file_matches_in_memory_grouping() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("slices.csv");
    let json = dir.path().join("g.json");
    let common = [
        "--drift",
        "linear",
        "--n-total",
        "2e11",
        "--distance",
        "50",
        "--seed",
        "3",
        "--groups",
        "6",
    ];
    let o = rfiqkd(&[&["simulate", "--out", path(&file)], &common[..]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = rfiqkd(&[&["process", path(&file), "--out", path(&json)], &common[..]].concat());
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", stderr(&o));
    let from_cli: GroupedData = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();

    let slices = read_tallies(std::fs::File::open(&file).unwrap()).unwrap();
    assert_eq!(slices.len(), 100);
    let s = Setup::default();
    let g = GroupingOptions {
        m: 6,
        rho: RhoInputs {
            eta: rfi_qkd::channel::transmittance(50.0, BasisLabel::X, &s.channel),
            mu: s.protocol.intensities.signal.mean,
            dark_count: s.channel.dark_count,
            e0: s.channel.e0,
        },
        method: RhoMethod::Printed,
    };
    let direct = group_and_extract(
        &slices,
        &g,
        &s.protocol.intensities,
        &s.security,
        &Default::default(),
    )
    .unwrap();
    assert_eq!(from_cli.total_key_length, direct.total_key_length);
    assert_eq!(from_cli, direct);
}

#[test]
fn point_with_drift_dumps_slices_that_reprocess_identically() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("slices.csv");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let common = [
        "--drift",
        "sinusoidal",
        "--n-total",
        "1e11",
        "--distance",
        "20",
    ];
    let o = rfiqkd(
        &[
            &["point", "--dump-tallies", path(&file), "--out", path(&a)],
            &common[..],
        ]
        .concat(),
    );
    let code = o.status.code();
    assert!(matches!(code, Some(0 | 2)), "{}", stderr(&o));
    let o = rfiqkd(&[&["process", path(&file), "--out", path(&b)], &common[..]].concat());
    assert_eq!(o.status.code(), code);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn unknown_config_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "alpha_db_per_km = 0.2\nfiber_loss = 0.2\n").unwrap();
    let o = rfiqkd(&["--config", path(&cfg), "point"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("fiber_loss"));
}

#[test]
fn config_file_values_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n_total = 1e6\n").unwrap();
    assert_eq!(
        rfiqkd(&["--config", path(&cfg), "point"]).status.code(),
        Some(2)
    );
    // Command-line flags take precedence.
    assert_eq!(
        rfiqkd(&["--config", path(&cfg), "point", "--n-total", "3e12"])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn explain_defaults_lists_sources() {
    let o = rfiqkd(&["--explain-defaults"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("alpha_db_per_km = 0.19"));
    assert!(text.lines().all(|l| l.contains(" # ")));
}

#[test]
fn empty_scan_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "scan_distance_min_km = 50.0\nscan_distance_max_km = 10.0\n",
    )
    .unwrap();
    let o = rfiqkd(&["--config", path(&cfg), "scan"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        String::from_utf8(o.stdout).unwrap(),
        "n_total,distance_km,key_rate,c44_lower,e_zz,s1_lower,flags\n"
    );
}

#[test]
fn scan_rates_are_monotone_and_ordered_by_block_size() {
    let o = rfiqkd(&["scan"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<(u64, f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[2].parse().unwrap(),
            )
        })
        .collect();
    assert_eq!(rows.len(), 3 * 26);
    for w in rows.windows(2).filter(|w| w[0].0 == w[1].0) {
        assert!(w[1].2 <= w[0].2, "{w:?}");
    }
    for i in 0..26 {
        assert!(rows[i].2 <= rows[26 + i].2 && rows[26 + i].2 <= rows[52 + i].2);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    for args in [
        &[
            "scan",
            "--mode",
            "montecarlo",
            "--seed",
            "11",
            "--n-total",
            "1e11",
        ][..],
        &["compare"][..],
    ] {
        let a = rfiqkd(args).stdout;
        let b = rfiqkd(args).stdout;
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }
}

#[test]
fn compare_lists_three_protocols_per_distance() {
    let o = rfiqkd(&["compare"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let protocols: Vec<&str> = text
        .lines()
        .skip(1)
        .take(3)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(protocols, ["four-state", "six-four", "six-state"]);
    assert!(text
        .lines()
        .skip(1)
        .all(|l| !l.contains("NaN") && !l.contains("inf")));
}

#[test]
fn missing_subcommand_is_an_error() {
    assert_eq!(rfiqkd(&[]).status.code(), Some(1));
}
