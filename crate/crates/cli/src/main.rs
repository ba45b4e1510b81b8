mod runconfig;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use rfi_qkd::keyrate::{group_and_extract, GroupedData, GroupingOptions};
use rfi_qkd::report::{
    compare, distance_grid, point_tallies, scan, write_compare_csv, write_scan_csv,
};
use rfi_qkd::simulate::{drift_beta, sample_drifting_tallies, sample_tallies};
use rfi_qkd::tallyfile::{read_tallies, write_slices, write_tallies};
use rfi_qkd::{analyze, KeyRateReport, ObservedTallies};

use runconfig::{parse_pulses, DriftName, ModeName, RunConfig};

/// Finite-key analysis of reference-frame-independent QKD.
///
/// Exit status: 0 when a positive key results, 2 when the key is empty,
/// 1 on any error.
#[derive(Debug, Parser)]
#[command(name = "rfiqkd", version, allow_negative_numbers = true)]
struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "KM")]
    distance: Option<f64>,
    /// Total pulses sent; accepts `3e12`.
    #[arg(long, global = true, value_name = "N", value_parser = parse_pulses)]
    n_total: Option<u64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeName>,
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,
    /// Number of ρ classification groups for sliced data.
    #[arg(long, global = true, value_name = "M")]
    groups: Option<usize>,
    /// Frame-rotation drift model for sliced Monte Carlo runs.
    #[arg(long, global = true, value_enum, value_name = "MODEL")]
    drift: Option<DriftName>,
    /// Output file instead of stdout (JSON for point/process, CSV otherwise).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Also write the tallies a `point` run analyzed.
    #[arg(long, global = true, value_name = "PATH")]
    dump_tallies: Option<PathBuf>,
    /// Use the estimator forms exactly as originally published, for comparison.
    #[arg(long, global = true)]
    literal_paper_formulas: bool,
    /// Print every configuration key with its default and exit.
    #[arg(long)]
    explain_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze one distance and print every intermediate bound.
    Point,
    /// Key rate over the configured distance range and block sizes.
    Scan,
    /// Four-state, six-four and six-state rates over the distance range.
    Compare,
    /// Analyze a tally file; files with several slices are grouped by ρ.
    Process { file: PathBuf },
    /// Write Monte Carlo tallies (one slice per drift step when drifting).
    Simulate,
}

fn main() -> ExitCode {
    // Usage errors exit with 1; 2 is reserved for "no key".
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(d) = cli.distance {
        c.distance_km = d;
    }
    if let Some(n) = cli.n_total {
        c.n_total = n;
    }
    if let Some(m) = cli.mode {
        c.mode = m;
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(m) = cli.groups {
        c.m_groups = m;
    }
    if let Some(d) = cli.drift {
        c.drift_model = d;
    }
    c.literal_formulas |= cli.literal_paper_formulas;
    Ok(c)
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = io::BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            );
            f(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    emit(Some(path), |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load(&cli)?;
    if cli.explain_defaults {
        print!("{}", cfg.explain()?);
        return Ok(true);
    }
    let Some(command) = &cli.command else {
        bail!("no subcommand given; see --help");
    };
    let setup = cfg.setup()?;
    let opts = cfg.options();
    let out = cli.out.as_deref();

    match command {
        Command::Point => {
            if let Some(slices) = drift_slices(&cfg, &setup)? {
                if let Some(p) = &cli.dump_tallies {
                    emit(Some(p), |w| Ok(write_slices(w, &slices)?))?;
                }
                return grouped(&cfg, &setup, &slices, out);
            }
            let t = point_tallies(&setup, cfg.distance_km, cfg.mode())?;
            if let Some(p) = &cli.dump_tallies {
                emit(Some(p), |w| Ok(write_tallies(w, &t)?))?;
            }
            single(&t, &setup, &opts, out)
        }
        Command::Process { file } => {
            let f = File::open(file).with_context(|| format!("opening {}", file.display()))?;
            let slices = read_tallies(BufReader::new(f))
                .with_context(|| format!("reading {}", file.display()))?;
            match slices.as_slice() {
                [t] => single(t, &setup, &opts, out),
                _ => grouped(&cfg, &setup, &slices, out),
            }
        }
        Command::Scan => {
            let distances = distance_grid(
                cfg.scan_distance_min_km,
                cfg.scan_distance_max_km,
                cfg.scan_distance_step_km,
            );
            let n_totals = match cli.n_total {
                Some(n) => vec![n],
                None => cfg.scan_n_totals.clone(),
            };
            let rows = scan(&setup, &distances, &n_totals, cfg.mode(), &opts);
            emit(out, |w| Ok(write_scan_csv(w, &rows)?))?;
            Ok(rows.iter().any(|r| r.values.key_rate > 0.0))
        }
        Command::Compare => {
            let distances = distance_grid(
                cfg.scan_distance_min_km,
                cfg.scan_distance_max_km,
                cfg.scan_distance_step_km,
            );
            let rows = compare(&setup, &distances, &opts);
            emit(out, |w| Ok(write_compare_csv(w, &rows)?))?;
            Ok(rows.iter().any(|r| r.values.key_rate > 0.0))
        }
        Command::Simulate => {
            match drift_slices(&cfg, &setup)? {
                Some(slices) => emit(out, |w| Ok(write_slices(w, &slices)?))?,
                None => {
                    let t =
                        sample_tallies(&setup.protocol, &setup.channel, cfg.distance_km, cfg.seed)?
                            .observed;
                    emit(out, |w| Ok(write_tallies(w, &t)?))?
                }
            }
            Ok(true)
        }
    }
}

/// Monte Carlo slices under the configured drift, if any.
fn drift_slices(cfg: &RunConfig, setup: &rfi_qkd::Setup) -> Result<Option<Vec<ObservedTallies>>> {
    let Some(params) = cfg.drift()? else {
        return Ok(None);
    };
    let trace = drift_beta(&params, cfg.drift_slices, cfg.seed);
    let slices = sample_drifting_tallies(
        &setup.protocol,
        &setup.channel,
        cfg.distance_km,
        &trace,
        cfg.seed,
    )?;
    Ok(Some(slices.into_iter().map(|s| s.observed).collect()))
}

fn single(
    t: &ObservedTallies,
    setup: &rfi_qkd::Setup,
    opts: &rfi_qkd::AnalysisOptions,
    out: Option<&Path>,
) -> Result<bool> {
    let r = analyze(t, &setup.protocol.intensities, &setup.security, opts)?;
    print!("{}", render_report(&r));
    if let Some(p) = out {
        write_json(p, &r)?;
    }
    Ok(r.has_key())
}

fn grouped(
    cfg: &RunConfig,
    setup: &rfi_qkd::Setup,
    slices: &[ObservedTallies],
    out: Option<&Path>,
) -> Result<bool> {
    let g = GroupingOptions {
        m: cfg.m_groups,
        rho: cfg.rho_inputs(setup),
        method: cfg.rho_method,
    };
    let data = group_and_extract(
        slices,
        &g,
        &setup.protocol.intensities,
        &setup.security,
        &cfg.options(),
    )?;
    print!("{}", render_grouped(&data));
    if let Some(p) = out {
        write_json(p, &data)?;
    }
    Ok(data.total_key_length > 0.0)
}

fn render_report(r: &KeyRateReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "n_total      {}", r.n_total);
    let _ = writeln!(s, "n_zz         {}", r.n_zz);
    let _ = writeln!(s, "e_zz         {:.6e}", r.e_zz);
    let _ = writeln!(s, "s0_zz_lower  {:.6e}", r.s0_zz_lower);
    let _ = writeln!(s, "s1_zz_lower  {:.6e}", r.s1_zz_lower);
    let _ = writeln!(s, "c44_lower    {:.6e}", r.c44_lower);
    let _ = writeln!(s, "i_e          {:.6e}", r.i_e);
    let _ = writeln!(s, "key_length   {:.6e}", r.key_length);
    let _ = writeln!(s, "key_rate     {:.6e}", r.key_rate);
    for (k, v) in &r.intermediate {
        let _ = writeln!(s, "  {k:<22} {v:.6e}");
    }
    let _ = writeln!(s, "flags        {}", r.flags.join(";"));
    s
}

fn render_grouped(d: &GroupedData) -> String {
    let mut s = String::new();
    for b in d.buckets.iter().chain(std::iter::once(&d.overflow)) {
        let label = match b.range {
            Some((lo, hi)) => format!("[{lo:.4}, {hi:.4})"),
            None => "overflow".to_string(),
        };
        let _ = write!(
            s,
            "group {label:<18} slices {:>5}  key_length {:.6e}",
            b.slices.len(),
            b.key_length()
        );
        if let Some(diag) = &b.diagnostic {
            let _ = write!(s, "  ({diag})");
        }
        if let Some(r) = &b.report {
            let _ = write!(s, "  c44_lower {:.6e}  e_zz {:.6e}", r.c44_lower, r.e_zz);
        }
        s.push('\n');
    }
    let _ = writeln!(s, "n_total      {}", d.n_total);
    let _ = writeln!(s, "key_length   {:.6e}", d.total_key_length);
    let _ = writeln!(s, "key_rate     {:.6e}", d.key_rate);
    s
}
