//! Command-line front end for `spinrel`: every command writes one CSV table.

mod config;
mod error;
mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use spinrel::extrema::DEFAULT_BAND;
use spinrel::liouville::{uniform_grid, R_CUTOFF};
use spinrel::{
    critical_x_k2, estimate, evolve_master, reliability_analytic, reliability_and_hazard,
    sample_first_passage, variance_experiment, BasisState, Density64, Monitoring64, Params64,
    PhaseGrid, ScanConfig,
};

pub use config::{parse as parse_config, Entry};
pub use error::CliError;
use output::{fmt_num, fmt_opt, Table};

#[derive(Debug, Parser)]
#[command(
    name = "spinrel",
    version,
    about = "Reliability and hazard of a damped two-site spin chain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form R(t) and h(t) on a uniform grid.
    Analytic(Opts),
    /// R(t) and h(t) from the master equation.
    Numeric(Opts),
    /// Closed form and master equation side by side.
    Compare(Opts),
    /// Extremum class of the hazard over a (gamma1, gamma2) grid.
    Phasemap(Opts),
    /// Per-shot first-passage bins under stroboscopic monitoring.
    #[command(name = "fpt-sample")]
    FptSample(Opts),
    /// Empirical survival and hazard from a simulated monitoring run.
    #[command(name = "fpt-estimate")]
    FptEstimate(Opts),
    /// Spread of the hazard estimator across repeated runs.
    #[command(name = "variance-scan")]
    VarianceScan(Opts),
    /// Transition point x* of the k = 2 extremum quartic.
    #[command(name = "critical-x")]
    CriticalX(Opts),
}

/// Every command accepts the same flag set; flags a command does not use are
/// rejected after parsing.
#[derive(Debug, Clone, Default, Args)]
struct Opts {
    /// Exchange coupling J.
    #[arg(long)]
    j: Option<f64>,
    /// Damping rate of site 1.
    #[arg(long)]
    gamma1: Option<f64>,
    /// Damping rate of site 2.
    #[arg(long)]
    gamma2: Option<f64>,
    /// Integration step and output spacing, or the monitoring interval.
    #[arg(long)]
    dt: Option<f64>,
    /// Time horizon.
    #[arg(long = "t-max")]
    t_max: Option<f64>,
    /// Number of shots; a comma-separated list for variance-scan.
    #[arg(long, value_delimiter = ',')]
    shots: Option<Vec<usize>>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Phase-map points per axis.
    #[arg(long, visible_alias = "grid")]
    n: Option<usize>,
    /// Smallest damping rate in the phase map.
    #[arg(long)]
    gmin: Option<f64>,
    /// Largest damping rate in the phase map.
    #[arg(long)]
    gmax: Option<f64>,
    /// Blank band around |gamma1 - gamma2| = 4J in the phase map.
    #[arg(long)]
    band: Option<f64>,
    /// Repetitions per shot count in variance-scan.
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated evaluation times for variance-scan.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// key = value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Analytic(_) => "analytic",
            Command::Numeric(_) => "numeric",
            Command::Compare(_) => "compare",
            Command::Phasemap(_) => "phasemap",
            Command::FptSample(_) => "fpt-sample",
            Command::FptEstimate(_) => "fpt-estimate",
            Command::VarianceScan(_) => "variance-scan",
            Command::CriticalX(_) => "critical-x",
        }
    }

    fn opts(&self) -> &Opts {
        match self {
            Command::Analytic(o)
            | Command::Numeric(o)
            | Command::Compare(o)
            | Command::Phasemap(o)
            | Command::FptSample(o)
            | Command::FptEstimate(o)
            | Command::VarianceScan(o)
            | Command::CriticalX(o) => o,
        }
    }

    /// Flags the command reads, besides `--config`.
    fn accepted(&self) -> &'static [&'static str] {
        const SERIES: &[&str] = &["j", "gamma1", "gamma2", "dt", "t-max", "out"];
        const FPT: &[&str] = &[
            "j", "gamma1", "gamma2", "dt", "t-max", "shots", "seed", "out",
        ];
        match self {
            Command::Analytic(_) | Command::Numeric(_) | Command::Compare(_) => SERIES,
            Command::Phasemap(_) => &["j", "n", "gmin", "gmax", "band", "out"],
            Command::FptSample(_) | Command::FptEstimate(_) => FPT,
            Command::VarianceScan(_) => &[
                "j", "gamma1", "gamma2", "dt", "t-max", "shots", "seed", "reps", "times", "out",
            ],
            Command::CriticalX(_) => &["out"],
        }
    }
}

impl Opts {
    /// Flags that are set, by config-file key.
    fn present(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut mark = |set: bool, name: &'static str| {
            if set {
                v.push(name)
            }
        };
        mark(self.j.is_some(), "j");
        mark(self.gamma1.is_some(), "gamma1");
        mark(self.gamma2.is_some(), "gamma2");
        mark(self.dt.is_some(), "dt");
        mark(self.t_max.is_some(), "t-max");
        mark(self.shots.is_some(), "shots");
        mark(self.seed.is_some(), "seed");
        mark(self.n.is_some(), "n");
        mark(self.gmin.is_some(), "gmin");
        mark(self.gmax.is_some(), "gmax");
        mark(self.band.is_some(), "band");
        mark(self.reps.is_some(), "reps");
        mark(self.times.is_some(), "times");
        mark(self.out.is_some(), "out");
        v
    }

    /// Fills every unset field from `other`.
    fn or(self, other: Opts) -> Opts {
        Opts {
            j: self.j.or(other.j),
            gamma1: self.gamma1.or(other.gamma1),
            gamma2: self.gamma2.or(other.gamma2),
            dt: self.dt.or(other.dt),
            t_max: self.t_max.or(other.t_max),
            shots: self.shots.or(other.shots),
            seed: self.seed.or(other.seed),
            n: self.n.or(other.n),
            gmin: self.gmin.or(other.gmin),
            gmax: self.gmax.or(other.gmax),
            band: self.band.or(other.band),
            reps: self.reps.or(other.reps),
            times: self.times.or(other.times),
            out: self.out.or(other.out),
            config: self.config.or(other.config),
        }
    }

    fn params(&self) -> Result<Params64, CliError> {
        let need = |v: Option<f64>, flag: &str| {
            v.ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
        };
        Ok(Params64::new(
            need(self.j, "j")?,
            need(self.gamma1, "gamma1")?,
            need(self.gamma2, "gamma2")?,
        )?)
    }
}

/// Reads config-file entries for `command` into an [`Opts`], reusing the
/// flag parsers so values are validated identically.
fn opts_from_config(command: &str, path: &Path) -> Result<Opts, CliError> {
    let entries = config::load(path)?;
    let mut opts = Opts::default();
    for entry in config::for_command(&entries, command) {
        let argv = [
            "spinrel".to_string(),
            command.to_string(),
            format!("--{}", entry.key),
            entry.value.clone(),
        ];
        let parsed = Cli::try_parse_from(argv).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            line: entry.line,
            message: format!(
                "bad value `{}` for `{}`: {}",
                entry.value,
                entry.key,
                e.kind()
            ),
        })?;
        opts = opts.or(parsed.command.opts().clone());
    }
    Ok(opts)
}

fn check_flags(command: &Command, opts: &Opts, origin: &str) -> Result<(), CliError> {
    for flag in opts.present() {
        if !command.accepted().contains(&flag) {
            return Err(CliError::Usage(format!(
                "{origin} --{flag} is not used by `{}`",
                command.name()
            )));
        }
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code: 0 on success, 2 on invalid input, 1 when an
/// internal consistency check fails.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: &Command) -> Result<(), CliError> {
    let flags = command.opts().clone();
    check_flags(command, &flags, "flag")?;
    let opts = match &flags.config {
        Some(path) => {
            let file = opts_from_config(command.name(), path)?;
            check_flags(command, &file, &format!("{}: key", path.display()))?;
            flags.or(file)
        }
        None => flags,
    };
    let table = match command {
        Command::Analytic(_) => series(&opts, true, false)?,
        Command::Numeric(_) => series(&opts, false, true)?,
        Command::Compare(_) => series(&opts, true, true)?,
        Command::Phasemap(_) => phasemap(&opts)?,
        Command::FptSample(_) => fpt_sample(&opts)?,
        Command::FptEstimate(_) => fpt_estimate(&opts)?,
        Command::VarianceScan(_) => variance_scan(&opts)?,
        Command::CriticalX(_) => {
            let x: f64 = critical_x_k2()?;
            println!("{}", fmt_num(x));
            let mut t = Table::new(&["x_star"]);
            t.row(vec![fmt_num(x)]);
            if opts.out.is_none() {
                return Ok(());
            }
            t
        }
    };
    match &opts.out {
        Some(path) => table.write_file(path),
        None => table.write_to(std::io::stdout().lock()).and_then(|mut w| {
            w.flush().map_err(|e| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            })
        }),
    }
}

fn positive(v: f64, flag: &str) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Usage(format!(
            "--{flag} must be finite and > 0 (got {v})"
        )))
    }
}

fn series(opts: &Opts, analytic: bool, numeric: bool) -> Result<Table, CliError> {
    let p = opts.params()?;
    let t_max = positive(opts.t_max.unwrap_or(20.0), "t-max")?;
    let dt = positive(opts.dt.unwrap_or(1e-3), "dt")?;
    let grid = uniform_grid(t_max, dt);
    let numeric_rows = if numeric {
        let traj = evolve_master(&Density64::pure(BasisState::Both), &p, &grid, dt)?.to_reduced();
        Some((traj.reliability, traj.hazard))
    } else {
        None
    };
    let mut table = Table::new(&["t", "R_analytic", "h_analytic", "R_numeric", "h_numeric"]);
    for (i, &t) in grid.iter().enumerate() {
        let (ra, ha) = if analytic {
            let (r, h) = reliability_and_hazard(&p, t);
            (fmt_num(r), fmt_opt((r > R_CUTOFF).then_some(h)))
        } else {
            (String::new(), String::new())
        };
        let (rn, hn) = match &numeric_rows {
            Some((r, h)) => (fmt_num(r[i]), fmt_opt(h[i])),
            None => (String::new(), String::new()),
        };
        table.row(vec![fmt_num(t), ra, ha, rn, hn]);
    }
    Ok(table)
}

fn phasemap(opts: &Opts) -> Result<Table, CliError> {
    let j = opts
        .j
        .ok_or_else(|| CliError::Usage("missing required flag --j".into()))?;
    let grid = PhaseGrid {
        gmin: positive(opts.gmin.unwrap_or(0.05), "gmin")?,
        gmax: positive(opts.gmax.unwrap_or(3.0), "gmax")?,
        n: opts.n.unwrap_or(100),
    };
    let band = opts.band.unwrap_or(DEFAULT_BAND);
    if !(band.is_finite() && band >= 0.0) {
        return Err(CliError::Usage(format!(
            "--band must be finite and >= 0 (got {band})"
        )));
    }
    // validates J before the sweep
    Params64::new(j, 1.0, 1.0)?;
    let map = spinrel::phase_map(j, &grid, band, &ScanConfig::default())?;
    let mut table = Table::new(&["gamma1", "gamma2", "regime", "extrema_count"]);
    for c in &map.cells {
        table.row(vec![
            fmt_num(c.gamma1),
            fmt_num(c.gamma2),
            c.regime.as_str().to_string(),
            c.class.code().to_string(),
        ]);
    }
    Ok(table)
}

/// Smallest multiple of `dt` with `R < 1e-6`, so censoring is immaterial.
fn default_horizon(p: &Params64, dt: f64) -> f64 {
    let mut k = 1usize;
    while reliability_analytic(p, k as f64 * dt) >= 1e-6 && (k as f64) * dt < 1e4 {
        k += 1;
    }
    k as f64 * dt
}

fn monitoring(
    opts: &Opts,
    p: &Params64,
    multi_shots: bool,
) -> Result<(Monitoring64, Vec<usize>), CliError> {
    let dt = positive(opts.dt.unwrap_or(0.1), "dt")?;
    let t_max = match opts.t_max {
        Some(t) => positive(t, "t-max")?,
        None => default_horizon(p, dt),
    };
    let default_shots: &[usize] = if multi_shots {
        &[1_000, 10_000, 100_000]
    } else {
        &[100_000]
    };
    let shots = opts.shots.clone().unwrap_or_else(|| default_shots.to_vec());
    if !multi_shots && shots.len() != 1 {
        return Err(CliError::Usage("--shots takes a single count here".into()));
    }
    if shots.is_empty() || shots.contains(&0) {
        return Err(CliError::Usage("--shots must be >= 1".into()));
    }
    let cfg = Monitoring64::new(dt, shots[0], opts.seed.unwrap_or(0), t_max)?;
    Ok((cfg, shots))
}

fn fpt_sample(opts: &Opts) -> Result<Table, CliError> {
    let p = opts.params()?;
    let (cfg, _) = monitoring(opts, &p, false)?;
    let sample = sample_first_passage(&p, &cfg);
    let mut table = Table::new(&["shot", "bin", "censored"]);
    for (i, b) in sample.bins.iter().enumerate() {
        table.row(vec![
            i.to_string(),
            b.map(|k| k.to_string()).unwrap_or_default(),
            u8::from(b.is_none()).to_string(),
        ]);
    }
    Ok(table)
}

fn fpt_estimate(opts: &Opts) -> Result<Table, CliError> {
    let p = opts.params()?;
    let (cfg, _) = monitoring(opts, &p, false)?;
    let est = estimate(&sample_first_passage(&p, &cfg))?;
    let mut table = Table::new(&["t_k", "n_risk", "n_k", "R_hat", "h_hat", "var_theory"]);
    for k in 0..est.len() {
        table.row(vec![
            fmt_num(est.t[k]),
            est.n_risk[k].to_string(),
            est.n_k[k].to_string(),
            fmt_num(est.r_hat[k]),
            fmt_opt(est.h_hat[k]),
            fmt_opt(est.var_theory[k]),
        ]);
    }
    Ok(table)
}

fn variance_scan(opts: &Opts) -> Result<Table, CliError> {
    let p = opts.params()?;
    let (cfg, shots) = monitoring(opts, &p, true)?;
    let times = opts.times.clone().unwrap_or_else(|| vec![2.5, 10.0, 17.5]);
    let reps = opts.reps.unwrap_or(50);
    let rows = variance_experiment(&p, &cfg, &shots, &times, reps)?;
    let mut table = Table::new(&["n_shots", "t", "var_emp", "var_theory"]);
    for r in rows {
        table.row(vec![
            r.n_shots.to_string(),
            fmt_num(r.t),
            fmt_opt(r.var_emp),
            fmt_num(r.var_theory),
        ]);
    }
    Ok(table)
}
