//! Command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io::config::load_config_with;
use crate::io::{write_sweep, Config};
use crate::oracle::{
    compare_to_oracle, radial_reference, read_profile, write_profile, MmsPlan, RadialConfig, DEFAULT_TOL,
};
use crate::sim::{self, DiagnosticsRecord, RunOutput, SweepKnob, EXIT_INVARIANT, EXIT_OK, EXIT_SOLVER};

pub const EXIT_USAGE: i32 = 64;

pub const DEFAULT_EPS_VALUES: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
pub const DEFAULT_OMEGA_VALUES: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Parser)]
#[command(name = "tumorsim", version, about = "Penalized tumor growth simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `run.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace one config entry, `key=value`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a scenario and write diagnostics and snapshots.
    Run(Common),
    /// Final-time monitors over penalty parameters.
    SweepEps {
        #[command(flatten)]
        common: Common,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Final-time monitors over healthy-tissue viscosities.
    SweepOmega {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Manufactured-solution convergence orders.
    Mms {
        /// Study plan (`mms.*` keys); defaults to every component.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare a run with the radial reference solution at `run.T`.
    OracleCompare {
        #[command(flatten)]
        common: Common,
        /// Stored reference profile; computed afresh when absent.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Compute the radial reference profile at `run.T` and store it.
    OracleBaseline(Common),
}

/// Parse `args` (program name first), dispatch, and return the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}

/// Exit code for an error that ends a command.
pub fn error_code(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_)
        | Error::Params(_)
        | Error::Shape(_)
        | Error::ScenarioMismatch(_)
        | Error::Io { .. }
        | Error::Parse { .. } => EXIT_USAGE,
        Error::MaxPrinciple { .. }
        | Error::NonFinite { .. }
        | Error::EmptyZeroSet
        | Error::BandEscaped { .. }
        | Error::OracleInvariant(_) => EXIT_INVARIANT,
        Error::BudgetExceeded { .. } => sim::EXIT_BUDGET,
        _ => EXIT_SOLVER,
    }
}

fn load(common: &Common) -> Result<Config> {
    let mut cfg = load_config_with(&common.config, &common.overrides)?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(out) = &common.out {
        cfg.run.out_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run(common) => run_cmd(&common),
        Command::SweepEps { common, values } => sweep_cmd(&common, SweepKnob::Eps, values),
        Command::SweepOmega { common, values } => sweep_cmd(&common, SweepKnob::Omega, values),
        Command::Mms { config } => mms_cmd(config.as_deref()),
        Command::OracleCompare { common, baseline, tol } => compare_cmd(&common, baseline.as_deref(), tol),
        Command::OracleBaseline(common) => baseline_cmd(&common),
    }
}

fn run_cmd(common: &Common) -> Result<i32> {
    let cfg = load(common)?;
    if let Some(dir) = &cfg.run.out_dir {
        crate::io::write_atomic(&dir.join("config.cfg"), cfg.dump().as_bytes())?;
    }
    let out = sim::run(&cfg.scenario, &cfg.run)?;
    for line in summary_lines(&out, &cfg) {
        println!("{line}");
    }
    if let Some(e) = &out.failure {
        eprintln!("error: {e}");
    }
    Ok(out.exit_code())
}

/// One line per invariant family.
pub fn summary_lines(out: &RunOutput, cfg: &Config) -> Vec<String> {
    let d = &out.diagnostics;
    let fold =
        |f: fn(&DiagnosticsRecord) -> f64, init: f64, pick: fn(f64, f64) -> f64| d.iter().map(f).fold(init, pick);
    let status = |fields: &[&str]| {
        let n = out.violations.iter().filter(|(_, v)| fields.contains(&v.field)).count();
        if n == 0 {
            "ok".to_string()
        } else {
            format!("FAIL ({n} violations)")
        }
    };
    let rho_f = cfg.scenario.params.rho_f;
    let cell_min = fold(|r| r.min_P.min(r.min_Q).min(r.min_D), f64::INFINITY, f64::min);
    let cell_max = fold(|r| r.max_P.max(r.max_Q).max(r.max_D), f64::NEG_INFINITY, f64::max);
    let energy = fold(
        |r| {
            let c = r.energy_rate_C / r.energy_scale_C.max(f64::MIN_POSITIVE);
            let w = r.energy_rate_W / r.energy_scale_W.max(f64::MIN_POSITIVE);
            c.max(w)
        },
        f64::NEG_INFINITY,
        f64::max,
    );
    let last = d.last();
    vec![
        format!("steps: {} to t = {}", d.len(), out.state.t),
        format!("cell bounds [0, {rho_f}]: {} (min {cell_min:.3e}, max {cell_max:.6})", status(&["P", "Q", "D"])),
        format!(
            "nutrient bounds [0, {}]: {} (min {:.3e}, max {:.6})",
            cfg.scenario.params.c_bar,
            status(&["C"]),
            fold(|r| r.min_C, f64::INFINITY, f64::min),
            fold(|r| r.max_C, f64::NEG_INFINITY, f64::max)
        ),
        format!(
            "drug bounds [0, {}]: {} (min {:.3e}, max {:.6})",
            cfg.scenario.drug_ceiling(),
            status(&["W"]),
            fold(|r| r.min_W, f64::INFINITY, f64::min),
            fold(|r| r.max_W, f64::NEG_INFINITY, f64::max)
        ),
        format!("energy inequality: {} (worst scaled rate {energy:.3e})", status(&["energy_C", "energy_W"])),
        format!("mixture drift: max |P+Q+D-rho_f| = {:.3e}", fold(|r| r.sum_drift, 0.0, f64::max)),
        format!(
            "penalty: flux {:.3e}, leakage cells {:.3e}, chem {:.3e}",
            last.map_or(0.0, |r| r.penalty_flux),
            last.map_or(0.0, |r| r.leakage_cells),
            last.map_or(0.0, |r| r.leakage_chem)
        ),
    ]
}

fn sweep_cmd(common: &Common, knob: SweepKnob, values: Vec<f64>) -> Result<i32> {
    let cfg = load(common)?;
    let (name, values) = match knob {
        SweepKnob::Eps => ("eps", if values.is_empty() { DEFAULT_EPS_VALUES.to_vec() } else { values }),
        SweepKnob::Omega => ("omega", if values.is_empty() { DEFAULT_OMEGA_VALUES.to_vec() } else { values }),
    };
    let rows = sim::sweep(&cfg.scenario, &cfg.run, knob, &values)?;
    println!("{:>10} {:>14} {:>14} {:>14} {:>14}", name, "penalty_flux", "leak_cells", "leak_chem", "sum_drift");
    for r in &rows {
        println!(
            "{:>10.3e} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}",
            r.value, r.penalty_flux, r.leakage_cells, r.leakage_chem, r.sum_drift
        );
    }
    if let Some(dir) = &cfg.run.out_dir {
        write_sweep(&rows, &dir.join(format!("sweep_{name}.csv")))?;
    }
    Ok(EXIT_OK)
}

fn mms_cmd(config: Option<&Path>) -> Result<i32> {
    let plan = match config {
        Some(p) => MmsPlan::parse(&fs::read_to_string(p).map_err(|e| Error::Io { path: p.to_path_buf(), source: e })?)?,
        None => MmsPlan::default(),
    };
    let mut ok = true;
    for r in plan.run()? {
        println!("{r}");
        ok &= r.pass;
    }
    Ok(if ok { EXIT_OK } else { EXIT_INVARIANT })
}

fn compare_cmd(common: &Common, baseline: Option<&Path>, tol: f64) -> Result<i32> {
    let cfg = load(common)?;
    let t = cfg.run.t_end;
    let profile = match baseline {
        Some(p) => read_profile(p, t)?,
        None => radial_reference(&RadialConfig::from_scenario(&cfg.scenario)?, &[t])?.remove(0),
    };
    let out = sim::run(&cfg.scenario, &cfg.run)?;
    if let Some(e) = out.failure {
        return Err(e);
    }
    let report = compare_to_oracle(&out.state, &profile, tol)?;
    println!("{report}");
    Ok(if report.pass { EXIT_OK } else { EXIT_INVARIANT })
}

fn baseline_cmd(common: &Common) -> Result<i32> {
    let cfg = load(common)?;
    let path = common.out.clone().ok_or_else(|| Error::Config("oracle-baseline needs --out FILE".into()))?;
    let rc = RadialConfig::from_scenario(&cfg.scenario)?;
    let profile = radial_reference(&rc, &[cfg.run.t_end])?.remove(0);
    write_profile(&profile, &path)?;
    println!("wrote {} radii at t = {} to {}", profile.r.len(), profile.t, path.display());
    Ok(EXIT_OK)
}
