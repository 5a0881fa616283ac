//! Command-line driver: configuration, subcommands and output artifacts.

mod config;
mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

pub use config::{
    reference_config, BasisSection, ConstantsSection, Dynamics, PotentialSection, RunConfig,
    SeedChoice, SolverSection, FORMAT_VERSION,
};
pub use output::{elements_csv, fmt_f64, scan_csv, states_json, wavefunction_csv, ScanRow, SolvedSet};

use crate::cs_basis::CsOperator;
use crate::error::{Error, Result};
use crate::spectrum_solver::{find_roots, wavefunction_on_grid};

#[derive(Debug, Parser)]
#[command(
    name = "fv0",
    version,
    about = "Bound and resonant states of the spin-0 Feshbach-Villars equation in a Coulomb-Sturmian basis",
    long_about = "Bound and resonant states of the spin-0 Feshbach-Villars equation in a Coulomb-Sturmian basis.\n\n\
The configuration is TOML with [constants], [basis], [potential] and [solver] sections; every key is optional. \
Defaults: m = hbar = e2 = 1, c = 137.036; l = 0, b = 1, n_short = 32, n_big = 4 n_short, \
n_cf_start = 5000 (2000 with confinement); z = alpha1 = alpha2 = 0; mode = bound, dynamics = fv0, \
window re in [-10, 10], im in [-1, 0], 200 grid points. `fv0 reference` prints the full default file."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find states and write states.json.
    Solve(CommonArgs),
    /// Tabulate the determinant indicator over the real window and write scan.csv.
    Scan(ScanArgs),
    /// Dump CS matrices (and short-range potential matrices) to elements.csv.
    Elements(ElementsArgs),
    /// Solve, then evaluate the states on a radial grid and write wavefunction.csv.
    Wavefunction(WavefunctionArgs),
    /// Print the reference configuration with all defaults.
    Reference,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// `key=value` override of a configuration entry, e.g. `basis.b=6`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of rows in the imaginary direction, from im_max down to im_min.
    #[arg(long, default_value_t = 1)]
    pub im_points: usize,
}

#[derive(Debug, Args)]
pub struct ElementsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Matrix size; defaults to basis.n_short.
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct WavefunctionArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 10.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

/// Exit status of a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Artifacts were written but some state did not pass the depth check.
    Unconverged,
}

impl CommonArgs {
    pub fn load(&self) -> Result<RunConfig> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
            None => String::new(),
        };
        RunConfig::parse_with_overrides(&text, &self.overrides)
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Runs every requested dynamics and collects the states.
pub fn solve(cfg: &RunConfig) -> Result<Vec<SolvedSet>> {
    let window = cfg.window();
    let opts = cfg.solve_options();
    cfg.solver
        .dynamics
        .flags()
        .into_iter()
        .map(|rel| {
            let problem = cfg.problem(rel)?;
            let states = find_roots(&problem, &window, cfg.solver.mode, &opts)?;
            Ok(SolvedSet {
                relativistic: rel,
                states,
            })
        })
        .collect()
}

fn outcome(sets: &[SolvedSet]) -> Outcome {
    if sets.iter().all(|s| s.states.iter().all(|st| st.converged)) {
        Outcome::Success
    } else {
        Outcome::Unconverged
    }
}

/// Indicator rows over the window; the determinant is normalized by its value
/// at the first grid point of each dynamics.
pub fn scan(cfg: &RunConfig, im_points: usize) -> Result<Vec<ScanRow>> {
    use rayon::prelude::*;
    let s = &cfg.solver;
    let n_re = s.grid_points;
    let n_im = im_points.max(1);
    let mut rows = Vec::new();
    for rel in s.dynamics.flags() {
        let problem = cfg.problem(rel)?;
        let energies: Vec<Complex64> = (0..n_im)
            .flat_map(|j| {
                let im = if n_im == 1 {
                    s.im_max
                } else {
                    s.im_max + (s.im_min - s.im_max) * j as f64 / (n_im - 1) as f64
                };
                (0..n_re).map(move |i| {
                    Complex64::new(s.re_min + (s.re_max - s.re_min) * i as f64 / (n_re - 1) as f64, im)
                })
            })
            .collect();
        let values: Vec<Option<(f64, Complex64)>> = energies
            .par_iter()
            .map(|&e| {
                problem
                    .bracket_retry(e)
                    .ok()
                    .and_then(|(_, b)| crate::linalg::log_det(&b.matrix))
            })
            .collect();
        let reference = values.iter().flatten().map(|v| v.0).next().unwrap_or(0.0);
        for (e, v) in energies.iter().zip(values) {
            rows.push(ScanRow {
                relativistic: rel,
                e_bind: *e,
                log_abs_det: v.map(|v| v.0),
                indicator: v.map(|(la, ph)| ph * (la - reference).exp()),
            });
        }
    }
    Ok(rows)
}

/// Entry point shared by the binary and the tests.
pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.load()?;
            let sets = solve(&cfg)?;
            write(&args.out, "states.json", &states_json(&cfg, &sets))?;
            Ok(outcome(&sets))
        }
        Command::Scan(args) => {
            let cfg = args.common.load()?;
            let rows = scan(&cfg, args.im_points)?;
            write(&args.common.out, "scan.csv", &scan_csv(&rows))?;
            Ok(Outcome::Success)
        }
        Command::Elements(args) => {
            let cfg = args.common.load()?;
            let size = args.size.unwrap_or(cfg.basis.n_short);
            if size == 0 {
                return Err(Error::Config("--size must be positive".into()));
            }
            let spec = cfg.spec()?;
            let mut mats = Vec::new();
            for op in CsOperator::ALL {
                mats.push((op.name().to_string(), op.matrix(&spec, size).to_dense()));
            }
            let model = cfg.model();
            let k = cfg.constants();
            for (name, ch) in [
                ("v4_short", crate::potentials::Channel::Vector),
                ("v0_short", crate::potentials::Channel::Scalar),
            ] {
                if model.has_short(ch) {
                    mats.push((
                        name.to_string(),
                        crate::potentials::short_range_matrix_raw(&model, &k, &spec, size, ch)?,
                    ));
                }
            }
            write(&args.common.out, "elements.csv", &elements_csv(&mats))?;
            Ok(Outcome::Success)
        }
        Command::Wavefunction(args) => {
            let cfg = args.common.load()?;
            if !(args.r_max > 0.0) || args.points == 0 {
                return Err(Error::Config("--r-max and --points must be positive".into()));
            }
            let sets = solve(&cfg)?;
            let spec = cfg.spec()?;
            let grid: Vec<f64> = (1..=args.points)
                .map(|i| args.r_max * i as f64 / args.points as f64)
                .collect();
            let mut curves = Vec::new();
            for set in &sets {
                for (idx, st) in set.states.iter().enumerate() {
                    let (phi, chi) = wavefunction_on_grid(st, &spec, &grid)?;
                    curves.push((set.relativistic, idx, phi, chi));
                }
            }
            write(&args.common.out, "wavefunction.csv", &wavefunction_csv(&grid, &curves))?;
            write(&args.common.out, "states.json", &states_json(&cfg, &sets))?;
            Ok(outcome(&sets))
        }
        Command::Reference => {
            print!("{}", reference_config());
            Ok(Outcome::Success)
        }
    }
}
