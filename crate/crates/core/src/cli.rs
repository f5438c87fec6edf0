//! Command-line front end.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::adapt::{self, AdaptOptions, Status};
use crate::config::{self, Config, ConfigError};
use crate::estimator::{self, ExactSolution};
use crate::spectral;
use crate::{assembly, io, mesh, solver, Error};

/// Slope window and band used by `verify-flat`.
pub const SLOPE_POINTS: usize = 5;
pub const SLOPE_BAND: (f64, f64) = (-0.65, -0.35);

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(
    name = "aepml",
    version,
    about = "Adaptive PML finite elements for acoustic scattering by periodic elastic surfaces"
)]
pub struct RunSpec {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (sections [problem], [pml], [run]); defaults to the flat benchmark.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for VTK and CSV files.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Override a configuration value, e.g. `--set run.tau=0.3` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Assemble and solve once on the initial mesh; writes solution.vtk.
    Solve,
    /// Run the adaptive loop; writes convergence.csv and final.vtk.
    Adapt {
        /// Also write adapt_NNN.vtk every N iterations.
        #[arg(long)]
        vtk_every: Option<usize>,
    },
    /// Adaptive run on a flat interface against the analytic solution, with slope report.
    VerifyFlat {
        #[arg(long)]
        vtk_every: Option<usize>,
    },
    /// Check the closed-form layer operators against their brute-force counterparts.
    SpectralCheck,
    /// Choose PML damping so that both truncation bounds meet a target.
    Params {
        #[arg(long, default_value_t = 1e-8)]
        target: f64,
    },
}

pub fn load_config(spec: &RunSpec) -> Result<Config, Error> {
    let text = match &spec.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?,
        None => Config::flat_example().dump(),
    };
    Ok(Config::parse(&text, &spec.overrides)?)
}

/// Parses `args` (including the program name), runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let spec = match RunSpec::try_parse_from(args) {
        Ok(s) => s,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&spec, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn execute(spec: &RunSpec, out: &mut dyn Write) -> Result<i32, Error> {
    let cfg = load_config(spec)?;
    if spec.dump_config {
        write!(out, "{}", cfg.dump())?;
        return Ok(0);
    }
    let (problem, pml) = (&cfg.problem, &cfg.pml);
    match &spec.command {
        Command::Params { target } => {
            let p = config::select_pml_parameters(problem, *target, pml)?;
            let scale = problem.period.sqrt();
            writeln!(out, "delta = {}", p.delta1)?;
            writeln!(out, "sigma = {} + {}i", p.sigma1.re, p.sigma1.im)?;
            writeln!(out, "t = {}", p.t)?;
            writeln!(
                out,
                "F1*sqrt(period) = {:e}",
                spectral::bound_f1(problem, &p) * scale
            )?;
            writeln!(
                out,
                "F2*sqrt(period) = {:e}",
                spectral::bound_f2(problem, &p) * scale
            )?;
            Ok(0)
        }
        Command::SpectralCheck => {
            config::admissible(problem)?;
            let checks = spectral::check_suite(problem, pml);
            for c in &checks {
                writeln!(
                    out,
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                )?;
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            writeln!(out, "{} checks, {failed} failed", checks.len())?;
            Ok(if failed == 0 { 0 } else { 4 })
        }
        Command::Solve => {
            config::admissible(problem)?;
            let m = mesh::generate_initial_mesh(problem, pml, cfg.run.h0)?;
            let system = assembly::assemble(&m, problem, pml)?;
            let (state, report) = solver::solve(&system)?;
            let ind = estimator::indicators(&m, &state, problem, pml)?;
            io::write_vtk(
                &m,
                Some(&state),
                Some(&ind.eta),
                create(&spec.out, "solution.vtk")?,
            )?;
            writeln!(
                out,
                "dof = {}\neps_f = {:e}\neps_p = {:e}\nbackward_error = {:e}",
                system.dofs.n_free, ind.eps_f, ind.eps_p, report.backward_error
            )?;
            Ok(0)
        }
        Command::Adapt { vtk_every } => {
            config::admissible(problem)?;
            run_adaptive(spec, &cfg, None, *vtk_every, out).map(|s| {
                if s == Status::Converged {
                    0
                } else {
                    5
                }
            })
        }
        Command::VerifyFlat { vtk_every } => {
            config::admissible(problem)?;
            if !problem.is_flat() {
                return Err(ConfigError::Invalid {
                    field: "profile",
                    reason: "verify-flat needs a flat interface".into(),
                }
                .into());
            }
            let exact = spectral::flat_interface_solution(problem)?;
            run_adaptive(spec, &cfg, Some(&exact), *vtk_every, out)?;
            let text = fs::read_to_string(spec.out.join("convergence.csv"))?;
            let rows: Vec<Vec<f64>> = text
                .lines()
                .skip(1)
                .map(|l| {
                    l.split(',')
                        .map(|v| v.parse().unwrap_or(f64::NAN))
                        .collect()
                })
                .collect();
            if rows.len() < SLOPE_POINTS {
                writeln!(
                    out,
                    "FAIL fewer than {SLOPE_POINTS} iterations; raise run.max_iter"
                )?;
                return Ok(1);
            }
            let tail = &rows[rows.len() - SLOPE_POINTS..];
            let dof: Vec<f64> = tail.iter().map(|r| r[1]).collect();
            let col = |k: usize| tail.iter().map(|r| r[k]).collect::<Vec<_>>();
            let s_eh = adapt::loglog_slope(&dof, &col(4));
            let s_ef = adapt::loglog_slope(&dof, &col(2));
            let ok = |s: f64| (SLOPE_BAND.0..=SLOPE_BAND.1).contains(&s);
            writeln!(
                out,
                "slope e_h = {s_eh:.4} {}",
                if ok(s_eh) { "ok" } else { "out of band" }
            )?;
            writeln!(
                out,
                "slope eps_f = {s_ef:.4} {}",
                if ok(s_ef) { "ok" } else { "out of band" }
            )?;
            Ok(if ok(s_eh) && ok(s_ef) { 0 } else { 1 })
        }
    }
}

fn run_adaptive(
    spec: &RunSpec,
    cfg: &Config,
    exact: Option<&dyn ExactSolution>,
    vtk_every: Option<usize>,
    out: &mut dyn Write,
) -> Result<Status, Error> {
    let opts = AdaptOptions::from(&cfg.run);
    let mut io_err = None;
    let outcome = adapt::run(&cfg.problem, &cfg.pml, &opts, exact, |step| {
        if let Some(n) = vtk_every.filter(|&n| n > 0) {
            if step.iteration % n == 0 && io_err.is_none() {
                let r =
                    create(&spec.out, &format!("adapt_{:03}.vtk", step.iteration)).and_then(|w| {
                        Ok(io::write_vtk(
                            step.mesh,
                            Some(step.state),
                            Some(&step.indicators.eta),
                            w,
                        )?)
                    });
                io_err = r.err();
            }
        }
    })?;
    if let Some(e) = io_err {
        return Err(e);
    }
    io::write_csv(&outcome.records, create(&spec.out, "convergence.csv")?)?;
    io::write_vtk(
        &outcome.mesh,
        Some(&outcome.state),
        Some(&outcome.indicators.eta),
        create(&spec.out, "final.vtk")?,
    )?;
    for r in &outcome.records {
        let eh = r.e_h.map(|v| format!(" e_h = {v:.4e}")).unwrap_or_default();
        writeln!(
            out,
            "iter {:>3}  dof {:>8}  eps_f = {:.4e}  eps_p = {:.3e}{eh}",
            r.iter, r.dof, r.eps_f, r.eps_p
        )?;
    }
    let status = match outcome.status {
        Status::Converged => "converged",
        Status::BudgetExhausted => "iteration budget exhausted",
        Status::DofCap => "dof cap reached",
    };
    writeln!(out, "status: {status}")?;
    Ok(outcome.status)
}
