//! Experiment drivers behind the `solve`, `analyze` and `ramp` commands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use helmdd_core::analysis::{contraction_report, EstimateReport, MAX_ANALYSIS_DOFS};
use helmdd_core::linalg::{random_vec, spmv};
use helmdd_core::mesh::build_grid;
use helmdd_core::solver::{direct_solve, gmres, stationary, ErrorOracle, GmresConfig, Level};
use helmdd_core::{Setup, SetupTimings, SolverState, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentConfig, InitialGuess, Mode};

/// Exit status for a finished run.
pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MAXIT: i32 = 2;

/// Wall-clock split of one run. Setup covers mesh, medium, assembly,
/// factorizations, eigenproblems and coarse assembly; the reference direct
/// solve and the analysis have buckets of their own.
#[derive(Debug, Clone, Copy, Default)]
pub struct Timing {
    pub phases: SetupTimings,
    pub t_setup: f64,
    pub t_solve: f64,
    pub t_oracle: f64,
    pub t_analysis: f64,
    pub wall: f64,
}

impl Timing {
    pub fn to_text(&self) -> String {
        format!(
            "setup_assembly = {:.6}\nsetup_factorization = {:.6}\nsetup_eigen = {:.6}\nsetup_coarse = {:.6}\n\
             t_setup = {:.6}\nt_solve = {:.6}\nt_oracle = {:.6}\nt_analysis = {:.6}\nwall = {:.6}\n",
            self.phases.assembly,
            self.phases.factorization,
            self.phases.eigen,
            self.phases.coarse,
            self.t_setup,
            self.t_solve,
            self.t_oracle,
            self.t_analysis,
            self.wall
        )
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub n: usize,
    pub subdomains: usize,
    pub coarse_dim: usize,
    /// Coarse vectors kept per subdomain.
    pub coarse_per_subdomain: Vec<usize>,
    pub state: SolverState,
    pub report: Option<EstimateReport>,
    pub timing: Timing,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.state.converged {
            EXIT_CONVERGED
        } else {
            EXIT_MAXIT
        }
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "subdomains = {}", self.subdomains);
        let _ = writeln!(s, "coarse_dim = {}", self.coarse_dim);
        let per: Vec<String> = self.coarse_per_subdomain.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(s, "coarse_per_subdomain = {}", per.join(","));
        let _ = writeln!(s, "iterations = {}", self.state.iterations);
        let _ = writeln!(s, "converged = {}", self.state.converged);
        let _ = writeln!(s, "final_residual = {:.6e}", self.state.residuals.last().copied().unwrap_or(0.0));
        if let Some(Some(e)) = self.state.energy_errors.last() {
            let _ = writeln!(s, "final_energy_error = {e:.6e}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {w}");
        }
        s
    }
}

/// Runs one configuration in memory. With `analyze`, the contraction report
/// is required and problems above the analysis size limit are refused.
pub fn run_experiment(cfg: &ExperimentConfig, analyze: bool) -> Result<RunOutcome> {
    let wall = Instant::now();
    let mut timing = Timing::default();
    let omega = cfg.omega()?;
    let mut warnings = Vec::new();

    let t = Instant::now();
    let mesh = build_grid(cfg.problem.nx, cfg.problem.ny, cfg.bounds())?;
    let n = mesh.num_nodes();
    let want_analysis = analyze || cfg.analysis.enabled;
    if want_analysis && n > MAX_ANALYSIS_DOFS {
        if analyze {
            bail!("analysis is limited to {MAX_ANALYSIS_DOFS} unknowns, problem has {n}");
        }
        warnings.push(format!("analysis skipped: {n} unknowns exceed the limit of {MAX_ANALYSIS_DOFS}"));
    }
    let run_analysis = want_analysis && n <= MAX_ANALYSIS_DOFS;
    let medium = cfg.medium(&mesh)?;
    let setup = Setup::build(&mesh, &medium, omega, &cfg.setup_config()?)?;
    timing.t_setup = t.elapsed().as_secs_f64();
    timing.phases = setup.timings;
    warnings.extend(setup.warnings.iter().cloned());

    let t = Instant::now();
    let u_star = if cfg.solver.oracle || run_analysis {
        Some(direct_solve(&setup.system.a, &setup.system.b)?)
    } else {
        None
    };
    timing.t_oracle = t.elapsed().as_secs_f64();
    let oracle = u_star.as_deref().map(|u| ErrorOracle::new(u, &setup.energy_global.mat));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed);
    let u0 = match cfg.solver.initial {
        InitialGuess::Zero => vec![C64::new(0.0, 0.0); setup.n()],
        InitialGuess::Random => random_vec(&mut rng, setup.n()),
    };

    let t = Instant::now();
    let s = &cfg.solver;
    let level = if setup.coarse_dim() > 0 { Level::Two } else { Level::One };
    let mut state = match s.mode {
        Mode::Stationary => stationary(&setup.system, &setup.schwarz, level, u0, s.tol, s.maxit, oracle.as_ref()),
        Mode::Gmres => {
            let a = &setup.system.a;
            let gc = GmresConfig { tol: s.tol, maxit: s.maxit, restart: s.restart };
            gmres(|x| spmv(a, x), &setup.system.b, |r| setup.schwarz.apply(a, r), Some(u0), gc, oracle.as_ref())?
        }
    };
    timing.t_solve = t.elapsed().as_secs_f64();
    state.setup_time = timing.t_setup;
    state.solve_time = timing.t_solve;

    let mut report = None;
    if run_analysis {
        let t = Instant::now();
        let u_star = u_star.as_ref().expect("oracle solution computed for analysis");
        let mut arng = ChaCha8Rng::seed_from_u64(cfg.solver.seed.wrapping_add(1));
        let start = random_vec(&mut arng, setup.n());
        report = Some(contraction_report(
            &setup,
            u_star,
            &start,
            cfg.analysis.iterations,
            cfg.analysis.tail_samples,
            &mut arng,
        )?);
        timing.t_analysis = t.elapsed().as_secs_f64();
    }
    timing.wall = wall.elapsed().as_secs_f64();

    Ok(RunOutcome {
        n: setup.n(),
        subdomains: setup.partition.len(),
        coarse_dim: setup.coarse_dim(),
        coarse_per_subdomain: coarse_counts(&setup),
        state,
        report,
        timing,
        warnings,
    })
}

fn coarse_counts(setup: &Setup) -> Vec<usize> {
    let cs = &setup.schwarz.coarse;
    let mut counts = vec![0; setup.partition.len()];
    for (b, r) in cs.blocks.iter().zip(&cs.ranges) {
        counts[b.id] = r.len();
    }
    counts
}

/// Writes `convergence.csv`, `timing.txt`, `summary.txt` and, when present,
/// `report.txt` and `contraction.csv`.
pub fn write_artifacts(cfg: &ExperimentConfig, out: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    };
    write("convergence.csv", &out.state.to_csv(cfg.solver.record_time))?;
    write("timing.txt", &out.timing.to_text())?;
    write("summary.txt", &out.summary())?;
    if let Some(r) = &out.report {
        write("report.txt", &r.to_text())?;
        write("contraction.csv", &r.ratios_csv())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RampRow {
    pub omega: f64,
    pub subdomains: usize,
    pub n: usize,
    /// `ORAS` or `two-level`.
    pub variant: String,
    /// Coarse size in percent, `None` for the one-level method.
    pub coarse_percent: Option<f64>,
    pub coarse_dim: usize,
    pub iterations: usize,
    pub converged: bool,
    pub t_setup: f64,
    pub t_solve: f64,
}

pub fn ramp_csv(rows: &[RampRow]) -> String {
    let mut s = String::from("omega,J,N,variant,CS,iters,t_setup,t_solve\n");
    for r in rows {
        let cs = r.coarse_percent.map(|p| format!("{p}%")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:.6},{},{},{},{},{},{:.6},{:.6}",
            r.omega, r.subdomains, r.n, r.variant, cs, r.iterations, r.t_setup, r.t_solve
        );
    }
    s
}

/// Runs every ramp point with the one-level method and each coarse size.
/// Non-converged runs are kept in the table and noted in `ramp_notes.txt`.
pub fn run_ramp(cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<Vec<RampRow>> {
    let Some(ramp) = &cfg.ramp else {
        bail!("configuration has no [ramp] section");
    };
    let mut rows = Vec::new();
    let mut notes = String::new();
    for (k, pt) in ramp.points.iter().enumerate() {
        let variants = std::iter::once(None).chain(ramp.coarse_percents.iter().map(|&p| Some(p)));
        for percent in variants {
            let mut c = cfg.at_ramp_point(pt, percent)?;
            c.analysis.enabled = false;
            let out = run_experiment(&c, false)?;
            let variant = if percent.is_some() { "two-level" } else { "ORAS" };
            if !out.state.converged {
                let _ = writeln!(notes, "point {k} {variant} {percent:?}: no convergence in {} iterations", c.solver.maxit);
            }
            if let Some(d) = dir {
                let tag = percent.map(|p| format!("{p}")).unwrap_or_else(|| "oras".into());
                fs::create_dir_all(d)?;
                fs::write(d.join(format!("ramp_p{k}_{tag}.csv")), out.state.to_csv(c.solver.record_time))?;
            }
            rows.push(RampRow {
                omega: c.omega()?,
                subdomains: out.subdomains,
                n: out.n,
                variant: variant.into(),
                coarse_percent: percent,
                coarse_dim: out.coarse_dim,
                iterations: out.state.iterations,
                converged: out.state.converged,
                t_setup: out.timing.t_setup,
                t_solve: out.timing.t_solve,
            });
        }
    }
    if let Some(d) = dir {
        fs::write(d.join("ramp_summary.csv"), ramp_csv(&rows))?;
        fs::write(d.join("ramp_notes.txt"), notes)?;
    }
    Ok(rows)
}
