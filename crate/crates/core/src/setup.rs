//! End-to-end construction of the one- and two-level preconditioners.

use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::{assemble_energy, assemble_global, EnergyMatrix, GlobalSystem};
use crate::coarse::build_coarse_basis;
use crate::decomposition::{partition, Partition};
use crate::error::Result;
use crate::gevp::{solve_gevp, EigenBundle, FilterStrategy};
use crate::local_ops::LocalSolver;
use crate::medium::MediumField;
use crate::mesh::Mesh;
use crate::solver::Schwarz;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetupConfig {
    pub jx: usize,
    pub jy: usize,
    pub overlap: usize,
    pub oversample: usize,
    /// `None` builds the one-level method only.
    pub strategy: Option<FilterStrategy>,
    pub parallel: bool,
}

impl Default for SetupConfig {
    fn default() -> Self {
        SetupConfig { jx: 1, jy: 1, overlap: 1, oversample: 1, strategy: None, parallel: true }
    }
}

/// Wall-clock seconds per setup phase.
#[derive(Debug, Clone, Copy, Default)]
pub struct SetupTimings {
    pub assembly: f64,
    pub factorization: f64,
    pub eigen: f64,
    pub coarse: f64,
}

impl SetupTimings {
    pub fn total(&self) -> f64 {
        self.assembly + self.factorization + self.eigen + self.coarse
    }
}

pub struct Setup {
    pub omega: f64,
    pub system: GlobalSystem,
    pub partition: Partition,
    pub schwarz: Schwarz,
    /// Filtered eigenpairs per subdomain; empty for the one-level method.
    pub bundles: Vec<EigenBundle>,
    pub energy_global: EnergyMatrix,
    pub energy_local: Vec<EnergyMatrix>,
    pub energy_ext: Vec<EnergyMatrix>,
    pub timings: SetupTimings,
    pub warnings: Vec<String>,
}

impl Setup {
    pub fn build(mesh: &Mesh, medium: &MediumField, omega: f64, cfg: &SetupConfig) -> Result<Setup> {
        if let Some(s) = cfg.strategy {
            s.validate()?;
        }
        let mut timings = SetupTimings::default();
        let t = Instant::now();
        let system = assemble_global(mesh, medium, omega)?;
        let part = partition(mesh, cfg.jx, cfg.jy, cfg.overlap, cfg.oversample)?;
        let all: Vec<usize> = (0..mesh.num_elements()).collect();
        let energy_global = assemble_energy(mesh, medium, omega, &all)?;
        let energy_local = part
            .subdomains
            .iter()
            .map(|s| assemble_energy(mesh, medium, omega, &s.elems))
            .collect::<Result<Vec<_>>>()?;
        let energy_ext = part
            .subdomains
            .iter()
            .map(|s| assemble_energy(mesh, medium, omega, &s.elems_ext))
            .collect::<Result<Vec<_>>>()?;
        timings.assembly = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let solvers: Vec<LocalSolver> = if cfg.parallel {
            part.subdomains.par_iter().map(|s| LocalSolver::new(mesh, medium, omega, s)).collect::<Result<_>>()?
        } else {
            part.subdomains.iter().map(|s| LocalSolver::new(mesh, medium, omega, s)).collect::<Result<_>>()?
        };
        timings.factorization = t.elapsed().as_secs_f64();

        let mut warnings = part.warnings.clone();
        let mut bundles = Vec::new();
        let coarse = match cfg.strategy {
            None => crate::coarse::CoarseSpace::empty(system.n()),
            Some(strategy) => {
                let t = Instant::now();
                let solve = |j: usize| solve_gevp(&solvers[j], &energy_local[j], &energy_ext[j]);
                bundles = if cfg.parallel {
                    (0..solvers.len()).into_par_iter().map(solve).collect::<Result<Vec<_>>>()?
                } else {
                    (0..solvers.len()).map(solve).collect::<Result<Vec<_>>>()?
                };
                for eb in &mut bundles {
                    warnings.extend(eb.filter(strategy)?);
                }
                timings.eigen = t.elapsed().as_secs_f64();

                let t = Instant::now();
                let mut cs = build_coarse_basis(&bundles, &solvers);
                cs.assemble(&system.a)?;
                warnings.extend(cs.warnings.iter().cloned());
                timings.coarse = t.elapsed().as_secs_f64();
                cs
            }
        };

        let schwarz = Schwarz::new(solvers, coarse).with_parallel(cfg.parallel);
        Ok(Setup {
            omega,
            system,
            partition: part,
            schwarz,
            bundles,
            energy_global,
            energy_local,
            energy_ext,
            timings,
            warnings,
        })
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn coarse_dim(&self) -> usize {
        self.schwarz.coarse.dim()
    }

    /// Largest excluded eigenvalue over all subdomains.
    pub fn tau_eff(&self) -> f64 {
        self.bundles.iter().map(|b| b.tau_eff).fold(0.0, f64::max)
    }
}
