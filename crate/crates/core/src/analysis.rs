//! Numerical evaluation of the convergence constants and of the one- and
//! two-level error estimates.
//!
//! Every constant is the largest eigenvalue of a dense Hermitian-definite
//! pencil, so this module refuses problems above [`MAX_ANALYSIS_DOFS`].

use std::fmt::Write as _;

use faer::prelude::*;
use faer::Mat;
use rand::Rng;

use crate::assembly::{EnergyMatrix, GlobalSystem};
use crate::coarse::CoarseSpace;
use crate::decomposition::Partition;
use crate::error::{Error, Result};
use crate::gevp::EigenBundle;
use crate::linalg::{energy_sq, norm2, pencil_max_eigenvalue, random_vec, sub, to_dense, SpMat, C64, ZERO};
use crate::local_ops::LocalSolver;
use crate::setup::Setup;
use crate::solver::{oras_iterate, two_level_iterate, SolverState};

pub const MAX_ANALYSIS_DOFS: usize = 5000;
/// Slack on every measured-versus-bound comparison.
pub const BOUND_SLACK: f64 = 1e-6;

pub fn guard(n: usize) -> Result<()> {
    if n > MAX_ANALYSIS_DOFS {
        Err(Error::TooLarge(format!("analysis is limited to {MAX_ANALYSIS_DOFS} unknowns, problem has {n}")))
    } else {
        Ok(())
    }
}

/// Stable recombination constant: largest eigenvalue of
/// `(G^H C G, blockdiag C_j^0)` where `G` stacks the zero extensions of the
/// `Omega_j` nodes off the interface and `C_j^0` is `C_j` on those nodes.
pub fn estimate_k0(partition: &Partition, c_global: &EnergyMatrix, c_local: &[EnergyMatrix]) -> Result<f64> {
    guard(c_global.dofs.len())?;
    let mut globals = Vec::new();
    let mut blocks = Vec::new();
    for (s, cl) in partition.subdomains.iter().zip(c_local) {
        let free: Vec<usize> = (0..s.n_local()).filter(|&l| !s.is_interface(s.dofs.dofs[l])).collect();
        blocks.push((globals.len(), free.clone(), to_dense(&cl.mat)));
        globals.extend(free.iter().map(|&l| s.dofs.dofs[l]));
    }
    let total = globals.len();
    guard(total)?;
    let c = to_dense(&c_global.mat);
    let left = Mat::from_fn(total, total, |a, b| c[(globals[a], globals[b])]);
    let mut right = Mat::<C64>::zeros(total, total);
    for (offset, free, cl) in &blocks {
        for (a, &la) in free.iter().enumerate() {
            for (b, &lb) in free.iter().enumerate() {
                right[(offset + a, offset + b)] = cl[(la, lb)];
            }
        }
    }
    pencil_max_eigenvalue(&left, &right)
}

/// Restriction multiplicity constant: largest eigenvalue of
/// `(sum_j I_j^T C~_j I_j, C)`.
pub fn estimate_k1(partition: &Partition, c_global: &EnergyMatrix, c_ext: &[EnergyMatrix]) -> Result<f64> {
    let n = c_global.dofs.len();
    guard(n)?;
    let mut left = Mat::<C64>::zeros(n, n);
    for (s, ce) in partition.subdomains.iter().zip(c_ext) {
        let d = to_dense(&ce.mat);
        let g = &s.dofs_ext.dofs;
        for a in 0..g.len() {
            for b in 0..g.len() {
                left[(g[a], g[b])] += d[(a, b)];
            }
        }
    }
    pencil_max_eigenvalue(&left, &to_dense(&c_global.mat))
}

/// Energy-norm operator norm of `I - P0`.
pub fn estimate_sigma(coarse: &CoarseSpace, a: &SpMat, c_global: &EnergyMatrix) -> Result<f64> {
    let n = c_global.dofs.len();
    guard(n)?;
    if coarse.dim() == 0 {
        return Ok(1.0);
    }
    let a0 = coarse.a0.as_ref().ok_or_else(|| Error::Numerical("coarse matrix not assembled".into()))?;
    let z = coarse.z_dense();
    let zha = z.adjoint() * to_dense(a);
    let p0 = &z * a0.partial_piv_lu().solve(&zha);
    let x = Mat::<C64>::identity(n, n) - p0;
    let c = to_dense(&c_global.mat);
    let left = x.adjoint() * &c * &x;
    let top = pencil_max_eigenvalue(&left, &c)?;
    Ok(top.max(0.0).sqrt())
}

/// Outcome of the excluded-eigenvalue bound over random samples.
#[derive(Debug, Clone, Copy)]
pub struct TailCheck {
    pub tau_eff: f64,
    /// Largest `||K_j (I - Pi_j) v||^2_C / ||v||^2_C~` seen.
    pub max_ratio: f64,
    pub passed: bool,
}

/// Checks `||K_j (I - Pi_j) v||^2_{C_j} <= tau_eff ||v||^2_{C~_j} (1 + 1e-8)`
/// on random vectors. An absolute floor of `1e-14 ||v||^2` absorbs roundoff
/// when every eigenpair is retained.
pub fn spectral_tail_check<R: Rng>(
    ls: &LocalSolver,
    eb: &EigenBundle,
    c_loc: &EnergyMatrix,
    c_ext: &EnergyMatrix,
    samples: usize,
    rng: &mut R,
) -> TailCheck {
    let mut max_ratio = 0.0_f64;
    let mut passed = true;
    for _ in 0..samples {
        let v = random_vec(rng, ls.sub.n_ext());
        let q = sub(&v, &eb.project(c_ext, &v));
        let lhs = energy_sq(&c_loc.mat, &ls.apply_kj(&q));
        let rhs = energy_sq(&c_ext.mat, &v);
        max_ratio = max_ratio.max(lhs / rhs);
        if lhs > eb.tau_eff * rhs * (1.0 + 1e-8) + 1e-14 * rhs {
            passed = false;
        }
    }
    TailCheck { tau_eff: eb.tau_eff, max_ratio, passed }
}

/// `||(I - P0) x|| / ||x||` for `x = sum_j E_j (chi_j . R_j Pi_j v|Omega~_j)`;
/// zero when the retained local modes lie in the coarse space.
pub fn kernel_check(setup: &Setup, v: &[C64]) -> f64 {
    let mut x = vec![ZERO; v.len()];
    for ((ls, eb), ce) in setup.schwarz.solvers.iter().zip(&setup.bundles).zip(&setup.energy_ext) {
        let pv = eb.project(ce, &ls.sub.restrict_global_ext(v));
        ls.sub.add_weighted_extension(&ls.apply_rj(&pv), &mut x);
    }
    let xn = norm2(&x);
    if xn == 0.0 {
        return 0.0;
    }
    let y = sub(&x, &setup.schwarz.coarse.apply_p0(&setup.system.a, &x));
    norm2(&y) / xn
}

#[derive(Debug, Clone, Default)]
pub struct EstimateReport {
    pub k0: f64,
    pub k1: f64,
    pub xi: f64,
    pub xi_per_subdomain: Vec<f64>,
    pub sigma: f64,
    pub tau_eff: f64,
    pub rho: f64,
    pub one_level_bound: f64,
    pub coarse_dim: usize,
    /// `||e^{n+1}||_C / ||e^n||_C` for the two-level iteration.
    pub two_level_ratios: Vec<f64>,
    /// Same for the one-level iteration from the same start.
    pub one_level_ratios: Vec<f64>,
    pub kernel_residual: f64,
    pub tail_checks_passed: bool,
    pub diagnostics: Vec<String>,
}

impl EstimateReport {
    pub fn recompute_rho(&self) -> f64 {
        self.sigma * (self.k0 * self.k1 * self.tau_eff).sqrt()
    }

    pub fn two_level_within_bound(&self) -> bool {
        self.two_level_ratios.iter().all(|&r| r <= self.rho * (1.0 + BOUND_SLACK))
    }

    pub fn one_level_within_bound(&self) -> bool {
        self.one_level_ratios.iter().all(|&r| r * r <= self.one_level_bound * (1.0 + BOUND_SLACK))
    }

    /// Flat `key = value` text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "k0 = {:.17e}", self.k0);
        let _ = writeln!(s, "k1 = {:.17e}", self.k1);
        let _ = writeln!(s, "xi = {:.17e}", self.xi);
        for (j, x) in self.xi_per_subdomain.iter().enumerate() {
            let _ = writeln!(s, "xi_{j} = {x:.17e}");
        }
        let _ = writeln!(s, "sigma = {:.17e}", self.sigma);
        let _ = writeln!(s, "tau_eff = {:.17e}", self.tau_eff);
        let _ = writeln!(s, "rho = {:.17e}", self.rho);
        let _ = writeln!(s, "one_level_bound = {:.17e}", self.one_level_bound);
        let _ = writeln!(s, "coarse_dim = {}", self.coarse_dim);
        let _ = writeln!(s, "kernel_residual = {:.17e}", self.kernel_residual);
        let _ = writeln!(s, "tail_checks_passed = {}", self.tail_checks_passed);
        let _ = writeln!(s, "two_level_within_bound = {}", self.two_level_within_bound());
        let _ = writeln!(s, "one_level_within_bound = {}", self.one_level_within_bound());
        for d in &self.diagnostics {
            let _ = writeln!(s, "diagnostic = {d}");
        }
        s
    }

    /// `iter,one_level_ratio,two_level_ratio,rho,one_level_bound_sqrt`.
    pub fn ratios_csv(&self) -> String {
        let mut s = String::from("iter,one_level_ratio,two_level_ratio,rho,one_level_bound_sqrt\n");
        let n = self.one_level_ratios.len().max(self.two_level_ratios.len());
        let fmt = |v: Option<&f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        for k in 0..n {
            let _ = writeln!(
                s,
                "{},{},{},{:.17e},{:.17e}",
                k + 1,
                fmt(self.one_level_ratios.get(k)),
                fmt(self.two_level_ratios.get(k)),
                self.rho,
                self.one_level_bound.sqrt()
            );
        }
        s
    }
}

/// Energy-norm error ratios of `n_iters` sweeps. The sweeps act on the
/// homogeneous system started from `u0 - u*`, where the iterate is minus the
/// error, so small errors are not lost to cancellation against `u*`.
fn error_ratios(
    setup: &Setup,
    u_star: &[C64],
    u0: &[C64],
    n_iters: usize,
    step: fn(&mut SolverState, &GlobalSystem, &crate::solver::Schwarz),
) -> Vec<f64> {
    let c = &setup.energy_global.mat;
    let mut sys = setup.system.clone();
    sys.b = vec![ZERO; sys.n()];
    let mut st = SolverState::new(sub(u0, u_star));
    let e0 = energy_sq(c, &st.u).max(0.0).sqrt();
    let mut prev = e0;
    let mut out = Vec::with_capacity(n_iters);
    for _ in 0..n_iters {
        if prev <= 1e-13 * e0 {
            break;
        }
        step(&mut st, &sys, &setup.schwarz);
        let e = energy_sq(c, &st.u).max(0.0).sqrt();
        out.push(e / prev);
        prev = e;
    }
    out
}

/// Measures all constants, runs `n_iters` one- and two-level sweeps from `u0`
/// and compares the observed energy-error reductions with the bounds.
pub fn contraction_report<R: Rng>(
    setup: &Setup,
    u_star: &[C64],
    u0: &[C64],
    n_iters: usize,
    tail_samples: usize,
    rng: &mut R,
) -> Result<EstimateReport> {
    guard(setup.n())?;
    let k0 = estimate_k0(&setup.partition, &setup.energy_global, &setup.energy_local)?;
    let k1 = estimate_k1(&setup.partition, &setup.energy_global, &setup.energy_ext)?;
    let sigma = estimate_sigma(&setup.schwarz.coarse, &setup.system.a, &setup.energy_global)?;

    let xi_per_subdomain: Vec<f64> = if setup.bundles.is_empty() {
        // one-level setup: solve the eigenproblems just for xi
        setup
            .schwarz
            .solvers
            .iter()
            .zip(&setup.energy_local)
            .zip(&setup.energy_ext)
            .map(|((ls, cl), ce)| crate::gevp::solve_gevp(ls, cl, ce).map(|b| b.xi()))
            .collect::<Result<_>>()?
    } else {
        setup.bundles.iter().map(EigenBundle::xi).collect()
    };
    let xi = xi_per_subdomain.iter().copied().fold(0.0, f64::max);
    let tau_eff = if setup.bundles.is_empty() { xi } else { setup.tau_eff() };

    let mut diagnostics = Vec::new();
    let mut tail_ok = true;
    for (((ls, eb), cl), ce) in setup.schwarz.solvers.iter().zip(&setup.bundles).zip(&setup.energy_local).zip(&setup.energy_ext) {
        let t = spectral_tail_check(ls, eb, cl, ce, tail_samples, rng);
        if !t.passed {
            tail_ok = false;
            diagnostics.push(format!(
                "subdomain {}: excluded-eigenvalue bound failed (max ratio {:e} > tau_eff {:e})",
                eb.id, t.max_ratio, t.tau_eff
            ));
        }
    }
    let kernel_residual = if setup.bundles.is_empty() {
        0.0
    } else {
        let v = random_vec(rng, setup.n());
        kernel_check(setup, &v)
    };
    if kernel_residual > 1e-10 {
        diagnostics.push(format!("coarse kernel property failed: residual {kernel_residual:e}"));
    }

    let two_level_ratios = error_ratios(setup, u_star, u0, n_iters, two_level_iterate);
    let one_level_ratios = error_ratios(setup, u_star, u0, n_iters, oras_iterate);

    let mut report = EstimateReport {
        k0,
        k1,
        xi,
        xi_per_subdomain,
        sigma,
        tau_eff,
        rho: 0.0,
        one_level_bound: k0 * k1 * xi,
        coarse_dim: setup.coarse_dim(),
        two_level_ratios,
        one_level_ratios,
        kernel_residual,
        tail_checks_passed: tail_ok,
        diagnostics,
    };
    report.rho = report.recompute_rho();
    if !report.two_level_within_bound() {
        report.diagnostics.push(format!(
            "two-level ratio above rho = {:e}: {:?}",
            report.rho, report.two_level_ratios
        ));
    }
    if !report.one_level_within_bound() {
        report.diagnostics.push(format!(
            "one-level squared ratio above k0*k1*xi = {:e}: {:?}",
            report.one_level_bound, report.one_level_ratios
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_rejects_large_problems() {
        assert!(guard(MAX_ANALYSIS_DOFS).is_ok());
        assert!(matches!(guard(MAX_ANALYSIS_DOFS + 1), Err(Error::TooLarge(_))));
    }

    #[test]
    fn rho_is_recomputed_from_parts() {
        let r = EstimateReport { k0: 2.0, k1: 2.0, sigma: 1.5, tau_eff: 0.04, ..Default::default() };
        assert!((r.recompute_rho() - 1.5 * 0.4).abs() < 1e-15);
    }

    #[test]
    fn report_text_is_key_value() {
        let r = EstimateReport { k0: 1.0, k1: 1.0, xi_per_subdomain: vec![0.5], ..Default::default() };
        for line in r.to_text().lines() {
            assert!(line.contains(" = "), "{line}");
        }
    }
}
