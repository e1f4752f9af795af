//! Local generalized eigenproblems on the oversampled subdomains.
//!
//! For each subdomain the pencil `(K_j^H C_j K_j, C~_j)` is solved densely,
//! where `C_j` and `C~_j` are the energy matrices on `Omega_j` and
//! `Omega~_j`. Eigenvalues are real, nonnegative and sorted descending;
//! eigenvectors are `C~_j`-orthonormal.

use std::fmt::Write as _;

use faer::Mat;

use crate::assembly::EnergyMatrix;
use crate::error::{config, Error, Result};
use crate::linalg::{col_to_vec, dot, hermitian_pencil_eigen, norm2, spmv, spmv_adjoint, to_dense, C64, ZERO};
use crate::local_ops::LocalSolver;

/// Eigenvalues this close below zero are treated as roundoff and clipped.
pub const CLIP_TOL: f64 = 1e-12;
/// Anything further below zero means the left matrix is not semidefinite.
pub const NEGATIVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterStrategy {
    /// Keep eigenpairs with eigenvalue strictly above the threshold.
    Tau(f64),
    /// Keep the leading `m` eigenpairs.
    Count(usize),
    /// Keep `ceil(p * |interface nodes| / 100)` leading eigenpairs.
    Percent(f64),
}

impl FilterStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FilterStrategy::Tau(t) if !(t > 0.0) => config(format!("tau must be positive, got {t}")),
            FilterStrategy::Percent(p) if !(p > 0.0 && p <= 100.0) => {
                config(format!("percent must lie in (0, 100], got {p}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenBundle {
    pub id: usize,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Columns indexed like `dofs_ext`, matching `eigenvalues`.
    pub eigenvectors: Mat<C64>,
    pub retained: usize,
    /// Largest excluded eigenvalue, 0 when nothing is excluded.
    pub tau_eff: f64,
    pub interface_count: usize,
    /// Smallest eigenvalue as computed, before clipping.
    pub min_raw_eigenvalue: f64,
}

impl EigenBundle {
    /// `xi_j`, the largest eigenvalue.
    pub fn xi(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        col_to_vec(&self.eigenvectors, k)
    }

    /// Applies a strategy, setting `retained` and `tau_eff`; returns warnings.
    pub fn filter(&mut self, strategy: FilterStrategy) -> Result<Vec<String>> {
        strategy.validate()?;
        let n = self.eigenvalues.len();
        let mut warnings = Vec::new();
        let wanted = match strategy {
            FilterStrategy::Tau(t) => self.eigenvalues.iter().take_while(|&&l| l > t).count(),
            FilterStrategy::Count(m) => m,
            FilterStrategy::Percent(p) => {
                let x = p * self.interface_count as f64 / 100.0;
                (x - 1e-9).ceil().max(0.0) as usize
            }
        };
        if wanted > n {
            warnings.push(format!("subdomain {}: requested {wanted} eigenpairs, only {n} exist", self.id));
        }
        self.retained = wanted.min(n);
        self.tau_eff = self.eigenvalues.get(self.retained).copied().unwrap_or(0.0);
        Ok(warnings)
    }

    /// `C~_j`-orthogonal projection onto the retained eigenvectors.
    pub fn project(&self, c_ext: &EnergyMatrix, v_ext: &[C64]) -> Vec<C64> {
        let cv = spmv(&c_ext.mat, v_ext);
        let mut out = vec![ZERO; v_ext.len()];
        for k in 0..self.retained {
            let u = self.eigenvector(k);
            let coef = dot(&u, &cv);
            for (o, x) in out.iter_mut().zip(&u) {
                *o += coef * x;
            }
        }
        out
    }

    /// One `k lambda` pair per line, `k` starting at 1.
    pub fn spectrum_dump(&self) -> String {
        let mut s = String::new();
        for (k, l) in self.eigenvalues.iter().enumerate() {
            let _ = writeln!(s, "{} {:.17e}", k + 1, l);
        }
        s
    }
}

fn check_maps(ls: &LocalSolver, c_loc: &EnergyMatrix, c_ext: &EnergyMatrix) {
    assert_eq!(c_loc.dofs.dofs, ls.sub.dofs.dofs, "C_j must live on Omega_j nodes");
    assert_eq!(c_ext.dofs.dofs, ls.sub.dofs_ext.dofs, "C~_j must live on Omega~_j nodes");
}

/// Full spectrum of `(K_j^H C_j K_j, C~_j)`.
pub fn solve_gevp(ls: &LocalSolver, c_loc: &EnergyMatrix, c_ext: &EnergyMatrix) -> Result<EigenBundle> {
    check_maps(ls, c_loc, c_ext);
    let id = ls.id();
    let k = ls.kj_dense();
    let left = k.adjoint() * to_dense(&c_loc.mat) * &k;
    let right = to_dense(&c_ext.mat);
    let (mut values, vectors) = hermitian_pencil_eigen(&left, &right).map_err(|e| match e {
        Error::Numerical(m) => Error::Numerical(format!("subdomain {id}: {m}")),
        e => e,
    })?;
    let min_raw_eigenvalue = values.iter().copied().fold(f64::INFINITY, f64::min);
    for l in values.iter_mut() {
        if *l < -NEGATIVE_TOL {
            return Err(Error::Numerical(format!(
                "subdomain {id}: eigenvalue {l:e} is negative, the left matrix is not semidefinite"
            )));
        }
        if *l < 0.0 && *l >= -CLIP_TOL {
            *l = 0.0;
        }
    }
    Ok(EigenBundle {
        id,
        tau_eff: values.first().copied().unwrap_or(0.0),
        eigenvalues: values,
        eigenvectors: vectors,
        retained: 0,
        interface_count: ls.sub.interface_dofs.len(),
        min_raw_eigenvalue,
    })
}

/// Relative residuals of the three blocks of the saddle-point form for
/// eigenpair `k`, with `v = R_j u` and `sigma = B_j^{-H} chi C_j chi v`.
/// The last block is scaled by `xi_j ||C~ u||` on top of its own terms.
pub fn verify_saddlepoint(
    ls: &LocalSolver,
    c_loc: &EnergyMatrix,
    c_ext: &EnergyMatrix,
    eb: &EigenBundle,
    k: usize,
) -> Result<[f64; 3]> {
    check_maps(ls, c_loc, c_ext);
    let u = eb.eigenvector(k);
    if norm2(&u) == 0.0 {
        return config("saddle-point check needs a nonzero eigenvector");
    }
    let lambda = eb.eigenvalues[k];
    let s = &ls.sub;
    let v = ls.apply_rj(&u);
    let dcdv = s.apply_chi(&spmv(&c_loc.mat, &s.apply_chi(&v)));
    let sigma = ls.solve_adjoint(&dcdv);

    // block 1: chi C chi v - B^H sigma
    let bh_sigma = spmv_adjoint(&ls.b_mat, &sigma);
    let r1 = rel(&[&dcdv, &neg(&bh_sigma)], &[&dcdv, &bh_sigma]);

    // block 2: -B v + B I u - I A~ u
    let bv = spmv(&ls.b_mat, &v);
    let biu = spmv(&ls.b_mat, &s.ext_to_local(&u));
    let iau = s.ext_to_local(&spmv(&ls.a_ext, &u));
    let r2 = rel(&[&neg(&bv), &biu, &neg(&iau)], &[&bv, &biu, &iau]);

    // block 3: I^T B^H sigma - A~^H E sigma - lambda C~ u
    let t1 = s.local_to_ext(&bh_sigma);
    let t2 = spmv_adjoint(&ls.a_ext, &s.local_to_ext(&sigma));
    let t3: Vec<C64> = spmv(&c_ext.mat, &u).iter().map(|x| x * lambda).collect();
    // scaled like a backward error, so null-space pairs are not judged on roundoff alone
    let cu = spmv(&c_ext.mat, &u);
    let pencil_scale: Vec<C64> = cu.iter().map(|x| x * eb.xi()).collect();
    let r3 = rel(&[&t1, &neg(&t2), &neg(&t3)], &[&t1, &t2, &t3, &pencil_scale]);

    Ok([r1, r2, r3])
}

fn neg(v: &[C64]) -> Vec<C64> {
    v.iter().map(|x| -x).collect()
}

fn rel(terms: &[&[C64]], scales: &[&[C64]]) -> f64 {
    let n = terms[0].len();
    let sum: Vec<C64> = (0..n).map(|i| terms.iter().map(|t| t[i]).sum()).collect();
    let scale: f64 = scales.iter().map(|s| norm2(s)).sum();
    let r = norm2(&sum);
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}
