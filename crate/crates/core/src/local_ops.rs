//! Per-subdomain factorizations and the local operators built on them.
//!
//! With `I_j` the restriction from `Omega~_j` nodes to `Omega_j` nodes, the
//! error propagation operator of one subdomain is
//! `R_j v = B_j^{-1} (B_j I_j v - I_j A~_j v)`, and `K_j = chi_j R_j`.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;

use crate::assembly::{assemble_local_impedance, assemble_local_neumann};
use crate::decomposition::Subdomain;
use crate::error::{Error, Result};
use crate::linalg::{col_to_vec, norm2, spmv, sub, to_dense, vec_to_col, SpMat, C64, ONE};
use crate::medium::MediumField;
use crate::mesh::Mesh;

pub struct LocalSolver {
    pub sub: Subdomain,
    /// Impedance matrix on `Omega_j`.
    pub b_mat: SpMat,
    /// Neumann-type matrix on `Omega~_j`; applied, never factorized.
    pub a_ext: SpMat,
    lu: Lu<usize, C64>,
}

impl std::fmt::Debug for LocalSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocalSolver")
            .field("id", &self.sub.id)
            .field("n_local", &self.sub.n_local())
            .field("n_ext", &self.sub.n_ext())
            .finish()
    }
}

impl LocalSolver {
    /// Assembles `B_j` and `A~_j` and factorizes `B_j`.
    pub fn new(mesh: &Mesh, medium: &MediumField, omega: f64, sub: &Subdomain) -> Result<Self> {
        let b_mat = assemble_local_impedance(mesh, medium, omega, sub)?;
        let a_ext = assemble_local_neumann(mesh, medium, omega, &sub.elems_ext, &sub.dofs_ext)?;
        Self::factorize(sub.clone(), b_mat, a_ext).map_err(|e| match e {
            Error::Numerical(m) => Error::Numerical(format!("{m} (omega = {omega})")),
            e => e,
        })
    }

    pub fn factorize(sub: Subdomain, b_mat: SpMat, a_ext: SpMat) -> Result<Self> {
        let id = sub.id;
        let lu = b_mat
            .sp_lu()
            .map_err(|e| Error::Numerical(format!("factorization of B_{id} failed: {e:?}")))?;
        let ls = LocalSolver { sub, b_mat, a_ext, lu };

        // a singular pivot shows up as non-finite or inaccurate solves
        let probe: Vec<C64> = (0..ls.sub.n_local()).map(|k| C64::new(1.0, (k % 7) as f64 * 0.1)).collect();
        let x = ls.solve(&probe);
        let res = norm2(&sub_vec(&spmv(&ls.b_mat, &x), &probe)) / norm2(&probe);
        if !(res <= 1e-8) {
            return Err(Error::Numerical(format!(
                "local matrix B_{id} is numerically singular (probe residual {res:e})"
            )));
        }
        Ok(ls)
    }

    pub fn id(&self) -> usize {
        self.sub.id
    }

    /// `B_j^{-1} r`.
    pub fn solve(&self, r: &[C64]) -> Vec<C64> {
        col_to_vec(&self.lu.solve(vec_to_col(r)), 0)
    }

    /// `B_j^{-H} r`.
    pub fn solve_adjoint(&self, r: &[C64]) -> Vec<C64> {
        let mut x = vec_to_col(r);
        self.lu.solve_adjoint_in_place(x.as_mut());
        col_to_vec(&x, 0)
    }

    /// `B_j^{-1} R` for a block of right-hand sides.
    pub fn solve_many(&self, rhs: &Mat<C64>) -> Mat<C64> {
        self.lu.solve(rhs)
    }

    /// `R_j v_ext`.
    pub fn apply_rj(&self, v_ext: &[C64]) -> Vec<C64> {
        let v = self.sub.ext_to_local(v_ext);
        let bv = spmv(&self.b_mat, &v);
        let av = self.sub.ext_to_local(&spmv(&self.a_ext, v_ext));
        self.solve(&sub_vec(&bv, &av))
    }

    /// `K_j v_ext = chi_j . R_j v_ext`.
    pub fn apply_kj(&self, v_ext: &[C64]) -> Vec<C64> {
        self.sub.apply_chi(&self.apply_rj(v_ext))
    }

    /// ORAS correction from a global residual: `B_j^{-1} (r restricted to Omega_j)`.
    pub fn local_oras_solve(&self, r_global: &[C64]) -> Vec<C64> {
        self.solve(&self.sub.restrict_global(r_global))
    }

    /// Same correction computed from `Omega~_j` data only: the local load
    /// `b_ext` and the current iterate restricted to `Omega~_j`.
    pub fn local_oras_solve_localized(&self, b_ext: &[C64], u_ext: &[C64]) -> Vec<C64> {
        let r_ext = sub_vec(b_ext, &spmv(&self.a_ext, u_ext));
        self.solve(&self.sub.ext_to_local(&r_ext))
    }

    /// Dense `R_j`, `n_local x n_ext`.
    pub fn rj_dense(&self) -> Mat<C64> {
        let a = to_dense(&self.a_ext);
        let pos = self.sub.local_in_ext();
        let rows = Mat::from_fn(pos.len(), a.ncols(), |i, j| a[(pos[i], j)]);
        let mut r = self.solve_many(&rows);
        for x in r.col_iter_mut() {
            for v in x.iter_mut() {
                *v = -*v;
            }
        }
        for (l, &p) in pos.iter().enumerate() {
            r[(l, p)] += ONE;
        }
        r
    }

    /// Dense `K_j = chi_j R_j`.
    pub fn kj_dense(&self) -> Mat<C64> {
        let mut r = self.rj_dense();
        for (i, &c) in self.sub.chi.iter().enumerate() {
            for j in 0..r.ncols() {
                r[(i, j)] *= c;
            }
        }
        r
    }
}

fn sub_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    sub(a, b)
}
