//! Spectral coarse space and the Galerkin coarse problem.
//!
//! Columns of `Z` are `E_j (chi_j . R_j u~_{j,k})` for the retained
//! eigenvectors, stored per subdomain on `Omega_j` nodes. The coarse matrix is
//! `A0 = Z^H A Z`, so that `P0 = Z A0^{-1} Z^H A` is the projection onto
//! `range(Z)` along the `a`-orthogonal complement.

use std::fmt::Write as _;
use std::ops::Range;

use faer::linalg::solvers::PartialPivLu;
use faer::prelude::*;
use faer::Mat;

use crate::error::{Error, Result};
use crate::gevp::EigenBundle;
use crate::linalg::{norm2, spmv, SpMat, C64, ZERO};
use crate::local_ops::LocalSolver;

/// Columns below this 2-norm are dropped.
pub const DROP_TOL: f64 = 1e-14;
/// `A0` is rejected when its smallest singular value falls below this
/// fraction of the largest.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Eigenpairs with `lambda <= NULL_TOL * xi_j` satisfy `||K_j u||_C^2 = lambda`
/// at roundoff level and give no coarse vector.
pub const NULL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct CoarseBlock {
    pub id: usize,
    /// Global node numbers of the rows of `cols`.
    pub dofs: Vec<usize>,
    pub cols: Mat<C64>,
}

pub struct CoarseSpace {
    pub n: usize,
    pub blocks: Vec<CoarseBlock>,
    /// Column range of each block inside `Z`.
    pub ranges: Vec<Range<usize>>,
    pub a0: Option<Mat<C64>>,
    lu: Option<PartialPivLu<C64>>,
    /// Per subdomain: (retained eigenpairs, tau_eff).
    pub retained: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
}

impl std::fmt::Debug for CoarseSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoarseSpace").field("n", &self.n).field("m", &self.dim()).finish()
    }
}

impl CoarseSpace {
    /// Empty coarse space; two-level iterations reduce to one-level ones.
    pub fn empty(n: usize) -> Self {
        CoarseSpace { n, blocks: Vec::new(), ranges: Vec::new(), a0: None, lu: None, retained: Vec::new(), warnings: Vec::new() }
    }

    /// Coarse space from explicit blocks of columns.
    pub fn from_blocks(n: usize, blocks: Vec<CoarseBlock>) -> Self {
        let mut ranges = Vec::with_capacity(blocks.len());
        let mut start = 0;
        for b in &blocks {
            assert_eq!(b.dofs.len(), b.cols.nrows());
            ranges.push(start..start + b.cols.ncols());
            start += b.cols.ncols();
        }
        CoarseSpace { n, blocks, ranges, a0: None, lu: None, retained: Vec::new(), warnings: Vec::new() }
    }

    /// The whole space, `Z = I`.
    pub fn identity(n: usize) -> Self {
        Self::from_global_columns(Mat::identity(n, n))
    }

    /// Coarse space spanned by dense global columns.
    pub fn from_global_columns(z: Mat<C64>) -> Self {
        let n = z.nrows();
        Self::from_blocks(n, vec![CoarseBlock { id: 0, dofs: (0..n).collect(), cols: z }])
    }

    pub fn dim(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn is_factorized(&self) -> bool {
        self.lu.is_some() || self.dim() == 0
    }

    /// `Z y`.
    pub fn apply_z(&self, y: &[C64]) -> Vec<C64> {
        assert_eq!(y.len(), self.dim());
        let mut out = vec![ZERO; self.n];
        for (b, r) in self.blocks.iter().zip(&self.ranges) {
            for (c, k) in r.clone().enumerate() {
                if y[k] == ZERO {
                    continue;
                }
                for (i, &g) in b.dofs.iter().enumerate() {
                    out[g] += b.cols[(i, c)] * y[k];
                }
            }
        }
        out
    }

    /// `Z^H x`.
    pub fn apply_zh(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        let mut out = vec![ZERO; self.dim()];
        for (b, r) in self.blocks.iter().zip(&self.ranges) {
            for (c, k) in r.clone().enumerate() {
                out[k] = b.dofs.iter().enumerate().map(|(i, &g)| b.cols[(i, c)].conj() * x[g]).sum();
            }
        }
        out
    }

    /// Dense `n x m` copy of `Z`.
    pub fn z_dense(&self) -> Mat<C64> {
        let mut z = Mat::zeros(self.n, self.dim());
        for (b, r) in self.blocks.iter().zip(&self.ranges) {
            for (c, k) in r.clone().enumerate() {
                for (i, &g) in b.dofs.iter().enumerate() {
                    z[(g, k)] = b.cols[(i, c)];
                }
            }
        }
        z
    }

    /// Forms `A0 = Z^H A Z`, checks it is nonsingular and factorizes it.
    pub fn assemble(&mut self, a: &SpMat) -> Result<()> {
        let m = self.dim();
        if m == 0 {
            self.a0 = None;
            self.lu = None;
            return Ok(());
        }
        let mut a0 = Mat::<C64>::zeros(m, m);
        let mut e = vec![ZERO; m];
        for k in 0..m {
            e[k] = C64::new(1.0, 0.0);
            let az = spmv(a, &self.apply_z(&e));
            let col = self.apply_zh(&az);
            for (i, v) in col.into_iter().enumerate() {
                a0[(i, k)] = v;
            }
            e[k] = ZERO;
        }
        let sv = a0
            .singular_values()
            .map_err(|e| Error::Numerical(format!("coarse SVD failed: {e:?}")))?;
        let (smax, smin) = (sv[0], sv[sv.len() - 1]);
        if !(smin > SINGULAR_TOL * smax) {
            return Err(Error::Numerical(format!(
                "coarse matrix is numerically singular (sigma_min/sigma_max = {:e}); \
                 enlarge the coarse space with a smaller tau or a larger count/percent",
                smin / smax
            )));
        }
        self.lu = Some(a0.partial_piv_lu());
        self.a0 = Some(a0);
        Ok(())
    }

    fn solve_a0(&self, rhs: &[C64]) -> Vec<C64> {
        let lu = self.lu.as_ref().expect("coarse matrix not factorized");
        let x = lu.solve(Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]));
        (0..rhs.len()).map(|i| x[(i, 0)]).collect()
    }

    /// `w0 = Z A0^{-1} Z^H r`.
    pub fn coarse_correct(&self, r: &[C64]) -> Vec<C64> {
        if self.dim() == 0 {
            return vec![ZERO; self.n];
        }
        self.apply_z(&self.solve_a0(&self.apply_zh(r)))
    }

    /// `P0 u = Z A0^{-1} Z^H A u`.
    pub fn apply_p0(&self, a: &SpMat, u: &[C64]) -> Vec<C64> {
        self.coarse_correct(&spmv(a, u))
    }

    /// Text summary: dimension, per-subdomain retained counts and tau_eff.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "m = {}", self.dim());
        for (j, (count, tau)) in self.retained.iter().enumerate() {
            let _ = writeln!(s, "subdomain {j} retained = {count} tau_eff = {tau:.17e}");
        }
        let tau_max = self.retained.iter().map(|r| r.1).fold(0.0, f64::max);
        let _ = writeln!(s, "tau_eff = {tau_max:.17e}");
        s
    }
}

/// Builds `Z` from filtered eigenvector bundles, in ascending subdomain order.
pub fn build_coarse_basis(bundles: &[EigenBundle], solvers: &[LocalSolver]) -> CoarseSpace {
    assert_eq!(bundles.len(), solvers.len());
    let n = solvers.first().map_or(0, |s| s.sub.dofs.num_global());
    let mut warnings = Vec::new();
    let mut blocks = Vec::new();
    for (eb, ls) in bundles.iter().zip(solvers) {
        assert_eq!(eb.id, ls.id());
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(eb.retained);
        for k in 0..eb.retained {
            if eb.eigenvalues[k] <= NULL_TOL * eb.xi() {
                warnings.push(format!("subdomain {}: dropped coarse vector {k} from the null space of K_j", eb.id));
                continue;
            }
            let c = ls.apply_kj(&eb.eigenvector(k));
            if norm2(&c) < DROP_TOL {
                warnings.push(format!("subdomain {}: dropped coarse vector {k} with negligible norm", eb.id));
                continue;
            }
            cols.push(c);
        }
        if cols.is_empty() {
            continue;
        }
        let nl = ls.sub.n_local();
        let mat = Mat::from_fn(nl, cols.len(), |i, k| cols[k][i]);
        blocks.push(CoarseBlock { id: eb.id, dofs: ls.sub.dofs.dofs.clone(), cols: mat });
    }
    let mut cs = CoarseSpace::from_blocks(n, blocks);
    cs.retained = bundles.iter().map(|b| (b.retained, b.tau_eff)).collect();
    cs.warnings = warnings;
    cs
}
