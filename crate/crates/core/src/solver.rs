//! Stationary Schwarz iterations, the two-level preconditioner, GMRES and a
//! sparse direct solve.
//!
//! Subdomain corrections may be computed concurrently but are always summed
//! in ascending subdomain order, so results do not depend on scheduling.

use std::fmt::Write as _;
use std::time::Instant;

use faer::prelude::*;
use rayon::prelude::*;

use crate::assembly::GlobalSystem;
use crate::coarse::CoarseSpace;
use crate::error::{Error, Result};
use crate::linalg::{axpy, col_to_vec, dot, norm2, spmv, sub, vec_to_col, SpMat, C64, ZERO};
use crate::local_ops::LocalSolver;

/// Local solvers plus an optional coarse level.
pub struct Schwarz {
    pub solvers: Vec<LocalSolver>,
    pub coarse: CoarseSpace,
    pub parallel: bool,
}

impl Schwarz {
    pub fn new(solvers: Vec<LocalSolver>, coarse: CoarseSpace) -> Self {
        Schwarz { solvers, coarse, parallel: true }
    }

    pub fn one_level(solvers: Vec<LocalSolver>) -> Self {
        let n = solvers.first().map_or(0, |s| s.sub.dofs.num_global());
        Self::new(solvers, CoarseSpace::empty(n))
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    /// `sum_j E_j (chi_j . B_j^{-1} r|Omega_j)`.
    pub fn one_level_correction(&self, r: &[C64]) -> Vec<C64> {
        let local: Vec<Vec<C64>> = if self.parallel {
            self.solvers.par_iter().map(|ls| ls.local_oras_solve(r)).collect()
        } else {
            self.solvers.iter().map(|ls| ls.local_oras_solve(r)).collect()
        };
        let mut out = vec![ZERO; r.len()];
        for (ls, v) in self.solvers.iter().zip(&local) {
            ls.sub.add_weighted_extension(v, &mut out);
        }
        out
    }

    /// One two-level sweep from a zero initial guess:
    /// `M^{-1} r = w + Z A0^{-1} Z^H (r - A w)` with `w` the one-level correction.
    pub fn apply(&self, a: &SpMat, r: &[C64]) -> Vec<C64> {
        let mut w = self.one_level_correction(r);
        if self.coarse.dim() > 0 {
            let rw = sub(r, &spmv(a, &w));
            let w0 = self.coarse.coarse_correct(&rw);
            axpy(C64::new(1.0, 0.0), &w0, &mut w);
        }
        w
    }

    /// `sum_j E_j (chi_j . R_j e|Omega~_j)`, the one-level error propagation.
    pub fn error_propagation(&self, e: &[C64]) -> Vec<C64> {
        let local: Vec<Vec<C64>> = if self.parallel {
            self.solvers.par_iter().map(|ls| ls.apply_rj(&ls.sub.restrict_global_ext(e))).collect()
        } else {
            self.solvers.iter().map(|ls| ls.apply_rj(&ls.sub.restrict_global_ext(e))).collect()
        };
        let mut out = vec![ZERO; e.len()];
        for (ls, v) in self.solvers.iter().zip(&local) {
            ls.sub.add_weighted_extension(v, &mut out);
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolverState {
    pub u: Vec<C64>,
    pub iterations: usize,
    /// Relative residuals; entry 0 is the initial guess.
    pub residuals: Vec<f64>,
    /// Relative energy-norm errors, when an oracle solution is available.
    pub energy_errors: Vec<Option<f64>>,
    /// Seconds since the start of the solve, per history entry.
    pub times: Vec<f64>,
    pub converged: bool,
    pub setup_time: f64,
    pub solve_time: f64,
}

/// Reference solution and energy matrix for error histories.
pub struct ErrorOracle<'a> {
    pub u_star: &'a [C64],
    pub energy: &'a SpMat,
    norm: f64,
}

impl<'a> ErrorOracle<'a> {
    pub fn new(u_star: &'a [C64], energy: &'a SpMat) -> Self {
        let norm = crate::linalg::energy_sq(energy, u_star).sqrt();
        ErrorOracle { u_star, energy, norm }
    }

    pub fn relative_error(&self, u: &[C64]) -> f64 {
        let e = sub(self.u_star, u);
        let n = crate::linalg::energy_sq(self.energy, &e).max(0.0).sqrt();
        if self.norm > 0.0 {
            n / self.norm
        } else {
            n
        }
    }
}

impl SolverState {
    pub fn new(u0: Vec<C64>) -> Self {
        SolverState { u: u0, ..Default::default() }
    }

    fn record(&mut self, sys: &GlobalSystem, oracle: Option<&ErrorOracle>, start: Instant) {
        let bn = norm2(&sys.b);
        let r = norm2(&sub(&sys.b, &spmv(&sys.a, &self.u)));
        self.residuals.push(if bn > 0.0 { r / bn } else { r });
        self.energy_errors.push(oracle.map(|o| o.relative_error(&self.u)));
        self.times.push(start.elapsed().as_secs_f64());
    }

    /// Convergence CSV: `iter,residual_rel,energy_error_rel,time_s`.
    /// The time column is left empty unless `with_times`.
    pub fn to_csv(&self, with_times: bool) -> String {
        let mut s = String::from("iter,residual_rel,energy_error_rel,time_s\n");
        for (k, r) in self.residuals.iter().enumerate() {
            let e = self.energy_errors.get(k).copied().flatten().map(|e| format!("{e:.17e}")).unwrap_or_default();
            let t = if with_times { self.times.get(k).map(|t| format!("{t:.6}")).unwrap_or_default() } else { String::new() };
            let _ = writeln!(s, "{k},{r:.17e},{e},{t}");
        }
        s
    }
}

/// One-level ORAS sweep: `u += sum_j E_j (chi_j . B_j^{-1} (b - A u)|Omega_j)`.
pub fn oras_iterate(state: &mut SolverState, sys: &GlobalSystem, schwarz: &Schwarz) {
    let r = sub(&sys.b, &spmv(&sys.a, &state.u));
    let w = schwarz.one_level_correction(&r);
    axpy(C64::new(1.0, 0.0), &w, &mut state.u);
    state.iterations += 1;
}

/// Two-level sweep: additive subdomain corrections, then the coarse
/// correction computed from the updated residual.
pub fn two_level_iterate(state: &mut SolverState, sys: &GlobalSystem, schwarz: &Schwarz) {
    oras_iterate(state, sys, schwarz);
    if schwarz.coarse.dim() > 0 {
        let r = sub(&sys.b, &spmv(&sys.a, &state.u));
        let w0 = schwarz.coarse.coarse_correct(&r);
        axpy(C64::new(1.0, 0.0), &w0, &mut state.u);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    One,
    Two,
}

/// Runs the stationary iteration until the relative residual drops below
/// `tol` or `maxit` sweeps are done.
pub fn stationary(
    sys: &GlobalSystem,
    schwarz: &Schwarz,
    level: Level,
    u0: Vec<C64>,
    tol: f64,
    maxit: usize,
    oracle: Option<&ErrorOracle>,
) -> SolverState {
    let start = Instant::now();
    let mut st = SolverState::new(u0);
    st.record(sys, oracle, start);
    while st.iterations < maxit && st.residuals.last().copied().unwrap_or(0.0) > tol {
        match level {
            Level::One => oras_iterate(&mut st, sys, schwarz),
            Level::Two => two_level_iterate(&mut st, sys, schwarz),
        }
        st.record(sys, oracle, start);
    }
    st.converged = st.residuals.last().copied().unwrap_or(0.0) <= tol;
    st.solve_time = start.elapsed().as_secs_f64();
    st
}

#[derive(Debug, Clone, Copy)]
pub struct GmresConfig {
    pub tol: f64,
    pub maxit: usize,
    pub restart: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig { tol: 1e-8, maxit: 1000, restart: 200 }
    }
}

/// Right-preconditioned restarted GMRES for `A x = b`.
///
/// The history holds the Arnoldi residual estimate per iteration (which is
/// the true residual of `A` for right preconditioning, up to roundoff); on
/// each restart and at acceptance the true residual is recomputed.
pub fn gmres<FA, FM>(
    apply_a: FA,
    b: &[C64],
    apply_m: FM,
    x0: Option<Vec<C64>>,
    cfg: GmresConfig,
    oracle: Option<&ErrorOracle>,
) -> Result<SolverState>
where
    FA: Fn(&[C64]) -> Vec<C64>,
    FM: Fn(&[C64]) -> Vec<C64>,
{
    if !(cfg.tol > 0.0) || cfg.restart == 0 {
        return Err(Error::Config("GMRES needs tol > 0 and restart >= 1".into()));
    }
    let start = Instant::now();
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = x0.unwrap_or_else(|| vec![ZERO; n]);
    let mut st = SolverState::new(Vec::new());
    if bnorm == 0.0 {
        st.u = vec![ZERO; n];
        st.residuals.push(0.0);
        st.energy_errors.push(oracle.map(|o| o.relative_error(&st.u)));
        st.times.push(0.0);
        st.converged = true;
        return Ok(st);
    }

    let mut r = sub(b, &apply_a(&x));
    let mut beta = norm2(&r);
    st.residuals.push(beta / bnorm);
    st.energy_errors.push(oracle.map(|o| o.relative_error(&x)));
    st.times.push(start.elapsed().as_secs_f64());

    while beta / bnorm > cfg.tol && st.iterations < cfg.maxit {
        let m = cfg.restart.min(cfg.maxit - st.iterations);
        let mut v: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|x| x / beta).collect());
        let mut h: Vec<Vec<C64>> = Vec::with_capacity(m);
        let mut cs: Vec<(f64, C64)> = Vec::with_capacity(m);
        let mut g = vec![ZERO; m + 1];
        g[0] = C64::new(beta, 0.0);
        let mut k_done = 0;

        for k in 0..m {
            let z = apply_m(&v[k]);
            let mut w = apply_a(&z);
            let mut hk = vec![ZERO; k + 2];
            // classical Gram-Schmidt, twice
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(vi, &w);
                    hk[i] += c;
                    axpy(-c, vi, &mut w);
                }
            }
            let hn = norm2(&w);
            hk[k + 1] = C64::new(hn, 0.0);

            for (i, &(c, s)) in cs.iter().enumerate() {
                let t = c * hk[i] + s * hk[i + 1];
                hk[i + 1] = -s.conj() * hk[i] + c * hk[i + 1];
                hk[i] = t;
            }
            let (c, s, rr) = givens(hk[k], hk[k + 1]);
            hk[k] = rr;
            hk[k + 1] = ZERO;
            cs.push((c, s));
            g[k + 1] = -s.conj() * g[k];
            g[k] *= c;
            h.push(hk);
            st.iterations += 1;
            k_done = k + 1;

            let est = g[k + 1].norm() / bnorm;
            st.residuals.push(est);
            st.energy_errors.push(oracle.map(|o| {
                let xk = update(&x, &v, &h, &g, k_done, &apply_m);
                o.relative_error(&xk)
            }));
            st.times.push(start.elapsed().as_secs_f64());

            if est <= cfg.tol || hn <= f64::EPSILON * beta {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }

        x = update(&x, &v, &h, &g, k_done, &apply_m);
        r = sub(b, &apply_a(&x));
        beta = norm2(&r);
        if let Some(last) = st.residuals.last_mut() {
            *last = beta / bnorm;
        }
        if k_done == 0 {
            break;
        }
    }
    st.converged = beta / bnorm <= cfg.tol;
    st.u = x;
    st.solve_time = start.elapsed().as_secs_f64();
    Ok(st)
}

/// Rotation `[c s; -conj(s) c]` mapping `(a, b)` to `(r, 0)`.
fn givens(a: C64, b: C64) -> (f64, C64, C64) {
    let (na, nb) = (a.norm(), b.norm());
    if nb == 0.0 {
        return (1.0, ZERO, a);
    }
    if na == 0.0 {
        return (0.0, b.conj() / nb, C64::new(nb, 0.0));
    }
    let t = na.hypot(nb);
    let phase = a / na;
    let c = na / t;
    let s = phase * b.conj() / t;
    (c, s, phase * t)
}

fn update<FM: Fn(&[C64]) -> Vec<C64>>(
    x: &[C64],
    v: &[Vec<C64>],
    h: &[Vec<C64>],
    g: &[C64],
    k: usize,
    apply_m: &FM,
) -> Vec<C64> {
    if k == 0 {
        return x.to_vec();
    }
    // back substitution with the triangular Hessenberg factor
    let mut y = vec![ZERO; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[j][i] * y[j];
        }
        y[i] = s / h[i][i];
    }
    let mut vy = vec![ZERO; x.len()];
    for (j, yj) in y.iter().enumerate() {
        axpy(*yj, &v[j], &mut vy);
    }
    let mut out = x.to_vec();
    axpy(C64::new(1.0, 0.0), &apply_m(&vy), &mut out);
    out
}

/// Sparse LU solve with one step of iterative refinement.
pub fn direct_solve(a: &SpMat, b: &[C64]) -> Result<Vec<C64>> {
    let lu = a.sp_lu().map_err(|e| Error::Numerical(format!("global factorization failed: {e:?}")))?;
    let solve = |r: &[C64]| col_to_vec(&lu.solve(vec_to_col(r)), 0);
    let mut x = solve(b);
    let r = sub(b, &spmv(a, &x));
    axpy(C64::new(1.0, 0.0), &solve(&r), &mut x);
    let bn = norm2(b);
    let res = norm2(&sub(b, &spmv(a, &x)));
    if !(res <= 1e-10 * bn.max(f64::MIN_POSITIVE)) && bn > 0.0 {
        return Err(Error::Numerical(format!(
            "global matrix is numerically singular (relative residual {:e})",
            res / bn
        )));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_triplets, random_vec};
    use faer::sparse::Triplet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tridiag(n: usize) -> SpMat {
        let mut t = Vec::new();
        for i in 0..n {
            t.push(Triplet::new(i, i, C64::new(2.5, -0.3)));
            if i + 1 < n {
                t.push(Triplet::new(i, i + 1, C64::new(-1.0, 0.0)));
                t.push(Triplet::new(i + 1, i, C64::new(-1.0, 0.2)));
            }
        }
        from_triplets(n, n, &t)
    }

    #[test]
    fn identity_direct_solve_returns_rhs() {
        let n = 5;
        let t: Vec<_> = (0..n).map(|i| Triplet::new(i, i, C64::new(1.0, 0.0))).collect();
        let a = from_triplets(n, n, &t);
        let b = random_vec(&mut ChaCha8Rng::seed_from_u64(1), n);
        assert_eq!(direct_solve(&a, &b).unwrap(), b);
    }

    #[test]
    fn gmres_zero_rhs_takes_no_iterations() {
        let a = tridiag(10);
        let st = gmres(|x| spmv(&a, x), &vec![ZERO; 10], |x| x.to_vec(), None, GmresConfig::default(), None).unwrap();
        assert_eq!(st.iterations, 0);
        assert!(st.converged && st.u.iter().all(|x| *x == ZERO));
    }

    #[test]
    fn gmres_with_exact_inverse_converges_in_one_step() {
        let a = tridiag(20);
        let b = random_vec(&mut ChaCha8Rng::seed_from_u64(3), 20);
        let lu = a.sp_lu().unwrap();
        let minv = |r: &[C64]| col_to_vec(&lu.solve(vec_to_col(r)), 0);
        let st = gmres(|x| spmv(&a, x), &b, minv, None, GmresConfig::default(), None).unwrap();
        assert_eq!(st.iterations, 1);
        assert!(st.converged);
    }

    #[test]
    fn gmres_residuals_decrease_within_a_cycle() {
        let a = tridiag(60);
        let b = random_vec(&mut ChaCha8Rng::seed_from_u64(5), 60);
        let cfg = GmresConfig { tol: 1e-10, maxit: 500, restart: 200 };
        let st = gmres(|x| spmv(&a, x), &b, |x| x.to_vec(), None, cfg, None).unwrap();
        assert!(st.converged);
        assert!(st.residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let x = direct_solve(&a, &b).unwrap();
        assert!(norm2(&sub(&x, &st.u)) <= 1e-8 * norm2(&x));
    }

    #[test]
    fn restarted_gmres_still_converges() {
        let a = tridiag(60);
        let b = random_vec(&mut ChaCha8Rng::seed_from_u64(6), 60);
        let cfg = GmresConfig { tol: 1e-9, maxit: 2000, restart: 5 };
        let st = gmres(|x| spmv(&a, x), &b, |x| x.to_vec(), None, cfg, None).unwrap();
        assert!(st.converged);
        let r = norm2(&sub(&b, &spmv(&a, &st.u))) / norm2(&b);
        assert!(r <= 1e-9);
    }

    #[test]
    fn gmres_maxit_returns_unconverged_history() {
        let a = tridiag(60);
        let b = random_vec(&mut ChaCha8Rng::seed_from_u64(7), 60);
        let cfg = GmresConfig { tol: 1e-14, maxit: 3, restart: 200 };
        let st = gmres(|x| spmv(&a, x), &b, |x| x.to_vec(), None, cfg, None).unwrap();
        assert!(!st.converged);
        assert_eq!(st.iterations, 3);
        assert_eq!(st.residuals.len(), 4);
    }

    #[test]
    fn givens_zeroes_second_component() {
        let (a, b) = (C64::new(0.3, -1.2), C64::new(2.0, 0.7));
        let (c, s, r) = givens(a, b);
        let top = c * a + s * b;
        let bottom = -s.conj() * a + c * b;
        assert!((top - r).norm() < 1e-14 && bottom.norm() < 1e-14);
    }
}
