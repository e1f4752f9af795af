//! Fixtures and dense oracles shared by the integration tests. Nothing here
//! calls into the assembly or factorization code under test.
#![allow(dead_code)]

use std::collections::HashMap;

use helmdd_core::linalg::{to_dense, SpMat};
use helmdd_core::medium::{builtin_medium, BuiltinMedium};
use helmdd_core::mesh::build_grid;
use helmdd_core::{Bounds, FilterStrategy, MediumField, Mesh, Setup, SetupConfig, C64};
use rand::Rng;

pub type Dense = Vec<Vec<C64>>;

pub const OMEGA_DESK: f64 = 4.0 * std::f64::consts::PI;

pub fn layered(nx: usize, ny: usize, bounds: Bounds) -> (Mesh, MediumField) {
    let mesh = build_grid(nx, ny, bounds).unwrap();
    let med = builtin_medium(BuiltinMedium::Layers { bands: 3, contrast: 2.0 }, &mesh).unwrap();
    (mesh, med)
}

pub fn strip_bounds() -> Bounds {
    Bounds::new(0.0, 2.0, 0.0, 1.0)
}

pub fn config(jx: usize, jy: usize, strategy: Option<FilterStrategy>) -> SetupConfig {
    SetupConfig { jx, jy, overlap: 1, oversample: 1, strategy, parallel: true }
}

/// 16x8 elements on [0,2]x[0,1], two strips, omega = 4 pi, layered medium.
pub fn desk(strategy: Option<FilterStrategy>) -> (Mesh, MediumField, Setup) {
    let (mesh, med) = layered(16, 8, strip_bounds());
    let setup = Setup::build(&mesh, &med, OMEGA_DESK, &config(2, 1, strategy)).unwrap();
    (mesh, med, setup)
}

/// 8x4 elements on [0,2]x[0,1], two strips, omega = 5.
pub fn small_desk(strategy: Option<FilterStrategy>) -> (Mesh, MediumField, Setup) {
    let (mesh, med) = layered(8, 4, strip_bounds());
    let setup = Setup::build(&mesh, &med, 5.0, &config(2, 1, strategy)).unwrap();
    (mesh, med, setup)
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

pub fn dense(a: &SpMat) -> Dense {
    let m = to_dense(a);
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![C64::new(0.0, 0.0); c]; r]
}

pub fn matvec(a: &Dense, x: &[C64]) -> Vec<C64> {
    a.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn max_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter().zip(b).flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).norm())).fold(0.0, f64::max)
}

pub fn max_entry(a: &Dense) -> f64 {
    a.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// `x^H M x` for Hermitian `M`.
pub fn quad(m: &Dense, x: &[C64]) -> f64 {
    x.iter().zip(matvec(m, x)).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &Dense, b: &[C64]) -> Vec<C64> {
    let n = a.len();
    let mut m: Dense = a.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].norm().total_cmp(&m[j][k].norm())).unwrap();
        m.swap(k, p);
        x.swap(k, p);
        let piv = m[k][k];
        assert!(piv.norm() > 0.0, "singular oracle matrix");
        for i in k + 1..n {
            let f = m[i][k] / piv;
            if f.norm() == 0.0 {
                continue;
            }
            for j in k..n {
                let t = m[k][j];
                m[i][j] -= f * t;
            }
            let t = x[k];
            x[i] -= f * t;
        }
    }
    for k in (0..n).rev() {
        let s: C64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (x[k] - s) / m[k][k];
    }
    x
}

/// Gradients of the three barycentric functions, from the inverse of the
/// Vandermonde matrix `[1 x y]`.
fn p1_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for k in 0..3 {
        let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        g[k] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
    }
    (g, det.abs() / 2.0)
}

/// Which edges of an element set are on the outer rectangle, which cut it.
pub fn set_boundary(mesh: &Mesh, elems: &[usize]) -> (Vec<[usize; 2]>, Vec<[usize; 2]>) {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for &e in elems {
        let el = mesh.elements[e];
        for k in 0..3 {
            let (a, b) = (el[k], el[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let b = mesh.bounds;
    let on_side = |a: [f64; 2], c: [f64; 2]| {
        let eq = |u: f64, v: f64| (u - v).abs() < 1e-12;
        (eq(a[0], b.xmin) && eq(c[0], b.xmin))
            || (eq(a[0], b.xmax) && eq(c[0], b.xmax))
            || (eq(a[1], b.ymin) && eq(c[1], b.ymin))
            || (eq(a[1], b.ymax) && eq(c[1], b.ymax))
    };
    let mut outer = Vec::new();
    let mut cut = Vec::new();
    let mut keys: Vec<_> = count.into_iter().filter(|&(_, c)| c == 1).map(|(k, _)| k).collect();
    keys.sort();
    for (a, c) in keys {
        if on_side(mesh.nodes[a], mesh.nodes[c]) {
            outer.push([a, c]);
        } else {
            cut.push([a, c]);
        }
    }
    (outer, cut)
}

/// Dense form over `elems` indexed by `dofs` (sorted global nodes):
/// `mu K + mass_coef nu M + outer_coef E_outer + cut_coef E_cut`.
/// Mass by the three-point edge-midpoint rule, edges by Simpson's rule;
/// both are exact for the quadratic integrands involved.
pub fn oracle_form(
    mesh: &Mesh,
    med: &MediumField,
    elems: &[usize],
    dofs: &[usize],
    mass_coef: f64,
    outer_coef: C64,
    cut_coef: C64,
) -> Dense {
    let loc: HashMap<usize, usize> = dofs.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let mut a = zeros(dofs.len(), dofs.len());
    for &e in elems {
        let el = mesh.elements[e];
        let p = el.map(|g| mesh.nodes[g]);
        let (g, area) = p1_gradients(p);
        // barycentric values at the three edge midpoints
        let mids = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
        for k in 0..3 {
            for l in 0..3 {
                let stiff = med.mu[e] * area * (g[k][0] * g[l][0] + g[k][1] * g[l][1]);
                let mass: f64 = mids.iter().map(|q| q[k] * q[l]).sum::<f64>() * area / 3.0;
                a[loc[&el[l]]][loc[&el[k]]] += C64::new(stiff + mass_coef * med.nu[e] * mass, 0.0);
            }
        }
    }
    let (outer, cut) = set_boundary(mesh, elems);
    for (edges, coef) in [(outer, outer_coef), (cut, cut_coef)] {
        for [u, v] in edges {
            let (pu, pv) = (mesh.nodes[u], mesh.nodes[v]);
            let len = ((pu[0] - pv[0]).powi(2) + (pu[1] - pv[1]).powi(2)).sqrt();
            // Simpson: phi_u phi_v integrates to len/6, phi_u^2 to len/3
            let (d, o) = (len / 3.0, len / 6.0);
            let (iu, iv) = (loc[&u], loc[&v]);
            a[iu][iu] += coef * d;
            a[iv][iv] += coef * d;
            a[iu][iv] += coef * o;
            a[iv][iu] += coef * o;
        }
    }
    a
}

pub fn all_elements(mesh: &Mesh) -> Vec<usize> {
    (0..mesh.num_elements()).collect()
}

/// Dense restriction of a global matrix to rows/cols `idx`.
pub fn submatrix(a: &Dense, rows: &[usize], cols: &[usize]) -> Dense {
    rows.iter().map(|&i| cols.iter().map(|&j| a[i][j]).collect()).collect()
}
