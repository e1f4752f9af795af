//! Galerkin assembly of the Helmholtz forms on P1 triangles.
//!
//! Entries are `M[l, k] = form(phi_k, phi_l)` with the test slot conjugated;
//! the nodal basis is real, so no conjugation appears in the entries and every
//! matrix built here is complex symmetric.

use std::collections::BTreeMap;
use std::io::Write;

use faer::sparse::Triplet;

use crate::decomposition::Subdomain;
use crate::error::{config, Result};
use crate::linalg::{from_triplets, SpMat, C64, ZERO};
use crate::medium::MediumField;
use crate::mesh::Mesh;

/// Sorted set of global nodes with the inverse lookup.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub dofs: Vec<usize>,
    local: Vec<usize>,
}

impl DofMap {
    const NONE: usize = usize::MAX;

    pub fn new(num_global: usize, mut dofs: Vec<usize>) -> Self {
        dofs.sort_unstable();
        dofs.dedup();
        let mut local = vec![Self::NONE; num_global];
        for (l, &g) in dofs.iter().enumerate() {
            local[g] = l;
        }
        DofMap { dofs, local }
    }

    pub fn identity(n: usize) -> Self {
        DofMap::new(n, (0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn num_global(&self) -> usize {
        self.local.len()
    }

    pub fn local(&self, global: usize) -> Option<usize> {
        match self.local[global] {
            Self::NONE => None,
            l => Some(l),
        }
    }

    pub fn contains(&self, global: usize) -> bool {
        self.local[global] != Self::NONE
    }
}

#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub a: SpMat,
    pub b: Vec<C64>,
    pub omega: f64,
}

impl GlobalSystem {
    pub fn n(&self) -> usize {
        self.b.len()
    }
}

/// Energy-norm matrix `(mu grad u, grad v) + omega^2 (nu u, v)` over an element set.
#[derive(Debug, Clone)]
pub struct EnergyMatrix {
    pub mat: SpMat,
    pub dofs: DofMap,
}

/// `int grad(phi_i) . grad(phi_j)` on one triangle.
pub fn p1_stiffness(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    // rotated opposite edges
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        b[i] = p[j][1] - p[k][1];
        c[i] = p[k][0] - p[j][0];
    }
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (2.0 * area2);
        }
    }
    k
}

/// `int phi_i phi_j` on one triangle.
pub fn p1_mass(p: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

/// `int phi_i phi_j` on a straight edge of length `len`.
pub fn edge_mass(len: f64) -> [[f64; 2]; 2] {
    [[len / 3.0, len / 6.0], [len / 6.0, len / 3.0]]
}

/// Edges of an element set that belong to exactly one of its elements,
/// split into those on the outer boundary and those cutting the interior.
pub fn element_set_boundary(mesh: &Mesh, elems: &[usize]) -> (Vec<[usize; 2]>, Vec<[usize; 2]>) {
    let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for &e in elems {
        let el = mesh.elements[e];
        for k in 0..3 {
            let (a, b) = (el[k], el[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut outer = Vec::new();
    let mut cut = Vec::new();
    for ((a, b), c) in count {
        if c == 1 {
            if mesh.is_outer_edge(a, b) {
                outer.push([a, b]);
            } else {
                cut.push([a, b]);
            }
        }
    }
    (outer, cut)
}

/// Weights of the terms making up one discrete form.
#[derive(Debug, Clone, Copy)]
struct FormWeights {
    /// Multiplies the nu-weighted mass matrix.
    mass: f64,
    /// Multiplies the edge mass on edges of the outer boundary.
    outer: C64,
    /// Multiplies the edge mass on edges cutting the interior.
    cut: C64,
}

fn assemble_form(mesh: &Mesh, medium: &MediumField, elems: &[usize], dofs: &DofMap, w: FormWeights) -> SpMat {
    let mut trip = Vec::with_capacity(9 * elems.len() + 4 * dofs.len());
    for &e in elems {
        let el = mesh.elements[e];
        let p = mesh.element_coords(e);
        let k = p1_stiffness(p);
        let m = p1_mass(p);
        let (mu, nu) = (medium.mu[e], medium.nu[e]);
        let loc = el.map(|g| dofs.local(g).expect("element node outside dof map"));
        for i in 0..3 {
            for j in 0..3 {
                let v = mu * k[i][j] + w.mass * nu * m[i][j];
                trip.push(Triplet::new(loc[i], loc[j], C64::new(v, 0.0)));
            }
        }
    }
    let (outer, cut) = element_set_boundary(mesh, elems);
    for (edges, coef) in [(&outer, w.outer), (&cut, w.cut)] {
        if coef == ZERO {
            continue;
        }
        for &[a, b] in edges {
            let em = edge_mass(mesh.edge_length(a, b));
            let loc = [dofs.local(a).unwrap(), dofs.local(b).unwrap()];
            for i in 0..2 {
                for j in 0..2 {
                    trip.push(Triplet::new(loc[i], loc[j], coef * em[i][j]));
                }
            }
        }
    }
    from_triplets(dofs.len(), dofs.len(), &trip)
}

/// Nodes touched by an element set.
pub fn element_set_dofs(mesh: &Mesh, elems: &[usize]) -> DofMap {
    DofMap::new(mesh.num_nodes(), elems.iter().flat_map(|&e| mesh.elements[e]).collect())
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        config(format!("omega must be positive, got {omega}"))
    }
}

/// `A = S_mu - omega^2 M_nu - i omega B_outer` over the whole mesh, and the load vector.
pub fn assemble_global(mesh: &Mesh, medium: &MediumField, omega: f64) -> Result<GlobalSystem> {
    check_omega(omega)?;
    medium.validate(mesh)?;
    let elems: Vec<usize> = (0..mesh.num_elements()).collect();
    let dofs = DofMap::identity(mesh.num_nodes());
    let a = assemble_form(mesh, medium, &elems, &dofs, helmholtz_weights(omega, false));
    let b = assemble_rhs(mesh, medium);
    Ok(GlobalSystem { a, b, omega })
}

fn helmholtz_weights(omega: f64, impedance_on_cut: bool) -> FormWeights {
    let robin = C64::new(0.0, -omega);
    FormWeights { mass: -omega * omega, outer: robin, cut: if impedance_on_cut { robin } else { ZERO } }
}

/// Load vector: Gaussian volume source by edge-midpoint quadrature plus the
/// boundary datum, constant per edge.
pub fn assemble_rhs(mesh: &Mesh, medium: &MediumField) -> Vec<C64> {
    let elems: Vec<usize> = (0..mesh.num_elements()).collect();
    assemble_local_rhs(mesh, medium, &elems, &DofMap::identity(mesh.num_nodes()))
}

/// Load vector restricted to a sorted element set, indexed by `dofs`.
pub fn assemble_local_rhs(mesh: &Mesh, medium: &MediumField, elems: &[usize], dofs: &DofMap) -> Vec<C64> {
    let mut b = vec![ZERO; dofs.len()];
    let loc = |g: usize| dofs.local(g).expect("element node outside dof map");
    if medium.source.amplitude != ZERO {
        for &e in elems {
            let el = mesh.elements[e];
            let p = mesh.element_coords(e);
            let w = mesh.element_area(e) / 3.0;
            for k in 0..3 {
                let (i, j) = (k, (k + 1) % 3);
                let mid = [0.5 * (p[i][0] + p[j][0]), 0.5 * (p[i][1] + p[j][1])];
                let f = medium.source.eval(mid) * (0.5 * w);
                b[loc(el[i])] += f;
                b[loc(el[j])] += f;
            }
        }
    }
    for (be, &g) in mesh.boundary_edges.iter().zip(&medium.g) {
        if g == ZERO || elems.binary_search(&be.elem).is_err() {
            continue;
        }
        let [a, c] = mesh.edge_nodes(*be);
        let half = 0.5 * mesh.edge_length(a, c);
        b[loc(a)] += g * half;
        b[loc(c)] += g * half;
    }
    b
}

/// Energy matrix over `elems`; no boundary terms.
pub fn assemble_energy(mesh: &Mesh, medium: &MediumField, omega: f64, elems: &[usize]) -> Result<EnergyMatrix> {
    check_omega(omega)?;
    if elems.is_empty() {
        return config("energy matrix needs a nonempty element set");
    }
    let dofs = element_set_dofs(mesh, elems);
    let w = FormWeights { mass: omega * omega, outer: ZERO, cut: ZERO };
    let mat = assemble_form(mesh, medium, elems, &dofs, w);
    Ok(EnergyMatrix { mat, dofs })
}

/// Local impedance matrix `B_j`: the Helmholtz form on `Omega_j` with the
/// first-order absorbing term on all of its boundary.
pub fn assemble_local_impedance(mesh: &Mesh, medium: &MediumField, omega: f64, sub: &Subdomain) -> Result<SpMat> {
    check_omega(omega)?;
    if sub.elems.is_empty() {
        return config(format!("subdomain {} has no elements", sub.id));
    }
    Ok(assemble_form(mesh, medium, &sub.elems, &sub.dofs, helmholtz_weights(omega, true)))
}

/// Local Neumann-type matrix: the Helmholtz form on an element set with the
/// absorbing term only where the set touches the outer boundary.
pub fn assemble_local_neumann(
    mesh: &Mesh,
    medium: &MediumField,
    omega: f64,
    elems: &[usize],
    dofs: &DofMap,
) -> Result<SpMat> {
    check_omega(omega)?;
    if elems.is_empty() {
        return config("Neumann matrix needs a nonempty element set");
    }
    Ok(assemble_form(mesh, medium, elems, dofs, helmholtz_weights(omega, false)))
}

/// Writes `row col re im`, 1-based, sorted row-major.
pub fn write_coo<W: Write>(a: &SpMat, mut out: W) -> std::io::Result<()> {
    let col_ptr = a.symbolic().col_ptr();
    let row_idx = a.symbolic().row_idx();
    let val = a.val();
    let mut entries = Vec::with_capacity(val.len());
    for j in 0..a.ncols() {
        for p in col_ptr[j]..col_ptr[j + 1] {
            entries.push((row_idx[p], j, val[p]));
        }
    }
    entries.sort_by_key(|&(i, j, _)| (i, j));
    for (i, j, v) in entries {
        writeln!(out, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re, v.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, random_vec, spmv, to_dense};
    use crate::medium::{builtin_medium, BuiltinMedium};
    use crate::mesh::{build_grid, Bounds};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(n: usize) -> (Mesh, MediumField) {
        let mesh = build_grid(n, n, Bounds::UNIT).unwrap();
        let med = builtin_medium(BuiltinMedium::Constant, &mesh).unwrap();
        (mesh, med)
    }

    #[test]
    fn global_matrix_is_complex_symmetric() {
        let (mesh, med) = unit(1);
        let sys = assemble_global(&mesh, &med, 1.0).unwrap();
        let d = to_dense(&sys.a);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d[(i, j)], d[(j, i)]);
            }
        }
        // S - M - iB on the unit cell: the imaginary part is the boundary mass
        let im_diag: f64 = (0..4).map(|i| d[(i, i)].im).sum();
        assert!((im_diag + 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let mesh = build_grid(2, 2, Bounds::UNIT).unwrap();
        for e in 0..mesh.num_elements() {
            let k = p1_stiffness(mesh.element_coords(e));
            for row in k {
                assert!(row.iter().sum::<f64>().abs() < 1e-13);
            }
        }
    }

    #[test]
    fn boundary_term_is_dissipative() {
        let mesh = build_grid(5, 4, Bounds::UNIT).unwrap();
        let med = builtin_medium(BuiltinMedium::Layers { bands: 3, contrast: 3.0 }, &mesh).unwrap();
        let sys = assemble_global(&mesh, &med, 7.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = random_vec(&mut rng, sys.n());
            assert!(dot(&x, &spmv(&sys.a, &x)).im <= 0.0);
        }
    }

    #[test]
    fn zero_data_gives_zero_rhs() {
        let (mesh, med) = unit(3);
        let mut src = med.source;
        src.amplitude = ZERO;
        let med = med.with_source(src);
        assert!(assemble_rhs(&mesh, &med).iter().all(|v| *v == ZERO));
    }

    #[test]
    fn unit_boundary_datum_integrates_to_perimeter() {
        let mesh = build_grid(3, 5, Bounds::new(0.0, 2.0, 0.0, 1.5)).unwrap();
        let med = builtin_medium(BuiltinMedium::Constant, &mesh).unwrap();
        let mut src = med.source;
        src.amplitude = ZERO;
        let med = med.with_source(src).with_boundary_datum(C64::new(1.0, 0.0));
        let total: C64 = assemble_rhs(&mesh, &med).iter().sum();
        assert!((total.re - 7.0).abs() < 1e-12 && total.im == 0.0);
    }

    #[test]
    fn energy_on_one_triangle_has_three_dofs() {
        let (mesh, med) = unit(2);
        let em = assemble_energy(&mesh, &med, 1.0, &[3]).unwrap();
        assert_eq!(em.dofs.len(), 3);
        assert!(assemble_energy(&mesh, &med, 1.0, &[]).is_err());
    }

    #[test]
    fn energy_matrix_is_positive_definite() {
        let (mesh, med) = unit(3);
        let elems: Vec<usize> = (0..mesh.num_elements()).collect();
        let em = assemble_energy(&mesh, &med, 1.0, &elems).unwrap();
        let d = to_dense(&em.mat);
        let vals = d.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!(vals[0] > 0.0);
    }

    #[test]
    fn coo_dump_is_sorted_and_one_based() {
        let (mesh, med) = unit(1);
        let sys = assemble_global(&mesh, &med, 1.0).unwrap();
        let mut buf = Vec::new();
        write_coo(&sys.a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let keys: Vec<(usize, usize)> = text
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                (f[0].parse().unwrap(), f[1].parse().unwrap())
            })
            .collect();
        assert_eq!(keys.first(), Some(&(1, 1)));
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(keys.len(), 14); // 4 diagonal + 2 * 5 edges
    }
}
