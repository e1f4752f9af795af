mod common;

use common::*;
use helmdd_core::assembly::{
    assemble_energy, assemble_global, assemble_local_impedance, assemble_local_neumann, assemble_rhs,
};
use helmdd_core::decomposition::partition;
use helmdd_core::medium::GaussianSource;
use helmdd_core::mesh::build_grid;
use helmdd_core::{Bounds, C64};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[test]
fn global_matrix_matches_dense_assembly() {
    let (mesh, med) = layered(2, 2, Bounds::UNIT);
    let sys = assemble_global(&mesh, &med, TWO_PI).unwrap();
    let dofs: Vec<usize> = (0..mesh.num_nodes()).collect();
    let oracle = oracle_form(&mesh, &med, &all_elements(&mesh), &dofs, -TWO_PI * TWO_PI, C64::new(0.0, -TWO_PI), C64::new(0.0, 0.0));
    assert!(max_diff(&dense(&sys.a), &oracle) < 1e-12 * max_entry(&oracle));
}

#[test]
fn energy_matrix_matches_dense_assembly() {
    let (mesh, med) = layered(2, 2, Bounds::UNIT);
    let c = assemble_energy(&mesh, &med, TWO_PI, &all_elements(&mesh)).unwrap();
    let dofs: Vec<usize> = (0..mesh.num_nodes()).collect();
    let zero = C64::new(0.0, 0.0);
    let oracle = oracle_form(&mesh, &med, &all_elements(&mesh), &dofs, TWO_PI * TWO_PI, zero, zero);
    assert!(max_diff(&dense(&c.mat), &oracle) < 1e-12 * max_entry(&oracle));
}

#[test]
fn impedance_matrix_adds_edge_mass_on_cut_edges_only() {
    let omega = 3.0;
    let (mesh, med) = layered(4, 2, Bounds::UNIT);
    let p = partition(&mesh, 2, 1, 1, 1).unwrap();
    let robin = C64::new(0.0, -omega);
    for s in &p.subdomains {
        let b = dense(&assemble_local_impedance(&mesh, &med, omega, s).unwrap());
        let neumann = dense(&assemble_local_neumann(&mesh, &med, omega, &s.elems, &s.dofs).unwrap());
        let oracle = oracle_form(&mesh, &med, &s.elems, &s.dofs.dofs, -omega * omega, robin, robin);
        assert!(max_diff(&b, &oracle) < 1e-12 * max_entry(&oracle));
        let (_, cut) = set_boundary(&mesh, &s.elems);
        assert!(!cut.is_empty());
        let on_cut = |g: usize| cut.iter().any(|e| e.contains(&g));
        for (l, row) in b.iter().enumerate() {
            for (k, x) in row.iter().enumerate() {
                let d = (x - neumann[l][k]).norm();
                if !(on_cut(s.dofs.dofs[l]) && on_cut(s.dofs.dofs[k])) {
                    assert_eq!(d, 0.0);
                }
            }
        }
    }
}

#[test]
fn oversampled_neumann_matrix_matches_dense_assembly() {
    // small omega with strong mass: the mass term dominates the stiffness
    let omega = 20.0;
    let (mesh, med) = layered(4, 2, Bounds::UNIT);
    let p = partition(&mesh, 4, 1, 1, 1).unwrap();
    let robin = C64::new(0.0, -omega);
    for s in &p.subdomains {
        let a = dense(&assemble_local_neumann(&mesh, &med, omega, &s.elems_ext, &s.dofs_ext).unwrap());
        let oracle = oracle_form(&mesh, &med, &s.elems_ext, &s.dofs_ext.dofs, -omega * omega, robin, C64::new(0.0, 0.0));
        assert!(max_diff(&a, &oracle) < 1e-12 * max_entry(&oracle));
    }
}

#[test]
fn gaussian_load_integrates_the_source() {
    let mesh = build_grid(32, 32, Bounds::UNIT).unwrap();
    let src = GaussianSource { center: [0.5, 0.5], width: 0.05, amplitude: C64::new(1.0, 0.0) };
    let med = helmdd_core::medium::builtin_medium(helmdd_core::BuiltinMedium::Constant, &mesh).unwrap().with_source(src);
    let total: C64 = assemble_rhs(&mesh, &med).iter().sum();
    // midpoint rule on a fine grid
    let n = 1000;
    let h = 1.0 / n as f64;
    let mut fine = 0.0;
    for i in 0..n {
        for j in 0..n {
            fine += src.eval([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]).re * h * h;
        }
    }
    assert!((total.re - fine).abs() < 0.05 * fine, "{} vs {}", total.re, fine);
    assert!(total.im.abs() < 1e-14);
}
