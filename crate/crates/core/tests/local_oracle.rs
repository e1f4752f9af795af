mod common;

use common::*;
use helmdd_core::linalg::to_dense;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn rj_matches_dense_formula() {
    let (_, _, setup) = small_desk(None);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for ls in &setup.schwarz.solvers {
        let s = &ls.sub;
        let b = dense(&ls.b_mat);
        let a_ext = dense(&ls.a_ext);
        let v = random_vec(&mut rng, s.n_ext());
        // B I v - I A~ v, with I picking the Omega_j rows of Omega~_j
        let pos: Vec<usize> = s.dofs.dofs.iter().map(|&g| s.dofs_ext.local(g).unwrap()).collect();
        let iv: Vec<_> = pos.iter().map(|&p| v[p]).collect();
        let av = matvec(&a_ext, &v);
        let rhs: Vec<_> = matvec(&b, &iv).iter().zip(&pos).map(|(x, &p)| x - av[p]).collect();
        let w = dense_solve(&b, &rhs);
        let got = ls.apply_rj(&v);
        assert!(diff_norm(&got, &w) < 1e-10 * norm(&w));
    }
}

#[test]
fn local_matrices_are_well_conditioned_enough() {
    let (_, _, setup) = small_desk(None);
    for ls in &setup.schwarz.solvers {
        let s = to_dense(&ls.b_mat).singular_values().unwrap();
        let (max, min) = (s[0], *s.last().unwrap());
        assert!(min > 0.0 && (max / min).is_finite() && max / min < 1e8);
    }
}
