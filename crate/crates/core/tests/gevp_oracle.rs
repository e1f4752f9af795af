mod common;

use common::*;
use helmdd_core::analysis::spectral_tail_check;
use helmdd_core::gevp::{solve_gevp, verify_saddlepoint};
use helmdd_core::linalg::{to_dense, C64};
use helmdd_core::FilterStrategy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn eigenvectors_are_orthonormal_in_the_extended_energy() {
    let (_, _, setup) = small_desk(None);
    for ((ls, cl), ce) in setup.schwarz.solvers.iter().zip(&setup.energy_local).zip(&setup.energy_ext) {
        let eb = solve_gevp(ls, cl, ce).unwrap();
        assert!(eb.eigenvalues.iter().all(|&l| l >= 0.0));
        assert!(eb.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let c = to_dense(&ce.mat);
        let v = &eb.eigenvectors;
        let gram = v.adjoint() * &c * v;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - C64::new(expect, 0.0)).norm() < 1e-10);
            }
        }
    }
}

/// Power iteration on `C~^{-1} K^H C K` in the `C~` inner product.
fn power_iteration(k: &Dense, c: &Dense, ct: &Dense, iters: usize) -> f64 {
    let n = ct.len();
    let mut x: Vec<C64> = (0..n).map(|i| C64::new(1.0 + (i % 7) as f64, (i % 3) as f64)).collect();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let y = matvec(k, &x);
        let cy = matvec(c, &y);
        // K^H C K x
        let kh: Vec<C64> = (0..n).map(|j| (0..k.len()).map(|i| k[i][j].conj() * cy[i]).sum()).collect();
        let z = dense_solve(ct, &kh);
        let zn = quad(ct, &z).sqrt();
        lambda = quad(c, &matvec(k, &z)) / quad(ct, &z);
        x = z.iter().map(|v| v / zn).collect();
    }
    lambda
}

#[test]
fn top_eigenvalue_matches_power_iteration() {
    let (_, _, setup) = small_desk(None);
    for ((ls, cl), ce) in setup.schwarz.solvers.iter().zip(&setup.energy_local).zip(&setup.energy_ext) {
        let eb = solve_gevp(ls, cl, ce).unwrap();
        let kd = ls.kj_dense();
        let k: Dense = (0..kd.nrows()).map(|i| (0..kd.ncols()).map(|j| kd[(i, j)]).collect()).collect();
        let lam = power_iteration(&k, &dense(&cl.mat), &dense(&ce.mat), 3000);
        assert!((lam - eb.xi()).abs() <= 1e-8 * eb.xi(), "{lam} vs {}", eb.xi());
    }
}

#[test]
fn eigenpairs_satisfy_the_saddle_point_system() {
    let (_, _, setup) = small_desk(None);
    for ((ls, cl), ce) in setup.schwarz.solvers.iter().zip(&setup.energy_local).zip(&setup.energy_ext) {
        let eb = solve_gevp(ls, cl, ce).unwrap();
        for k in 0..eb.eigenvalues.len() {
            let r = verify_saddlepoint(ls, cl, ce, &eb, k).unwrap();
            assert!(r.iter().all(|&x| x <= 1e-8), "pair {k}: {r:?}");
        }
    }
}

#[test]
fn spectrum_decays() {
    let (_, _, setup) = small_desk(None);
    for ((ls, cl), ce) in setup.schwarz.solvers.iter().zip(&setup.energy_local).zip(&setup.energy_ext) {
        let eb = solve_gevp(ls, cl, ce).unwrap();
        let l = &eb.eigenvalues;
        assert!(l[4] < l[0]);
        // the operator has rank at most the number of non-interface nodes
        assert!(l[l.len() - 1] < 1e-6);
        assert!(l.iter().filter(|&&x| x > 1e-6 * l[0]).count() < l.len());
    }
}

#[test]
fn excluded_modes_obey_the_tail_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for strategy in [FilterStrategy::Count(3), FilterStrategy::Percent(25.0)] {
        let (_, _, setup) = small_desk(Some(strategy));
        for (((ls, eb), cl), ce) in
            setup.schwarz.solvers.iter().zip(&setup.bundles).zip(&setup.energy_local).zip(&setup.energy_ext)
        {
            let t = spectral_tail_check(ls, eb, cl, ce, 200, &mut rng);
            assert!(t.passed, "{t:?}");
            assert!(t.max_ratio <= eb.tau_eff * (1.0 + 1e-8) + 1e-14);
        }
    }
}
