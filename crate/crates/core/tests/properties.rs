mod common;

use common::{brute_force_moi, rel_diff};
use moi_core::ddiff::{divided_difference, NodeList};
use moi_core::funcmodel::{factorial, FunctionModel};
use moi_core::linalg::{schatten_norm, ComplexMatrix, EigenDecomposition, HermitianMatrix, SchattenIndex, C64};
use moi_core::moi::{moi_apply, moi_compose_check, moi_insert_check, moi_split_check, GridKernel, MoiKernel};
use moi_core::perturb::{perturbation_formula_residual, taylor_remainder, PerturbationPath};
use moi_core::rng::{random_complex, random_gue, random_hermitian_with_norm, SplitMix64};
use proptest::prelude::*;

fn spectra(rng: &mut SplitMix64, count: usize, d: usize) -> Vec<EigenDecomposition> {
    (0..count).map(|_| random_gue(rng, d).eigh().unwrap()).collect()
}

fn grid(rng: &mut SplitMix64, order: usize, d: usize) -> GridKernel {
    GridKernel::from_fn(vec![d; order + 1], |_| rng.complex_normal())
}

fn real_grid(rng: &mut SplitMix64, order: usize, d: usize) -> GridKernel {
    GridKernel::from_fn(vec![d; order + 1], |_| C64::new(rng.normal(), 0.0))
}

fn builtin(which: usize) -> FunctionModel {
    match which % 6 {
        0 => FunctionModel::exp(1.0),
        1 => FunctionModel::sin(1.3),
        2 => FunctionModel::cos(0.7),
        3 => FunctionModel::inv_quad(),
        4 => FunctionModel::sqrt_eps(1.0).unwrap(),
        _ => FunctionModel::polynomial(vec![1.0, -1.0, 0.5, 2.0, -0.3, 0.1]),
    }
}

fn p_index(raw: f64) -> SchattenIndex {
    SchattenIndex::new(raw).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigh_reconstructs_and_is_unitary(seed in any::<u64>(), d in 1usize..=32) {
        let h = random_gue(&mut SplitMix64::new(seed), d);
        let e = h.eigh().unwrap();
        let recon = (&e.reconstruct() - h.as_matrix()).frobenius_norm();
        prop_assert!(recon <= 1e-11 * (1.0 + h.as_matrix().frobenius_norm()));
        let gram = &(&e.unitary.adjoint() * &e.unitary) - &ComplexMatrix::identity(d);
        prop_assert!(gram.frobenius_norm() <= 1e-12 * d as f64);
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn schatten_norms_decrease_in_p(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6, p in 1.0f64..6.0, dq in 0.0f64..4.0) {
        let x = random_complex(&mut SplitMix64::new(seed), rows, cols);
        let np = schatten_norm(&x, p_index(p)).unwrap();
        let nq = schatten_norm(&x, p_index(p + dq)).unwrap();
        let ninf = schatten_norm(&x, SchattenIndex::Infinity).unwrap();
        prop_assert!(nq <= np * (1.0 + 1e-12));
        prop_assert!(ninf <= nq * (1.0 + 1e-12));
    }

    #[test]
    fn schatten_triangle_inequality(seed in any::<u64>(), d in 1usize..6, p in 1.0f64..6.0) {
        let mut rng = SplitMix64::new(seed);
        let x = random_complex(&mut rng, d, d);
        let y = random_complex(&mut rng, d, d);
        let p = p_index(p);
        let lhs = schatten_norm(&(&x + &y), p).unwrap();
        let rhs = schatten_norm(&x, p).unwrap() + schatten_norm(&y, p).unwrap();
        prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn schatten_holder_at_double_exponent(seed in any::<u64>(), d in 1usize..6, p in 1.0f64..4.0) {
        let mut rng = SplitMix64::new(seed);
        let x = random_complex(&mut rng, d, d);
        let y = random_complex(&mut rng, d, d);
        let p = p_index(p);
        let lhs = schatten_norm(&(&x * &y), p).unwrap();
        let rhs = schatten_norm(&x, p.times(2)).unwrap() * schatten_norm(&y, p.times(2)).unwrap();
        prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn schatten_norm_is_unitarily_invariant(seed in any::<u64>(), d in 1usize..6, p in 1.0f64..5.0) {
        let mut rng = SplitMix64::new(seed);
        let x = random_complex(&mut rng, d, d);
        let u = random_gue(&mut rng, d).eigh().unwrap().unitary;
        let p = p_index(p);
        let a = schatten_norm(&x, p).unwrap();
        let b = schatten_norm(&(&(&u * &x) * &u.adjoint()), p).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn divided_differences_are_symmetric(seed in any::<u64>(), which in 0usize..6, n in 0usize..=4) {
        let mut rng = SplitMix64::new(seed);
        let f = builtin(which);
        let xs: Vec<f64> = loop {
            let xs: Vec<f64> = (0..=n).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
            let mut s = xs.clone();
            s.sort_by(f64::total_cmp);
            if s.windows(2).all(|w| w[1] - w[0] >= 1e-3) {
                break xs;
            }
        };
        let base = divided_difference(&f, &NodeList::new(xs.clone()).unwrap()).unwrap();
        for _ in 0..20 {
            let mut perm = xs.clone();
            rng.shuffle(&mut perm);
            let v = divided_difference(&f, &NodeList::new(perm).unwrap()).unwrap();
            prop_assert!((v - base).abs() <= 1e-9 * (1.0 + base.abs()));
        }
    }

    #[test]
    fn coincident_nodes_give_scaled_derivative(which in 0usize..6, n in 0usize..=4, x in -3.0f64..3.0) {
        let f = builtin(which);
        let v = divided_difference(&f, &NodeList::new(vec![x; n + 1]).unwrap()).unwrap();
        let want = f.eval_deriv(n, x).unwrap() / factorial(n);
        prop_assert!((v - want).abs() <= 1e-10 * (1.0 + want.abs()));
    }

    #[test]
    fn moi_matches_brute_force_sum(seed in any::<u64>(), d in 1usize..=3, n in 0usize..=3) {
        let mut rng = SplitMix64::new(seed);
        let es = spectra(&mut rng, n + 1, d);
        let sp: Vec<&EigenDecomposition> = es.iter().collect();
        let ops: Vec<ComplexMatrix> = (0..n).map(|_| random_complex(&mut rng, d, d)).collect();
        let g = grid(&mut rng, n, d);
        let fast = moi_apply(&MoiKernel::Grid(g.clone()), &sp, &ops).unwrap();
        let slow = brute_force_moi(&g, &sp, &ops);
        prop_assert!(rel_diff(&fast, &slow) <= 1e-12);
    }

    #[test]
    fn moi_is_linear_in_kernel_and_operands(seed in any::<u64>(), d in 1usize..=4, n in 1usize..=3, s in 0.0f64..1.0) {
        let mut rng = SplitMix64::new(seed);
        let es = spectra(&mut rng, n + 1, d);
        let sp: Vec<&EigenDecomposition> = es.iter().collect();
        let ops: Vec<ComplexMatrix> = (0..n).map(|_| random_complex(&mut rng, d, d)).collect();
        let (g1, g2) = (grid(&mut rng, n, d), grid(&mut rng, n, d));
        let mixed = GridKernel::from_fn(vec![d; n + 1], |i| g1.get(i) * s + g2.get(i) * (1.0 - s));
        let lhs = moi_apply(&MoiKernel::Grid(mixed), &sp, &ops).unwrap();
        let rhs = &moi_apply(&MoiKernel::Grid(g1.clone()), &sp, &ops).unwrap().scale_real(s)
            + &moi_apply(&MoiKernel::Grid(g2), &sp, &ops).unwrap().scale_real(1.0 - s);
        prop_assert!(rel_diff(&lhs, &rhs) <= 1e-12);

        let slot = rng.below(n);
        let y = random_complex(&mut rng, d, d);
        let mut with_y = ops.clone();
        with_y[slot] = y.clone();
        let mut combo = ops.clone();
        combo[slot] = &ops[slot].scale_real(s) + &y.scale_real(1.0 - s);
        let k = MoiKernel::Grid(g1);
        let lhs = moi_apply(&k, &sp, &combo).unwrap();
        let rhs = &moi_apply(&k, &sp, &ops).unwrap().scale_real(s) + &moi_apply(&k, &sp, &with_y).unwrap().scale_real(1.0 - s);
        prop_assert!(rel_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn first_order_schur_multiplier_is_bounded(seed in any::<u64>(), d in 1usize..=6) {
        let mut rng = SplitMix64::new(seed);
        let es = spectra(&mut rng, 2, d);
        let x = random_complex(&mut rng, d, d);
        let g = grid(&mut rng, 1, d);
        let y = moi_apply(&MoiKernel::Grid(g.clone()), &[&es[0], &es[1]], std::slice::from_ref(&x)).unwrap();
        prop_assert!(y.frobenius_norm() <= g.max_abs() * x.frobenius_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn tensor_kernel_equals_its_materialized_grid(seed in any::<u64>(), d in 1usize..=4, n in 0usize..=3) {
        let mut rng = SplitMix64::new(seed);
        let es = spectra(&mut rng, n + 1, d);
        let sp: Vec<&EigenDecomposition> = es.iter().collect();
        let ops: Vec<ComplexMatrix> = (0..n).map(|_| random_complex(&mut rng, d, d)).collect();
        let factors: Vec<Vec<C64>> = (0..=n).map(|_| (0..d).map(|_| rng.complex_normal()).collect()).collect();
        let tensor = MoiKernel::TensorProduct(factors);
        let grid = MoiKernel::Grid(tensor.materialize(&sp).unwrap());
        prop_assert_eq!(moi_apply(&tensor, &sp, &ops).unwrap(), moi_apply(&grid, &sp, &ops).unwrap());
    }

    #[test]
    fn adjoint_reverses_real_kernels(seed in any::<u64>(), d in 1usize..=4, n in 1usize..=3) {
        let mut rng = SplitMix64::new(seed);
        let e = random_gue(&mut rng, d).eigh().unwrap();
        let sp = vec![&e; n + 1];
        let ops: Vec<ComplexMatrix> = (0..n).map(|_| random_gue(&mut rng, d).into_matrix()).collect();
        let g = real_grid(&mut rng, n, d);
        let reversed = GridKernel::from_fn(vec![d; n + 1], |i| {
            let r: Vec<usize> = i.iter().rev().copied().collect();
            g.get(&r)
        });
        let rev_ops: Vec<ComplexMatrix> = ops.iter().rev().cloned().collect();
        let lhs = moi_apply(&MoiKernel::Grid(g), &sp, &ops).unwrap().adjoint();
        let rhs = moi_apply(&MoiKernel::Grid(reversed), &sp, &rev_ops).unwrap();
        prop_assert!(rel_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn kernel_algebra_identities(seed in any::<u64>(), d in 1usize..=4, m in 2usize..=4) {
        let mut rng = SplitMix64::new(seed);
        let es = spectra(&mut rng, m, d);
        let sp: Vec<&EigenDecomposition> = es.iter().collect();
        let ops: Vec<ComplexMatrix> = (0..m - 1).map(|_| random_complex(&mut rng, d, d)).collect();
        let phi = MoiKernel::Grid(grid(&mut rng, m - 1, d));
        let inner = MoiKernel::Grid(grid(&mut rng, 1, d));
        for j in 1..m {
            prop_assert!(moi_compose_check(&phi, &inner, j, &sp, &ops).unwrap().rel_err() <= 1e-10);
        }
        for j in 2..m {
            let left = MoiKernel::Grid(grid(&mut rng, j - 1, d));
            let right = MoiKernel::Grid(grid(&mut rng, m - j, d));
            prop_assert!(moi_split_check(&left, &right, j, &sp, &ops).unwrap().rel_err() <= 1e-10);
        }
        let reduced = MoiKernel::Grid(grid(&mut rng, m - 2, d));
        for j in 1..=m {
            prop_assert!(moi_insert_check(&reduced, j, &sp, &ops).unwrap().rel_err() <= 1e-10);
        }
    }

    #[test]
    fn perturbation_formula_holds(seed in any::<u64>(), which in 0usize..6, d in 1usize..=4, n in 1usize..=3) {
        let mut rng = SplitMix64::new(seed);
        let f = builtin(which);
        let a = random_hermitian_with_norm(&mut rng, d, SchattenIndex::Infinity, 2.0);
        let b = random_hermitian_with_norm(&mut rng, d, SchattenIndex::Infinity, 2.0);
        let bg: Vec<HermitianMatrix> = (0..n - 1).map(|_| random_hermitian_with_norm(&mut rng, d, SchattenIndex::Infinity, 2.0)).collect();
        let ks: Vec<ComplexMatrix> = (0..n - 1).map(|_| random_complex(&mut rng, d, d)).collect();
        for j in 1..=n {
            let r = perturbation_formula_residual(&bg, &a, &b, &f, n, j, &ks, SchattenIndex::Finite(2.0)).unwrap();
            prop_assert!(r.rel_err() <= 1e-9, "j={} {:?}", j, r);
        }
    }

    #[test]
    fn taylor_remainder_two_ways(seed in any::<u64>(), which in 0usize..6, d in 1usize..=4, n in 1usize..=3) {
        let mut rng = SplitMix64::new(seed);
        let a = random_hermitian_with_norm(&mut rng, d, SchattenIndex::Infinity, 2.0);
        let k = random_hermitian_with_norm(&mut rng, d, SchattenIndex::Finite(2.0), 1.0);
        let path = PerturbationPath::new(a, k, builtin(which)).unwrap();
        let r = taylor_remainder(&path, n, SchattenIndex::Finite(2.0)).unwrap();
        prop_assert!(r.residual.rel_err() <= 1e-9, "{:?}", r.residual);
    }
}
