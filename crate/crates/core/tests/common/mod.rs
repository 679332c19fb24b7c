#![allow(dead_code)]

use moi_core::linalg::{ComplexMatrix, EigenDecomposition, C64};
use moi_core::moi::GridKernel;

/// Rank-one spectral projection onto eigenvector `i`.
pub fn projection(e: &EigenDecomposition, i: usize) -> ComplexMatrix {
    let d = e.dim();
    ComplexMatrix::from_fn(d, d, |r, c| e.unitary[(r, i)] * e.unitary[(c, i)].conj())
}

/// `Σ φ(λ_{i_0}, …, λ_{i_n}) P^1_{i_0} X_1 P^2_{i_1} ⋯ X_n P^{n+1}_{i_n}`,
/// summed over every index tuple with explicit projections.
pub fn brute_force_moi(grid: &GridKernel, spectra: &[&EigenDecomposition], operands: &[ComplexMatrix]) -> ComplexMatrix {
    let d = spectra[0].dim();
    let n = operands.len();
    let projections: Vec<Vec<ComplexMatrix>> = spectra.iter().map(|e| (0..d).map(|i| projection(e, i)).collect()).collect();
    let mut total = ComplexMatrix::zeros(d, d);
    let count = d.pow((n + 1) as u32);
    for flat in 0..count {
        let mut idx = vec![0usize; n + 1];
        let mut rest = flat;
        for slot in (0..=n).rev() {
            idx[slot] = rest % d;
            rest /= d;
        }
        let mut term = projections[0][idx[0]].clone();
        for k in 0..n {
            term = &(&term * &operands[k]) * &projections[k + 1][idx[k + 1]];
        }
        total = &total + &term.scale(grid.get(&idx));
    }
    total
}

pub fn rel_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).frobenius_norm() / (1.0 + a.frobenius_norm().max(b.frobenius_norm()))
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
