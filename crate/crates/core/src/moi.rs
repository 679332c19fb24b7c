//! Multiple operator integrals at finite dimension.
//!
//! For Hermitian `A_1, …, A_{n+1}` with eigendata `(λ^(k), U_k)` and
//! operands `X_1, …, X_n`, the integral of a kernel `φ` is the eigenbasis
//! contraction
//!
//! ```text
//! Γ(φ)(X_1, …, X_n) = U_1 · Y · U_{n+1}*,
//! Y[i_0, i_n] = Σ_{i_1..i_{n-1}} φ(λ^(1)_{i_0}, …, λ^(n+1)_{i_n}) Ỹ_1[i_0,i_1] ⋯ Ỹ_n[i_{n-1},i_n],
//! Ỹ_k = U_k* X_k U_{k+1}.
//! ```
//!
//! On tensor-product kernels this is the chain `f_1(A_1) X_1 f_2(A_2) ⋯`, and
//! it is linear in `φ`, so it is the integral itself rather than an
//! approximation of it.

use std::collections::HashMap;

use crate::ddiff::{divided_difference, NodeList};
use crate::error::{Error, Result};
use crate::funcmodel::{factorial, FunctionModel};
use crate::linalg::{mat_func_deriv, ComplexMatrix, EigenDecomposition, HermitianMatrix, C64, ONE, ZERO};
use crate::residual::Residual;

/// Dense kernel values on eigen-index tuples, first index slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridKernel {
    dims: Vec<usize>,
    values: Vec<C64>,
}

impl GridKernel {
    pub fn new(dims: Vec<usize>, values: Vec<C64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid grid dims {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if values.len() != len {
            return Err(Error::DimMismatch(format!(
                "grid with dims {dims:?} needs {len} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidArgument("grid values must be finite".into()));
        }
        Ok(GridKernel { dims, values })
    }

    /// Builds a grid by evaluating `f` on every multi-index.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        assert!(!dims.is_empty() && !dims.contains(&0));
        let len: usize = dims.iter().product();
        let mut values = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            values.push(f(&idx));
            increment(&mut idx, &dims);
        }
        GridKernel { dims, values }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.values[self.offset(idx)]
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Row-major odometer step over `dims`.
fn increment(idx: &mut [usize], dims: &[usize]) {
    for axis in (0..idx.len()).rev() {
        idx[axis] += 1;
        if idx[axis] < dims[axis] {
            return;
        }
        idx[axis] = 0;
    }
}

/// A symbol `φ` on eigenvalue tuples.
#[derive(Debug, Clone)]
pub enum MoiKernel {
    /// `f^[n]`, evaluated lazily on the eigenvalue tuples.
    DividedDifference { f: FunctionModel, order: usize },
    /// Explicit values on eigen-index tuples.
    Grid(GridKernel),
    /// `g_1 ⊗ ⋯ ⊗ g_{n+1}`, each factor given by its values per eigen-index.
    TensorProduct(Vec<Vec<C64>>),
}

impl MoiKernel {
    pub fn divided_difference(f: FunctionModel, order: usize) -> Self {
        MoiKernel::DividedDifference { f, order }
    }

    pub fn order(&self) -> usize {
        match self {
            MoiKernel::DividedDifference { order, .. } => *order,
            MoiKernel::Grid(g) => g.order(),
            MoiKernel::TensorProduct(factors) => factors.len().saturating_sub(1),
        }
    }

    /// Dense values on the eigen-index grid of `spectra`.
    pub fn materialize(&self, spectra: &[&EigenDecomposition]) -> Result<GridKernel> {
        let dims: Vec<usize> = spectra.iter().map(|e| e.dim()).collect();
        if spectra.len() != self.order() + 1 {
            return Err(Error::DimMismatch(format!(
                "kernel of order {} needs {} spectra, got {}",
                self.order(),
                self.order() + 1,
                spectra.len()
            )));
        }
        match self {
            MoiKernel::Grid(g) => {
                if g.dims != dims {
                    return Err(Error::DimMismatch(format!(
                        "grid dims {:?} do not match spectra dims {dims:?}",
                        g.dims
                    )));
                }
                Ok(g.clone())
            }
            MoiKernel::TensorProduct(factors) => {
                for (k, (fac, &d)) in factors.iter().zip(&dims).enumerate() {
                    if fac.len() != d {
                        return Err(Error::DimMismatch(format!(
                            "tensor factor {k} has {} values, spectrum has {d}",
                            fac.len()
                        )));
                    }
                }
                Ok(GridKernel::from_fn(dims, |idx| {
                    idx.iter()
                        .zip(factors)
                        .fold(ONE, |acc, (&i, fac)| acc * fac[i])
                }))
            }
            MoiKernel::DividedDifference { f, order } => {
                f.check_order(*order)?;
                // f^[n] is symmetric, so tuples are memoized by their sorted bits.
                let mut memo: HashMap<Vec<u64>, f64> = HashMap::new();
                let mut err = None;
                let grid = GridKernel::from_fn(dims, |idx| {
                    if err.is_some() {
                        return ZERO;
                    }
                    let mut tuple: Vec<f64> = idx
                        .iter()
                        .zip(spectra)
                        .map(|(&i, e)| e.eigenvalues[i])
                        .collect();
                    tuple.sort_by(f64::total_cmp);
                    let key: Vec<u64> = tuple.iter().map(|x| x.to_bits()).collect();
                    if let Some(&v) = memo.get(&key) {
                        return C64::new(v, 0.0);
                    }
                    match NodeList::new(tuple).and_then(|xs| divided_difference(f, &xs)) {
                        Ok(v) => {
                            memo.insert(key, v);
                            C64::new(v, 0.0)
                        }
                        Err(e) => {
                            err = Some(e);
                            ZERO
                        }
                    }
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(grid),
                }
            }
        }
    }
}

/// The data of one multiple operator integral evaluation.
#[derive(Debug, Clone, Copy)]
pub struct MoiRequest<'a> {
    pub kernel: &'a MoiKernel,
    pub spectra: &'a [&'a EigenDecomposition],
    pub operands: &'a [ComplexMatrix],
}

impl MoiRequest<'_> {
    pub fn apply(&self) -> Result<ComplexMatrix> {
        moi_apply(self.kernel, self.spectra, self.operands)
    }
}

/// `Γ^{A_1,…,A_{n+1}}(φ)(X_1, …, X_n)`.
pub fn moi_apply(
    kernel: &MoiKernel,
    spectra: &[&EigenDecomposition],
    operands: &[ComplexMatrix],
) -> Result<ComplexMatrix> {
    let n = kernel.order();
    check_shapes(n, spectra, operands)?;
    let grid = kernel.materialize(spectra)?;
    Ok(contract(&grid, spectra, operands))
}

/// Same as [`moi_apply`] for an already materialized grid.
pub fn moi_apply_grid(
    grid: &GridKernel,
    spectra: &[&EigenDecomposition],
    operands: &[ComplexMatrix],
) -> Result<ComplexMatrix> {
    check_shapes(grid.order(), spectra, operands)?;
    let dims: Vec<usize> = spectra.iter().map(|e| e.dim()).collect();
    if grid.dims != dims {
        return Err(Error::DimMismatch(format!(
            "grid dims {:?} do not match spectra dims {dims:?}",
            grid.dims
        )));
    }
    Ok(contract(grid, spectra, operands))
}

fn check_shapes(n: usize, spectra: &[&EigenDecomposition], operands: &[ComplexMatrix]) -> Result<()> {
    if spectra.len() != n + 1 || operands.len() != n {
        return Err(Error::DimMismatch(format!(
            "order {n} needs {} spectra and {n} operands, got {} and {}",
            n + 1,
            spectra.len(),
            operands.len()
        )));
    }
    let d = spectra[0].dim();
    if let Some(e) = spectra.iter().find(|e| e.dim() != d) {
        return Err(Error::DimMismatch(format!(
            "spectra must share one dimension, got {d} and {}",
            e.dim()
        )));
    }
    if let Some(x) = operands.iter().find(|x| x.rows() != d || x.cols() != d) {
        return Err(Error::DimMismatch(format!(
            "operands must be {d}x{d}, got {}x{}",
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

fn contract(grid: &GridKernel, spectra: &[&EigenDecomposition], operands: &[ComplexMatrix]) -> ComplexMatrix {
    let n = operands.len();
    let d = spectra[0].dim();
    let first = &spectra[0].unitary;
    let last = &spectra[n].unitary;

    if n == 0 {
        return spectra[0].apply_values(grid.values());
    }

    let rotated: Vec<ComplexMatrix> = operands
        .iter()
        .enumerate()
        .map(|(k, x)| &(&spectra[k].unitary.adjoint() * x) * &spectra[k + 1].unitary)
        .collect();

    let inner_dims = vec![d; n - 1];
    let inner_count = d.pow((n - 1) as u32);
    let mut y = ComplexMatrix::zeros(d, d);
    let mut full = vec![0usize; n + 1];
    for i0 in 0..d {
        for i_last in 0..d {
            full[0] = i0;
            full[n] = i_last;
            let mut inner = vec![0usize; n - 1];
            let mut acc = ZERO;
            for _ in 0..inner_count {
                full[1..n].copy_from_slice(&inner);
                let mut prod = grid.get(&full);
                for k in 0..n {
                    prod *= rotated[k][(full[k], full[k + 1])];
                }
                acc += prod;
                increment(&mut inner, &inner_dims);
            }
            y[(i0, i_last)] = acc;
        }
    }
    &(first * &y) * &last.adjoint()
}

fn spectra_of(ms: &[HermitianMatrix]) -> Result<Vec<EigenDecomposition>> {
    ms.iter().map(|m| m.eigh()).collect()
}

/// Residual of `Γ^{A,…,A}(f^[n])(Z_1, …, Z_n) = f^(n)(A) Z_1 ⋯ Z_n / n!`
/// for operands commuting with `A`.
pub fn moi_commuting_check(
    f: &FunctionModel,
    n: usize,
    a: &HermitianMatrix,
    zs: &[ComplexMatrix],
) -> Result<Residual> {
    let am = a.as_matrix();
    let a_norm = am.frobenius_norm();
    for (index, z) in zs.iter().enumerate() {
        let norm = am.commutator(z).frobenius_norm();
        if norm > 1e-10 * (1.0 + a_norm * z.frobenius_norm()) {
            return Err(Error::NotCommuting { index, norm });
        }
    }
    let e = a.eigh()?;
    let spectra = vec![&e; n + 1];
    let lhs = moi_apply(&MoiKernel::divided_difference(f.clone(), n), &spectra, zs)?;
    let mut rhs = mat_func_deriv(f, n, &e)?.scale_real(1.0 / factorial(n));
    for z in zs {
        rhs = &rhs * z;
    }
    Ok(Residual::frobenius(&lhs, &rhs))
}

/// Composition with a two-variable kernel in slots `(j, j+1)` (1-based):
/// `Γ(φ_1·φ̃_2)(K_1, …, K_{m−1}) = Γ(φ_1)(K_1, …, Γ^{A_j,A_{j+1}}(φ_2)(K_j), …, K_{m−1})`
/// with `m = spectra.len()` and `φ̃_2(x_1..x_m) = φ_2(x_j, x_{j+1})`.
pub fn moi_compose_check(
    phi1: &MoiKernel,
    phi2: &MoiKernel,
    j: usize,
    spectra: &[&EigenDecomposition],
    operands: &[ComplexMatrix],
) -> Result<Residual> {
    let m = spectra.len();
    if m < 2 || j == 0 || j > m - 1 {
        return Err(Error::InvalidArgument(format!(
            "composition slot j={j} must satisfy 1 <= j <= {}",
            m.saturating_sub(1)
        )));
    }
    if phi2.order() != 1 {
        return Err(Error::InvalidArgument("inner kernel must have order 1".into()));
    }
    check_shapes(m - 1, spectra, operands)?;
    let g1 = phi1.materialize(spectra)?;
    let g2 = phi2.materialize(&spectra[j - 1..=j])?;
    let lifted = GridKernel::from_fn(g1.dims.clone(), |idx| g1.get(idx) * g2.get(&idx[j - 1..=j]));
    let lhs = contract(&lifted, spectra, operands);

    let inner = contract(&g2, &spectra[j - 1..=j], &operands[j - 1..j]);
    let mut ops = operands.to_vec();
    ops[j - 1] = inner;
    let rhs = contract(&g1, spectra, &ops);
    Ok(Residual::frobenius(&lhs, &rhs))
}

/// Splitting at a shared variable `j` (1-based, `2 ≤ j ≤ m−1`):
/// `Γ(φ)(K_1..K_{m−1}) = Γ^{A_1..A_j}(φ_1)(K_1..K_{j−1}) · Γ^{A_j..A_m}(φ_2)(K_j..K_{m−1})`
/// with `φ(x_1..x_m) = φ_1(x_1..x_j) φ_2(x_j..x_m)`.
pub fn moi_split_check(
    phi1: &MoiKernel,
    phi2: &MoiKernel,
    j: usize,
    spectra: &[&EigenDecomposition],
    operands: &[ComplexMatrix],
) -> Result<Residual> {
    let m = spectra.len();
    if m < 3 || j < 2 || j > m - 1 {
        return Err(Error::InvalidArgument(format!(
            "split slot j={j} must satisfy 2 <= j <= {}",
            m.saturating_sub(1)
        )));
    }
    check_shapes(m - 1, spectra, operands)?;
    let g1 = phi1.materialize(&spectra[..j])?;
    let g2 = phi2.materialize(&spectra[j - 1..])?;
    let dims: Vec<usize> = spectra.iter().map(|e| e.dim()).collect();
    let joined = GridKernel::from_fn(dims, |idx| g1.get(&idx[..j]) * g2.get(&idx[j - 1..]));
    let lhs = contract(&joined, spectra, operands);
    let left = contract(&g1, &spectra[..j], &operands[..j - 1]);
    let right = contract(&g2, &spectra[j - 1..], &operands[j - 1..]);
    Ok(Residual::frobenius(&lhs, &(&left * &right)))
}

/// Insertion of a dummy variable at slot `j` (1-based, `1 ≤ j ≤ m`), where
/// `φ̃(x_1..x_m) = φ(x_1..x_{j−1}, x_{j+1}..x_m)`:
/// interior slots merge `K_{j−1}K_j`, `j = 1` pulls `K_1` out on the left and
/// `j = m` pulls `K_{m−1}` out on the right.
pub fn moi_insert_check(
    phi: &MoiKernel,
    j: usize,
    spectra: &[&EigenDecomposition],
    operands: &[ComplexMatrix],
) -> Result<Residual> {
    let m = spectra.len();
    if m < 2 || j == 0 || j > m {
        return Err(Error::InvalidArgument(format!(
            "insertion slot j={j} must satisfy 1 <= j <= {m}"
        )));
    }
    check_shapes(m - 1, spectra, operands)?;
    let reduced: Vec<&EigenDecomposition> = spectra
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != j - 1)
        .map(|(_, e)| *e)
        .collect();
    let g = phi.materialize(&reduced)?;
    let dims: Vec<usize> = spectra.iter().map(|e| e.dim()).collect();
    let lifted = GridKernel::from_fn(dims, |idx| {
        let sub: Vec<usize> = idx
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != j - 1)
            .map(|(_, &v)| v)
            .collect();
        g.get(&sub)
    });
    let lhs = contract(&lifted, spectra, operands);

    let rhs = if j == 1 {
        &operands[0] * &contract(&g, &reduced, &operands[1..])
    } else if j == m {
        &contract(&g, &reduced, &operands[..m - 2]) * &operands[m - 2]
    } else {
        let mut ops: Vec<ComplexMatrix> = Vec::with_capacity(m - 2);
        ops.extend_from_slice(&operands[..j - 2]);
        ops.push(&operands[j - 2] * &operands[j - 1]);
        ops.extend_from_slice(&operands[j..]);
        contract(&g, &reduced, &ops)
    };
    Ok(Residual::frobenius(&lhs, &rhs))
}

/// Eigendecompositions of several Hermitian matrices.
pub fn decompose_all(ms: &[HermitianMatrix]) -> Result<Vec<EigenDecomposition>> {
    spectra_of(ms)
}
