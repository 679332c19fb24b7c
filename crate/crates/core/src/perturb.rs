//! Derivatives, perturbation formulas and Taylor remainders along the
//! path `t ↦ f(A + tK)`.

use crate::error::{Error, Result};
use crate::funcmodel::{factorial, sup_norm_estimate, FunctionKind, FunctionModel, Interval};
use crate::linalg::{mat_func, schatten_norm, spectral_norm, ComplexMatrix, EigenDecomposition, HermitianMatrix, SchattenIndex};
use crate::moi::{moi_apply, MoiKernel};
use crate::residual::Residual;

/// Base finite-difference step for derivative orders 1 and 2.
pub const FD_BASE_STEP_LOW: f64 = 1e-3;
/// Base finite-difference step for derivative orders 3 and 4.
pub const FD_BASE_STEP_HIGH: f64 = 5e-3;
/// Highest derivative order with a finite-difference stencil.
pub const FD_MAX_ORDER: usize = 4;

/// The data `A`, `K`, `f` of the path `t ↦ f(A + tK)`.
#[derive(Debug, Clone)]
pub struct PerturbationPath {
    a: HermitianMatrix,
    k: HermitianMatrix,
    f: FunctionModel,
}

impl PerturbationPath {
    pub fn new(a: HermitianMatrix, k: HermitianMatrix, f: FunctionModel) -> Result<Self> {
        if a.dim() != k.dim() {
            return Err(Error::DimMismatch(format!(
                "A is {0}x{0} but K is {1}x{1}",
                a.dim(),
                k.dim()
            )));
        }
        Ok(PerturbationPath { a, k, f })
    }

    pub fn a(&self) -> &HermitianMatrix {
        &self.a
    }

    pub fn k(&self) -> &HermitianMatrix {
        &self.k
    }

    pub fn f(&self) -> &FunctionModel {
        &self.f
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `A + tK`.
    pub fn point(&self, t: f64) -> HermitianMatrix {
        self.a.add_scaled(t, &self.k)
    }

    /// `f(A + tK)`.
    pub fn value(&self, t: f64) -> Result<ComplexMatrix> {
        mat_func(&self.f, &self.point(t).eigh()?)
    }

    /// `[min λ − ‖K‖₂, max λ + ‖K‖₂]` over the spectra of `A` and `A + K`.
    pub fn spectral_hull(&self) -> Result<Interval> {
        let k_norm = spectral_norm(self.k.as_matrix())?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for m in [self.a.clone(), self.point(1.0)] {
            for &l in &m.eigh()?.eigenvalues {
                lo = lo.min(l);
                hi = hi.max(l);
            }
        }
        Interval::new(lo - k_norm, hi + k_norm)
    }

    /// Finite-difference step for order `k`: the base step measured in the
    /// spectral scale `‖A‖₂ + ‖K‖₂`, converted to the parameter `t`.
    pub fn default_fd_step(&self, k: usize) -> Result<f64> {
        let base = if k <= 2 { FD_BASE_STEP_LOW } else { FD_BASE_STEP_HIGH };
        let a_norm = spectral_norm(self.a.as_matrix())?;
        let k_norm = spectral_norm(self.k.as_matrix())?;
        if k_norm == 0.0 {
            return Ok(base);
        }
        Ok(base * (a_norm + k_norm) / k_norm)
    }
}

/// `φ(t) = f(A + tK) − f(A)`.
pub fn phi(path: &PerturbationPath, t: f64) -> Result<ComplexMatrix> {
    Ok(&path.value(t)? - &path.value(0.0)?)
}

/// `φ^(k)(t) = k!·Γ^{A+tK, …, A+tK}(f^[k])(K, …, K)`; order 0 gives `φ(t)`.
pub fn derivative_moi(path: &PerturbationPath, k: usize, t: f64) -> Result<ComplexMatrix> {
    path.f.check_order(k)?;
    if k == 0 {
        return phi(path, t);
    }
    let e = path.point(t).eigh()?;
    derivative_moi_at(&path.f, k, &e, path.k.as_matrix())
}

fn derivative_moi_at(f: &FunctionModel, k: usize, e: &EigenDecomposition, km: &ComplexMatrix) -> Result<ComplexMatrix> {
    let spectra = vec![e; k + 1];
    let operands = vec![km.clone(); k];
    let g = moi_apply(&MoiKernel::divided_difference(f.clone(), k), &spectra, &operands)?;
    Ok(g.scale_real(factorial(k)))
}

/// Symmetric stencil weights `(offset, weight)` for the `k`-th derivative
/// with `O(h²)` truncation; the result is divided by `h^k`.
fn stencil(k: usize) -> &'static [(f64, f64)] {
    match k {
        1 => &[(-1.0, -0.5), (1.0, 0.5)],
        2 => &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
        3 => &[(-2.0, -0.5), (-1.0, 1.0), (1.0, -1.0), (2.0, 0.5)],
        4 => &[(-2.0, 1.0), (-1.0, -4.0), (0.0, 6.0), (1.0, -4.0), (2.0, 1.0)],
        _ => &[],
    }
}

fn central_difference(path: &PerturbationPath, k: usize, t: f64, h: f64) -> Result<ComplexMatrix> {
    let d = path.dim();
    let mut acc = ComplexMatrix::zeros(d, d);
    for &(offset, weight) in stencil(k) {
        acc = &acc + &path.value(t + offset * h)?.scale_real(weight);
    }
    Ok(acc.scale_real(1.0 / h.powi(k as i32)))
}

/// Central-difference estimate of `φ^(k)(t)` with one Richardson step
/// `(4·D(h/2) − D(h))/3`.
pub fn derivative_fd(path: &PerturbationPath, k: usize, t: f64, h: f64) -> Result<ComplexMatrix> {
    if k == 0 || k > FD_MAX_ORDER {
        return Err(Error::UnsupportedOrder(k));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let coarse = central_difference(path, k, t, h)?;
    let fine = central_difference(path, k, t, h / 2.0)?;
    Ok((&fine.scale_real(4.0) - &coarse).scale_real(1.0 / 3.0))
}

/// `φ^(k)(t)` for polynomial `f` by expanding `(B + sK)^m` in `s` with
/// `B = A + tK`: the coefficient of `s^k` is the sum of all words with `k`
/// letters `K` and `m − k` letters `B`.
pub fn polynomial_path_derivative(path: &PerturbationPath, k: usize, t: f64) -> Result<ComplexMatrix> {
    let coefficients = match path.f.kind() {
        FunctionKind::Polynomial(c) => c.clone(),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "{} is not a polynomial",
                path.f
            )))
        }
    };
    let d = path.dim();
    let b = path.point(t).into_matrix();
    let km = path.k.as_matrix();
    // words[j] = coefficient of s^j in (B + sK)^m, for the current m
    let mut words = vec![ComplexMatrix::identity(d)];
    let mut total = ComplexMatrix::zeros(d, d);
    for (m, &c) in coefficients.iter().enumerate() {
        if m > 0 {
            let mut next = Vec::with_capacity(words.len() + 1);
            for j in 0..=words.len() {
                let mut w = ComplexMatrix::zeros(d, d);
                if j < words.len() {
                    w = &w + &(&words[j] * &b);
                }
                if j > 0 {
                    w = &w + &(&words[j - 1] * km);
                }
                next.push(w);
            }
            words = next;
        }
        if m >= k && c != 0.0 {
            total = &total + &words[k].scale_real(c);
        }
    }
    Ok(total.scale_real(factorial(k)))
}

/// Comparison of the MOI derivative with its finite-difference oracle.
#[derive(Debug, Clone)]
pub struct DerivativeReport {
    pub order: usize,
    pub t: f64,
    pub moi_value: ComplexMatrix,
    pub fd_value: ComplexMatrix,
    /// `(p, ‖moi − fd‖_p / ‖fd‖_p)`; the plain difference norm when `fd = 0`.
    pub schatten_errors: Vec<(SchattenIndex, f64)>,
}

pub fn derivative_report(
    path: &PerturbationPath,
    k: usize,
    t: f64,
    p_values: &[SchattenIndex],
) -> Result<DerivativeReport> {
    let moi_value = derivative_moi(path, k, t)?;
    let fd_value = derivative_fd(path, k, t, path.default_fd_step(k)?)?;
    let diff = &moi_value - &fd_value;
    let mut schatten_errors = Vec::with_capacity(p_values.len());
    for &p in p_values {
        let denom = schatten_norm(&fd_value, p)?;
        let num = schatten_norm(&diff, p)?;
        schatten_errors.push((p, if denom > 0.0 { num / denom } else { num }));
    }
    Ok(DerivativeReport {
        order: k,
        t,
        moi_value,
        fd_value,
        schatten_errors,
    })
}

/// Checks the perturbation formula
/// `[Γ^{…,A_{j−1},B,A_j,…}(f^[n−1]) − Γ^{…,A_{j−1},A,A_j,…}(f^[n−1])](K_1..K_{n−1})
///  = Γ^{…,A_{j−1},B,A,A_j,…}(f^[n])(K_1..K_{j−1}, B−A, K_j..K_{n−1})`
/// with `n − 1` background matrices `A_i` and operands `K_i`, `1 ≤ j ≤ n`.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_formula_residual(
    a_list: &[HermitianMatrix],
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    f: &FunctionModel,
    n: usize,
    j: usize,
    k_list: &[ComplexMatrix],
    p: SchattenIndex,
) -> Result<Residual> {
    if n == 0 || a_list.len() != n - 1 || k_list.len() != n - 1 {
        return Err(Error::DimMismatch(format!(
            "order {n} needs {} background matrices and operands, got {} and {}",
            n.saturating_sub(1),
            a_list.len(),
            k_list.len()
        )));
    }
    if j == 0 || j > n {
        return Err(Error::InvalidArgument(format!("slot j={j} must satisfy 1 <= j <= {n}")));
    }
    f.check_order(n)?;
    let d = a.dim();
    if b.dim() != d || a_list.iter().any(|m| m.dim() != d) {
        return Err(Error::DimMismatch("all matrices must share one dimension".into()));
    }
    let ea = a.eigh()?;
    let eb = b.eigh()?;
    let background: Vec<EigenDecomposition> = a_list.iter().map(|m| m.eigh()).collect::<Result<_>>()?;

    let low = MoiKernel::divided_difference(f.clone(), n - 1);
    let high = MoiKernel::divided_difference(f.clone(), n);
    let lhs = &moi_apply(&low, &splice(&background, j, &[&eb]), k_list)?
        - &moi_apply(&low, &splice(&background, j, &[&ea]), k_list)?;

    let mut ops: Vec<ComplexMatrix> = k_list[..j - 1].to_vec();
    ops.push(b.as_matrix() - a.as_matrix());
    ops.extend_from_slice(&k_list[j - 1..]);
    let rhs = moi_apply(&high, &splice(&background, j, &[&eb, &ea]), &ops)?;
    Residual::between(&lhs, &rhs, p)
}

fn splice<'a>(background: &'a [EigenDecomposition], j: usize, inserted: &[&'a EigenDecomposition]) -> Vec<&'a EigenDecomposition> {
    let mut s: Vec<&EigenDecomposition> = background[..j - 1].iter().collect();
    s.extend_from_slice(inserted);
    s.extend(background[j - 1..].iter());
    s
}

/// Both evaluations of the Taylor remainder and its normalized size.
#[derive(Debug, Clone)]
pub struct TaylorRemainder {
    /// `f(A+K) − f(A) − Σ_{k=1}^{n−1} φ^(k)(0)/k!`.
    pub direct: ComplexMatrix,
    /// `Γ^{A+K, A, …, A}(f^[n])(K, …, K)`.
    pub moi: ComplexMatrix,
    /// `‖direct‖_p / (sup_hull |f^(n)| · ‖K‖_{np}^n)`; `None` when the
    /// denominator vanishes.
    pub ratio: Option<f64>,
    pub residual: Residual,
}

pub fn taylor_remainder(path: &PerturbationPath, n: usize, p: SchattenIndex) -> Result<TaylorRemainder> {
    if n == 0 {
        return Err(Error::InvalidArgument("Taylor remainder needs order n >= 1".into()));
    }
    path.f.check_order(n)?;
    let e0 = path.a.eigh()?;
    let e1 = path.point(1.0).eigh()?;
    let km = path.k.as_matrix();

    let mut direct = &mat_func(&path.f, &e1)? - &mat_func(&path.f, &e0)?;
    for k in 1..n {
        let dk = derivative_moi_at(&path.f, k, &e0, km)?;
        direct = &direct - &dk.scale_real(1.0 / factorial(k));
    }

    let mut spectra = vec![&e1];
    spectra.extend(std::iter::repeat_n(&e0, n));
    let moi = moi_apply(&MoiKernel::divided_difference(path.f.clone(), n), &spectra, &vec![km.clone(); n])?;

    let sup = sup_norm_estimate(&path.f, n, path.spectral_hull()?)?;
    let denom = sup * schatten_norm(km, p.times(n))?.powi(n as i32);
    let ratio = if denom > f64::MIN_POSITIVE && denom.is_finite() {
        Some(schatten_norm(&direct, p)? / denom)
    } else {
        None
    };
    let residual = Residual::between(&direct, &moi, p)?;
    Ok(TaylorRemainder {
        direct,
        moi,
        ratio,
        residual,
    })
}

/// `‖Γ(f^[n])(X_1..X_n)‖_p / (sup |f^(n)| · Π ‖X_i‖_{np})`, the supremum
/// taken over the hull of all spectra.
pub fn boundedness_ratio(
    f: &FunctionModel,
    n: usize,
    spectra: &[&EigenDecomposition],
    operands: &[ComplexMatrix],
    p: SchattenIndex,
) -> Result<f64> {
    let value = moi_apply(&MoiKernel::divided_difference(f.clone(), n), spectra, operands)?;
    let (lo, hi) = spectra
        .iter()
        .flat_map(|e| e.eigenvalues.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| (lo.min(l), hi.max(l)));
    let mut denom = sup_norm_estimate(f, n, Interval::new(lo, hi)?)?;
    for x in operands {
        denom *= schatten_norm(x, p.times(n))?;
    }
    if denom.is_nan() || denom <= f64::MIN_POSITIVE || denom.is_infinite() {
        return Err(Error::DivisionDegenerate(denom));
    }
    Ok(schatten_norm(&value, p)? / denom)
}

/// Increments of `φ^(k)` along a parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    /// `‖φ^(k)(t_{i+1}) − φ^(k)(t_i)‖_p` for consecutive grid points.
    pub increments: Vec<f64>,
    pub max_increment: f64,
}

pub fn continuity_sweep(path: &PerturbationPath, k: usize, t_grid: &[f64], p: SchattenIndex) -> Result<ContinuityReport> {
    if t_grid.len() < 2 {
        return Err(Error::InvalidArgument("continuity sweep needs at least two grid points".into()));
    }
    let mut increments = Vec::with_capacity(t_grid.len() - 1);
    let mut prev = derivative_moi(path, k, t_grid[0])?;
    for &t in &t_grid[1..] {
        let cur = derivative_moi(path, k, t)?;
        increments.push(schatten_norm(&(&cur - &prev), p)?);
        prev = cur;
    }
    let max_increment = increments.iter().copied().fold(0.0, f64::max);
    Ok(ContinuityReport {
        increments,
        max_increment,
    })
}

/// `count + 1` equally spaced points from `lo` to `hi`.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..=count)
        .map(|i| if i == count { hi } else { lo + (hi - lo) * i as f64 / count as f64 })
        .collect()
}
