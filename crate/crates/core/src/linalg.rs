//! Dense complex matrices, the Hermitian eigensolver and Schatten norms.
//!
//! Everything here is sized for desk-scale problems (dimension up to a few
//! dozen). Storage is row-major `Vec<Complex64>`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcmodel::FunctionModel;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Sweep cap of the cyclic Jacobi solver.
pub const JACOBI_MAX_SWEEPS: usize = 60;
/// Off-diagonal stopping threshold, relative to `‖H‖_F`.
pub const JACOBI_REL_TOL: f64 = 1e-13;

/// A dense, row-major complex matrix with finite entries.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFile", into = "MatrixFile")]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// On-disk JSON layout: `{"rows": n, "cols": m, "re": [...], "im": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl TryFrom<MatrixFile> for ComplexMatrix {
    type Error = Error;

    fn try_from(file: MatrixFile) -> Result<Self> {
        if file.re.len() != file.im.len() {
            return Err(Error::InvalidMatrix(format!(
                "re has {} entries but im has {}",
                file.re.len(),
                file.im.len()
            )));
        }
        let data = file
            .re
            .iter()
            .zip(&file.im)
            .map(|(&re, &im)| C64::new(re, im))
            .collect();
        ComplexMatrix::new(file.rows, file.cols, data)
    }
}

impl From<ComplexMatrix> for MatrixFile {
    fn from(m: ComplexMatrix) -> Self {
        MatrixFile {
            rows: m.rows,
            cols: m.cols,
            re: m.data.iter().map(|z| z.re).collect(),
            im: m.data.iter().map(|z| z.im).collect(),
        }
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "entry ({}, {}) is not finite",
                pos / cols,
                pos % cols
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    /// Real matrix from row-major data.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| ZERO)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, dim, |i, j| if i == j { ONE } else { ZERO })
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let d = diag.len();
        Self::from_fn(d, d, |i, j| if i == j { diag[i] } else { ZERO })
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let d = diag.len();
        Self::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                ZERO
            }
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Self {
        self.assert_same_shape(other, "hadamard");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let sum: f64 = self.data.iter().map(|z| (z / scale).norm_sqr()).sum();
        scale * sum.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// `self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// Integer power of a square matrix (`m^0 = I`).
    pub fn powi(&self, k: usize) -> Self {
        assert!(self.is_square(), "powi needs a square matrix");
        let mut out = Self::identity(self.rows);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    fn assert_same_shape(&self, other: &Self, op: &str) {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "{op}: shape {}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
    }

    pub fn to_matrix_file(&self) -> MatrixFile {
        self.clone().into()
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>11.4e}{:+.4e}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.assert_same_shape(rhs, "add");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.assert_same_shape(rhs, "sub");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let (n, m, p) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![ZERO; n * p];
        // i-k-j order keeps the inner loop on contiguous rows of both operands.
        for i in 0..n {
            let out_row = &mut out[i * p..(i + 1) * p];
            for k in 0..m {
                let a = self.data[i * m + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * p..(k + 1) * p];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        ComplexMatrix {
            rows: n,
            cols: p,
            data: out,
        }
    }
}

macro_rules! forward_owned_binop {
    ($tr:ident, $method:ident) => {
        impl $tr for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                (&self).$method(rhs)
            }
        }
    };
}

forward_owned_binop!(Add, add);
forward_owned_binop!(Sub, sub);
forward_owned_binop!(Mul, mul);

/// A Hermitian matrix. The constructor replaces `H` by `(H + H*)/2`, so the
/// stored diagonal is exactly real.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows, m.cols
            )));
        }
        let d = m.rows;
        let sym = ComplexMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(m[(i, i)].re, 0.0)
            } else {
                (m[(i, j)] + m[(j, i)].conj()) * 0.5
            }
        });
        Ok(HermitianMatrix(sym))
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        HermitianMatrix(ComplexMatrix::from_real_diag(diag))
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix(ComplexMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// `self + t·other`, which stays Hermitian for real `t`.
    pub fn add_scaled(&self, t: f64, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix::new(&self.0 + &other.0.scale_real(t))
            .expect("sum of equal-size square matrices is square")
    }

    pub fn eigh(&self) -> Result<EigenDecomposition> {
        eigh(self)
    }
}

impl TryFrom<ComplexMatrix> for HermitianMatrix {
    type Error = Error;

    fn try_from(m: ComplexMatrix) -> Result<Self> {
        HermitianMatrix::new(m)
    }
}

/// Spectral data `(λ ascending, U)` with `H = U·diag(λ)·U*`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub unitary: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `U·diag(g(λ_i))·U*`.
    pub fn apply(&self, mut g: impl FnMut(f64) -> C64) -> ComplexMatrix {
        let values: Vec<C64> = self.eigenvalues.iter().map(|&l| g(l)).collect();
        self.apply_values(&values)
    }

    /// `U·diag(values)·U*` for values given per eigen-index.
    pub fn apply_values(&self, values: &[C64]) -> ComplexMatrix {
        assert_eq!(values.len(), self.dim());
        let u = &self.unitary;
        let d = self.dim();
        ComplexMatrix::from_fn(d, d, |i, j| {
            (0..d)
                .map(|k| u[(i, k)] * values[k] * u[(j, k)].conj())
                .sum()
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply(|l| C64::new(l, 0.0))
    }
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// Each rotation acts on a (p, q) pair with the unitary
/// `[[c, s·e], [−s·ē, c]]` where `e` is the phase of `h_pq`. Sweeps stop when
/// the off-diagonal Frobenius norm drops below `1e-13·‖H‖_F`; eigenvalues
/// come back ascending with ties kept in sweep order.
pub fn eigh(h: &HermitianMatrix) -> Result<EigenDecomposition> {
    let d = h.dim();
    let mut a = h.as_matrix().data.clone();
    let mut v = ComplexMatrix::identity(d).data;
    let tol = JACOBI_REL_TOL * h.as_matrix().frobenius_norm();

    let off_norm = |a: &[C64]| -> f64 {
        let mut s = 0.0;
        for p in 0..d {
            for q in 0..d {
                if p != q {
                    s += a[p * d + q].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= tol {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NonConvergence {
                sweeps,
                off_norm: off,
            });
        }
        sweeps += 1;
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                let b = apq.norm();
                if b == 0.0 {
                    continue;
                }
                let app = a[p * d + p].re;
                let aqq = a[q * d + q].re;
                let theta = (aqq - app) / (2.0 * b);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let e = apq / b;
                let jpq = e * s;
                let jqp = -e.conj() * s;

                // A <- A J
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = akp * c + akq * jqp;
                    a[k * d + q] = akp * jpq + akq * c;
                }
                // A <- J* A
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = apk * c + aqk * jqp.conj();
                    a[q * d + k] = apk * jpq.conj() + aqk * c;
                }
                a[p * d + p] = C64::new(app - t * b, 0.0);
                a[q * d + q] = C64::new(aqq + t * b, 0.0);
                a[p * d + q] = ZERO;
                a[q * d + p] = ZERO;

                // V <- V J
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = vkp * c + vkq * jqp;
                    v[k * d + q] = vkp * jpq + vkq * c;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..d).map(|i| a[i * d + i].re).collect();
    let mut order: Vec<usize> = (0..d).collect();
    // stable: equal eigenvalues keep sweep order
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let unitary = ComplexMatrix::from_fn(d, d, |row, col| v[row * d + order[col]]);
    Ok(EigenDecomposition {
        eigenvalues,
        unitary,
    })
}

/// `f(H) = U·diag(f(λ_i))·U*`.
pub fn mat_func(f: &FunctionModel, e: &EigenDecomposition) -> Result<ComplexMatrix> {
    mat_func_deriv(f, 0, e)
}

/// `f^(order)(H)` through the same spectral calculus.
pub fn mat_func_deriv(
    f: &FunctionModel,
    order: usize,
    e: &EigenDecomposition,
) -> Result<ComplexMatrix> {
    let values = e
        .eigenvalues
        .iter()
        .map(|&l| f.eval_deriv(order, l).map(|y| C64::new(y, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(e.apply_values(&values))
}

/// Singular values in descending order, from the spectrum of `X*X`.
pub fn singular_values(x: &ComplexMatrix) -> Result<Vec<f64>> {
    let scale = x.max_abs();
    if scale == 0.0 {
        return Ok(vec![0.0; x.cols]);
    }
    // Normalizing first keeps X*X away from overflow and underflow.
    let xs = x.scale_real(1.0 / scale);
    let gram = HermitianMatrix::new(&xs.adjoint() * &xs)?;
    let e = eigh(&gram)?;
    let mut sv: Vec<f64> = e
        .eigenvalues
        .iter()
        .rev()
        .map(|&l| l.max(0.0).sqrt() * scale)
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// A Schatten exponent `p ∈ [1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchattenIndex {
    Finite(f64),
    Infinity,
}

impl SchattenIndex {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidP(p));
        }
        if p.is_infinite() {
            Ok(SchattenIndex::Infinity)
        } else {
            Ok(SchattenIndex::Finite(p))
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            SchattenIndex::Finite(p) => p,
            SchattenIndex::Infinity => f64::INFINITY,
        }
    }

    /// Whether `1 < p < ∞`, the range covered by the boundedness theory.
    pub fn in_open_range(&self) -> bool {
        matches!(*self, SchattenIndex::Finite(p) if p > 1.0)
    }

    /// The index `k·p` (used for `‖·‖_{np}` bookkeeping).
    pub fn times(&self, k: usize) -> SchattenIndex {
        match *self {
            SchattenIndex::Finite(p) => SchattenIndex::Finite(p * k as f64),
            SchattenIndex::Infinity => SchattenIndex::Infinity,
        }
    }
}

impl fmt::Display for SchattenIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchattenIndex::Finite(p) => write!(f, "{p}"),
            SchattenIndex::Infinity => write!(f, "inf"),
        }
    }
}

/// `(Σ σ_i^p)^{1/p}`, or `max σ_i` for `p = ∞`.
pub fn schatten_norm(x: &ComplexMatrix, p: SchattenIndex) -> Result<f64> {
    if let SchattenIndex::Finite(v) = p {
        if v.is_nan() || v < 1.0 {
            return Err(Error::InvalidP(v));
        }
        if v == 2.0 {
            return Ok(x.frobenius_norm());
        }
    }
    let sv = singular_values(x)?;
    Ok(schatten_from_singular_values(&sv, p))
}

pub fn schatten_from_singular_values(sv: &[f64], p: SchattenIndex) -> f64 {
    let top = sv.iter().cloned().fold(0.0, f64::max);
    match p {
        SchattenIndex::Infinity => top,
        SchattenIndex::Finite(p) => {
            if top == 0.0 {
                return 0.0;
            }
            let s: f64 = sv.iter().map(|&s| (s / top).powf(p)).sum();
            top * s.powf(1.0 / p)
        }
    }
}

/// Largest singular value.
pub fn spectral_norm(x: &ComplexMatrix) -> Result<f64> {
    schatten_norm(x, SchattenIndex::Infinity)
}
