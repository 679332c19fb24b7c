//! Scalar function families with exact derivatives.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker for "every derivative is exact".
pub const UNBOUNDED_ORDER: usize = usize::MAX;

/// Number of scan points used by [`sup_norm_estimate`].
pub const SUP_NORM_GRID: usize = 4096;
const SUP_NORM_INFLATION: f64 = 1.01;

type DerivFn = dyn Fn(usize, f64) -> f64 + Send + Sync;

/// A user-supplied model: `eval(k, x)` must return `f^(k)(x)` for every
/// `k ≤ max_order`.
#[derive(Clone)]
pub struct CustomFn {
    name: String,
    eval: Arc<DerivFn>,
}

impl CustomFn {
    pub fn new(name: impl Into<String>, eval: impl Fn(usize, f64) -> f64 + Send + Sync + 'static) -> Self {
        CustomFn {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }
}

#[derive(Clone)]
pub enum FunctionKind {
    /// Coefficients in ascending degree: `c0 + c1·x + c2·x² + …`.
    Polynomial(Vec<f64>),
    /// `exp(scale·x)`.
    Exp(f64),
    /// `sin(frequency·x)`.
    Sin(f64),
    /// `cos(frequency·x)`.
    Cos(f64),
    /// `1 / (1 + x²)`.
    InvQuad,
    /// `sqrt(x² + ε)`, ε > 0.
    SqrtEps(f64),
    Custom(CustomFn),
}

#[derive(Clone)]
pub struct FunctionModel {
    kind: FunctionKind,
    max_order: usize,
}

impl fmt::Debug for FunctionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FunctionModel({self})")
    }
}

impl fmt::Display for FunctionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FunctionKind::Polynomial(c) => {
                write!(f, "poly[")?;
                for (i, v) in c.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
            FunctionKind::Exp(a) => write!(f, "exp({a}x)"),
            FunctionKind::Sin(w) => write!(f, "sin({w}x)"),
            FunctionKind::Cos(w) => write!(f, "cos({w}x)"),
            FunctionKind::InvQuad => write!(f, "1/(1+x^2)"),
            FunctionKind::SqrtEps(e) => write!(f, "sqrt(x^2+{e})"),
            FunctionKind::Custom(c) => write!(f, "{}", c.name),
        }
    }
}

impl FunctionModel {
    fn builtin(kind: FunctionKind) -> Self {
        FunctionModel {
            kind,
            max_order: UNBOUNDED_ORDER,
        }
    }

    /// Polynomial from ascending coefficients.
    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        assert!(
            coefficients.iter().all(|c| c.is_finite()),
            "polynomial coefficients must be finite"
        );
        Self::builtin(FunctionKind::Polynomial(coefficients))
    }

    /// `x^n / n!`, whose n-th derivative is identically one.
    pub fn normalized_monomial(n: usize) -> Self {
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0 / factorial(n);
        Self::polynomial(c)
    }

    pub fn exp(scale: f64) -> Self {
        assert!(scale.is_finite());
        Self::builtin(FunctionKind::Exp(scale))
    }

    pub fn sin(frequency: f64) -> Self {
        assert!(frequency.is_finite());
        Self::builtin(FunctionKind::Sin(frequency))
    }

    pub fn cos(frequency: f64) -> Self {
        assert!(frequency.is_finite());
        Self::builtin(FunctionKind::Cos(frequency))
    }

    pub fn inv_quad() -> Self {
        Self::builtin(FunctionKind::InvQuad)
    }

    pub fn sqrt_eps(eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidArgument(format!("sqrteps needs eps > 0, got {eps}")));
        }
        Ok(Self::builtin(FunctionKind::SqrtEps(eps)))
    }

    pub fn custom(name: impl Into<String>, max_order: usize, eval: impl Fn(usize, f64) -> f64 + Send + Sync + 'static) -> Self {
        FunctionModel {
            kind: FunctionKind::Custom(CustomFn::new(name, eval)),
            max_order,
        }
    }

    /// Caps the exact order, e.g. to model a function known only to `C^k`.
    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = self.max_order.min(max_order);
        self
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn check_order(&self, order: usize) -> Result<()> {
        if order > self.max_order {
            Err(Error::OrderExceeded {
                requested: order,
                max: self.max_order,
            })
        } else {
            Ok(())
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.eval_deriv(0, x)
    }

    /// Exact `f^(order)(x)`.
    pub fn eval_deriv(&self, order: usize, x: f64) -> Result<f64> {
        self.check_order(order)?;
        let k = order;
        let y = match &self.kind {
            FunctionKind::Polynomial(c) => poly_deriv(c, k, x),
            FunctionKind::Exp(a) => a.powi(k as i32) * (a * x).exp(),
            FunctionKind::Sin(w) => w.powi(k as i32) * sin_shifted(w * x, k),
            FunctionKind::Cos(w) => w.powi(k as i32) * sin_shifted(w * x, k + 1),
            FunctionKind::InvQuad => quadratic_power_deriv(-1.0, 1.0, k, x),
            FunctionKind::SqrtEps(e) => quadratic_power_deriv(0.5, *e, k, x),
            FunctionKind::Custom(c) => (c.eval)(k, x),
        };
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::EvalError {
                x,
                reason: format!("derivative {k} of {self} is not finite"),
            })
        }
    }

    /// The model `x ↦ f^(k)(x)`.
    pub fn derivative(&self, k: usize) -> Result<FunctionModel> {
        self.check_order(k)?;
        let base = self.clone();
        let max = if self.max_order == UNBOUNDED_ORDER {
            UNBOUNDED_ORDER
        } else {
            self.max_order - k
        };
        Ok(FunctionModel::custom(format!("d^{k}[{self}]"), max, move |j, x| {
            base.eval_deriv(j + k, x).unwrap_or(f64::NAN)
        }))
    }

    /// The product `g·f`, differentiated by the Leibniz rule.
    pub fn product(f: &FunctionModel, g: &FunctionModel) -> FunctionModel {
        let (f2, g2) = (f.clone(), g.clone());
        FunctionModel::custom(format!("({g})*({f})"), f.max_order.min(g.max_order), move |k, x| {
            let mut s = 0.0;
            let mut binom = 1.0;
            for i in 0..=k {
                let gi = g2.eval_deriv(i, x).unwrap_or(f64::NAN);
                let fi = f2.eval_deriv(k - i, x).unwrap_or(f64::NAN);
                s += binom * gi * fi;
                binom = binom * (k - i) as f64 / (i + 1) as f64;
            }
            s
        })
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn poly_deriv(c: &[f64], k: usize, x: f64) -> f64 {
    if k >= c.len() {
        return 0.0;
    }
    // Horner on the coefficients of the k-th derivative.
    let mut acc = 0.0;
    for i in (k..c.len()).rev() {
        let falling: f64 = ((i - k + 1)..=i).map(|m| m as f64).product();
        acc = acc * x + c[i] * falling;
    }
    acc
}

/// `sin(θ + k·π/2)` without rounding π/2.
fn sin_shifted(theta: f64, k: usize) -> f64 {
    match k % 4 {
        0 => theta.sin(),
        1 => theta.cos(),
        2 => -theta.sin(),
        _ => -theta.cos(),
    }
}

/// k-th derivative of `(x² + ε)^a` by Faà di Bruno with `u = x² + ε`
/// (`u' = 2x`, `u'' = 2`, higher derivatives vanish):
/// `Σ_j k!/(j!(k−2j)!) (2x)^{k−2j} (a)_{k−j} u^{a−k+j}`.
fn quadratic_power_deriv(a: f64, eps: f64, k: usize, x: f64) -> f64 {
    let u = x * x + eps;
    let mut sum = 0.0;
    for j in 0..=k / 2 {
        let m = k - j;
        let coeff = factorial(k) / (factorial(j) * factorial(k - 2 * j));
        let falling: f64 = (0..m).map(|i| a - i as f64).product();
        sum += coeff * (2.0 * x).powi((k - 2 * j) as i32) * falling * u.powf(a - m as f64);
    }
    sum
}

/// A closed interval with finite endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidArgument(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// `points` equispaced nodes including both endpoints.
    pub fn grid(&self, points: usize) -> impl Iterator<Item = f64> + '_ {
        let n = points.max(2);
        let (lo, hi) = (self.lo, self.hi);
        (0..n).map(move |i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
    }
}

/// Grid estimate of `sup_{x∈I} |f^(order)(x)|`, inflated by 1 %.
///
/// This is a scan over [`SUP_NORM_GRID`] points, not a certified bound.
pub fn sup_norm_estimate(f: &FunctionModel, order: usize, interval: Interval) -> Result<f64> {
    f.check_order(order)?;
    let mut best = 0.0f64;
    for x in interval.grid(SUP_NORM_GRID) {
        best = best.max(f.eval_deriv(order, x)?.abs());
    }
    Ok(best * SUP_NORM_INFLATION)
}

/// Function description as used by configs and the command line:
/// `{"kind": "exp", "params": [1.0]}` or the flag form `exp:1`.
///
/// `poly` parameters list coefficients from the highest degree down, so
/// `poly:1,0,0` is `x²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl FunctionSpec {
    pub fn new(kind: &str, params: &[f64]) -> Self {
        FunctionSpec {
            kind: kind.to_string(),
            params: params.to_vec(),
        }
    }

    pub fn to_model(&self) -> Result<FunctionModel> {
        let p = &self.params;
        if let Some(bad) = p.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("function parameter {bad} is not finite")));
        }
        let single = |default: f64| -> Result<f64> {
            match p.len() {
                0 => Ok(default),
                1 => Ok(p[0]),
                n => Err(Error::InvalidArgument(format!(
                    "function '{}' takes at most one parameter, got {n}",
                    self.kind
                ))),
            }
        };
        match self.kind.as_str() {
            "exp" => Ok(FunctionModel::exp(single(1.0)?)),
            "sin" => Ok(FunctionModel::sin(single(1.0)?)),
            "cos" => Ok(FunctionModel::cos(single(1.0)?)),
            "invquad" => {
                if p.is_empty() {
                    Ok(FunctionModel::inv_quad())
                } else {
                    Err(Error::InvalidArgument("function 'invquad' takes no parameters".into()))
                }
            }
            "sqrteps" => FunctionModel::sqrt_eps(single(1.0)?),
            "poly" => {
                if p.is_empty() {
                    return Err(Error::InvalidArgument("function 'poly' needs coefficients".into()));
                }
                Ok(FunctionModel::polynomial(p.iter().rev().cloned().collect()))
            }
            other => Err(Error::InvalidArgument(format!("unknown function kind '{other}'"))),
        }
    }
}

impl FromStr for FunctionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k.trim(), r.trim()),
            None => (s.trim(), ""),
        };
        let params = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("bad function parameter '{t}'")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let spec = FunctionSpec {
            kind: kind.to_string(),
            params,
        };
        spec.to_model()?;
        Ok(spec)
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if !self.params.is_empty() {
            let ps: Vec<String> = self.params.iter().map(|p| p.to_string()).collect();
            write!(f, ":{}", ps.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn builtins() -> Vec<FunctionModel> {
        vec![
            FunctionModel::exp(1.0),
            FunctionModel::exp(-0.7),
            FunctionModel::sin(1.0),
            FunctionModel::sin(1.3),
            FunctionModel::cos(0.8),
            FunctionModel::polynomial(vec![0.5, -1.0, 0.25, 2.0, -0.3, 0.1]),
            FunctionModel::inv_quad(),
            FunctionModel::sqrt_eps(1.0).unwrap(),
            FunctionModel::sqrt_eps(0.3).unwrap(),
        ]
    }

    #[test]
    fn derivative_examples() {
        let cube = FunctionModel::polynomial(vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(cube.eval_deriv(2, 1.0).unwrap(), 6.0);
        assert_eq!(cube.eval_deriv(4, 1.0).unwrap(), 0.0);
        let e = FunctionModel::exp(1.0);
        for k in 0..8 {
            assert_eq!(e.eval_deriv(k, 0.0).unwrap(), 1.0);
        }
        let s = FunctionModel::sqrt_eps(1.0).unwrap();
        assert_eq!(s.eval_deriv(1, 0.0).unwrap(), 0.0);
        assert_eq!(s.eval_deriv(0, 0.0).unwrap(), 1.0);
        assert_eq!(FunctionModel::inv_quad().eval_deriv(0, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn closed_forms_at_sample_points() {
        // d/dx 1/(1+x²) = −2x/(1+x²)²; d²/dx² sqrt(x²+ε) = ε/(x²+ε)^{3/2}
        let x = 0.7;
        let iq = FunctionModel::inv_quad().eval_deriv(1, x).unwrap();
        assert!((iq + 2.0 * x / (1.0 + x * x).powi(2)).abs() < 1e-15);
        let se = FunctionModel::sqrt_eps(0.3).unwrap().eval_deriv(2, x).unwrap();
        assert!((se - 0.3 / (x * x + 0.3f64).powf(1.5)).abs() < 1e-14);
        let c = FunctionModel::cos(2.0).eval_deriv(3, x).unwrap();
        assert!((c - 8.0 * (2.0 * x).sin()).abs() < 1e-14);
    }

    #[test]
    fn order_exceeded() {
        let f = FunctionModel::exp(1.0).with_max_order(2);
        assert_eq!(
            f.eval_deriv(3, 0.0),
            Err(Error::OrderExceeded { requested: 3, max: 2 })
        );
        assert!(sup_norm_estimate(&f, 3, Interval::new(0.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn finite_difference_consistency() {
        let mut rng = SplitMix64::new(2024);
        let h = 1e-5;
        for f in builtins() {
            for k in 1..=4 {
                for _ in 0..50 {
                    let x = rng.uniform_in(-3.0, 3.0);
                    let fd = (f.eval_deriv(k - 1, x + h).unwrap() - f.eval_deriv(k - 1, x - h).unwrap())
                        / (2.0 * h);
                    let exact = f.eval_deriv(k, x).unwrap();
                    assert!(
                        (fd - exact).abs() <= 1e-6 * (1.0 + exact.abs()),
                        "{f} k={k} x={x}: fd={fd} exact={exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn odd_derivatives_of_even_functions_vanish_at_zero() {
        for f in [FunctionModel::inv_quad(), FunctionModel::sqrt_eps(0.5).unwrap()] {
            for k in [1, 3, 5, 7] {
                assert_eq!(f.eval_deriv(k, 0.0).unwrap(), 0.0, "{f} k={k}");
            }
        }
    }

    #[test]
    fn sup_norm_examples() {
        let s = sup_norm_estimate(&FunctionModel::sin(1.0), 1, Interval::new(-10.0, 10.0).unwrap()).unwrap();
        assert!((1.0..=1.0101).contains(&s), "{s}");
        let sq = FunctionModel::polynomial(vec![0.0, 0.0, 1.0]);
        for (lo, hi) in [(-1.0, 1.0), (3.0, 7.5), (0.0, 0.0)] {
            let v = sup_norm_estimate(&sq, 2, Interval::new(lo, hi).unwrap()).unwrap();
            assert!((v - 2.0 * 1.01).abs() < 1e-14);
        }
    }

    #[test]
    fn sup_norm_against_dense_scan() {
        let f = FunctionModel::inv_quad();
        let est = sup_norm_estimate(&f, 1, Interval::new(-5.0, 5.0).unwrap()).unwrap();
        let n = 1_000_000;
        let brute = (0..=n)
            .map(|i| -5.0 + 10.0 * i as f64 / n as f64)
            .map(|x| (2.0 * x / (1.0 + x * x).powi(2)).abs())
            .fold(0.0, f64::max);
        assert!(((est / 1.01) - brute).abs() <= 1e-3 * brute, "est={est} brute={brute}");
    }

    #[test]
    fn derivative_and_product_models() {
        let f = FunctionModel::sin(1.0);
        let df = f.derivative(1).unwrap();
        assert!((df.eval(0.3).unwrap() - 0.3f64.cos()).abs() < 1e-15);
        assert!((df.eval_deriv(1, 0.3).unwrap() + 0.3f64.sin()).abs() < 1e-15);

        let g = FunctionModel::exp(1.0);
        let gf = FunctionModel::product(&f, &g);
        let x: f64 = 0.4;
        // (e^x sin x)'' = 2 e^x cos x
        assert!((gf.eval_deriv(2, x).unwrap() - 2.0 * x.exp() * x.cos()).abs() < 1e-14);
        let capped = FunctionModel::product(&f.clone().with_max_order(3), &g);
        assert_eq!(capped.max_order(), 3);
    }

    #[test]
    fn spec_parsing() {
        let s: FunctionSpec = "poly:1,0,0".parse().unwrap();
        let m = s.to_model().unwrap();
        assert_eq!(m.eval(3.0).unwrap(), 9.0);
        let e: FunctionSpec = "exp".parse().unwrap();
        assert_eq!(e.to_model().unwrap().eval(0.0).unwrap(), 1.0);
        assert!("sqrteps:0".parse::<FunctionSpec>().is_err());
        assert!("invquad:1".parse::<FunctionSpec>().is_err());
        assert!("tan".parse::<FunctionSpec>().is_err());
        assert!("sin:a".parse::<FunctionSpec>().is_err());
        let j: FunctionSpec = serde_json::from_str(r#"{"kind":"sin","params":[2.0]}"#).unwrap();
        assert_eq!(j, FunctionSpec::new("sin", &[2.0]));
        assert_eq!(j.to_string(), "sin:2");
    }
}
