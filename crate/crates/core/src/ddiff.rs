//! Divided differences on arbitrary real nodes.
//!
//! Nodes are sorted and chain-linked into clusters (gap at most
//! `1e-6·(1 + max|x_i|)`). A confluent Newton table is then built over the
//! sorted nodes: entries whose nodes all fall inside one cluster are
//! evaluated from the Taylor data of `f` at the cluster mean. Entries that
//! span more than one cluster but less than `NEAR_SPAN_REL·(1 + max|x_i|)`
//! use a Taylor series about the entry midpoint, summed until it converges;
//! the difference quotient would lose about `eps/span^k` there. Every other
//! entry uses the usual difference quotient. Sorting first makes the result
//! bitwise invariant under permutations of the input.

use crate::error::{Error, Result};
use crate::funcmodel::{factorial, FunctionModel};

/// Relative cluster threshold.
pub const CLUSTER_REL_GAP: f64 = 1e-6;
/// Taylor terms used beyond the leading one inside a cluster, when the model
/// provides them.
const CLUSTER_EXTRA_TERMS: usize = 3;
/// Relative span below which a non-clustered entry is expanded about its
/// midpoint instead of formed as a quotient.
pub const NEAR_SPAN_REL: f64 = 2e-2;
/// Most Taylor terms tried for a near entry before falling back.
const NEAR_MAX_TERMS: usize = 40;
/// Gauss–Legendre points per axis of the simplex oracle.
pub const ORACLE_POINTS: usize = 32;
pub const ORACLE_MAX_ORDER: usize = 3;

/// Nodes `(x_0, …, x_n)` of an order-`n` divided difference.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeList(Vec<f64>);

impl NodeList {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("node list must not be empty".into()));
        }
        if let Some(x) = nodes.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("node {x} is not finite")));
        }
        Ok(NodeList(nodes))
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The list with slot `slot` removed.
    pub fn without(&self, slot: usize) -> Result<NodeList> {
        let mut v = self.0.clone();
        v.remove(slot);
        NodeList::new(v)
    }

    pub fn hull(&self) -> (f64, f64) {
        let lo = self.0.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

impl TryFrom<&[f64]> for NodeList {
    type Error = Error;

    fn try_from(v: &[f64]) -> Result<Self> {
        NodeList::new(v.to_vec())
    }
}

/// Groups of node indices that are chain-linked by small gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPartition {
    /// Indices into the original node list; groups ordered by representative.
    pub groups: Vec<Vec<usize>>,
    /// Mean of each group.
    pub representatives: Vec<f64>,
}

pub fn cluster_threshold(nodes: &[f64]) -> f64 {
    let scale = nodes.iter().map(|x| x.abs()).fold(0.0, f64::max);
    CLUSTER_REL_GAP * (1.0 + scale)
}

pub fn cluster_partition(xs: &NodeList) -> ClusterPartition {
    let nodes = xs.as_slice();
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
    let thr = cluster_threshold(nodes);

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (pos, &idx) in order.iter().enumerate() {
        let linked = pos > 0 && nodes[idx] - nodes[order[pos - 1]] <= thr;
        if linked {
            groups.last_mut().expect("first node opens a group").push(idx);
        } else {
            groups.push(vec![idx]);
        }
    }
    let representatives = groups
        .iter()
        .map(|g| g.iter().map(|&i| nodes[i]).sum::<f64>() / g.len() as f64)
        .collect();
    ClusterPartition {
        groups,
        representatives,
    }
}

/// `f^[n](x_0, …, x_n)`.
pub fn divided_difference(f: &FunctionModel, xs: &NodeList) -> Result<f64> {
    let n = xs.order();
    let partition = cluster_partition(xs);
    let nodes = xs.as_slice();

    // sorted nodes with their cluster id
    let mut sorted = Vec::with_capacity(n + 1);
    let mut cluster_of = Vec::with_capacity(n + 1);
    for (g, group) in partition.groups.iter().enumerate() {
        f.check_order(group.len() - 1)?;
        for &i in group {
            sorted.push(nodes[i]);
            cluster_of.push(g);
        }
    }

    let near = NEAR_SPAN_REL * cluster_threshold(nodes) / CLUSTER_REL_GAP;
    let mut table: Vec<f64> = sorted.iter().map(|&x| f.eval(x)).collect::<Result<_>>()?;
    for k in 1..=n {
        for i in 0..=(n - k) {
            let span = sorted[i + k] - sorted[i];
            table[i] = if cluster_of[i] == cluster_of[i + k] {
                let c = partition.representatives[cluster_of[i]];
                confluent_value(f, c, &sorted[i..=i + k])?
            } else {
                let expanded = if span <= near { near_value(f, &sorted[i..=i + k]) } else { None };
                expanded.unwrap_or_else(|| (table[i + 1] - table[i]) / span)
            };
        }
    }
    Ok(table[0])
}

/// Divided difference of `f` at nodes clustered around `c`, from
/// `f = Σ_m f^(m)(c)/m! (x−c)^m` and `[(x−c)^m][y_0..y_k] = h_{m−k}(y − c)`
/// (complete homogeneous symmetric polynomials).
fn confluent_value(f: &FunctionModel, c: f64, nodes: &[f64]) -> Result<f64> {
    let k = nodes.len() - 1;
    let last = k.saturating_add(CLUSTER_EXTRA_TERMS).min(f.max_order());
    let offsets: Vec<f64> = nodes.iter().map(|x| x - c).collect();
    let h = complete_homogeneous(&offsets, last - k);
    let mut sum = 0.0;
    // smallest terms first
    for m in (k..=last).rev() {
        let hm = h[m - k];
        if hm == 0.0 {
            continue;
        }
        sum += f.eval_deriv(m, c)? / factorial(m) * hm;
    }
    Ok(sum)
}

/// Divided difference at nodes of small span, from the Taylor series about
/// their midpoint. `None` when the series does not settle within
/// `NEAR_MAX_TERMS` terms or the model runs out of exact derivatives.
fn near_value(f: &FunctionModel, nodes: &[f64]) -> Option<f64> {
    let k = nodes.len() - 1;
    let c = 0.5 * (nodes[0] + nodes[k]);
    let offsets: Vec<f64> = nodes.iter().map(|x| x - c).collect();
    let h = complete_homogeneous(&offsets, NEAR_MAX_TERMS);
    let mut terms = Vec::with_capacity(NEAR_MAX_TERMS + 1);
    let mut largest: f64 = 0.0;
    let mut quiet = 0;
    for (j, hj) in h.iter().enumerate() {
        let m = k + j;
        if m > f.max_order() || m > 170 {
            return None;
        }
        let t = f.eval_deriv(m, c).ok()? / factorial(m) * hj;
        if !t.is_finite() {
            return None;
        }
        largest = largest.max(t.abs());
        terms.push(t);
        // two consecutive negligible terms, since odd or even terms may vanish
        quiet = if t.abs() <= 0.1 * f64::EPSILON * largest { quiet + 1 } else { 0 };
        if quiet == 2 {
            return Some(terms.iter().rev().sum());
        }
    }
    None
}

/// `h_0, …, h_degree` of the given variables.
fn complete_homogeneous(vars: &[f64], degree: usize) -> Vec<f64> {
    let mut h = vec![0.0; degree + 1];
    h[0] = 1.0;
    for &y in vars {
        for j in 1..=degree {
            h[j] += y * h[j - 1];
        }
    }
    h
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(points: usize) -> (Vec<f64>, Vec<f64>) {
    let n = points;
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = 0.5 * (1.0 - x);
        xs[n - 1 - i] = 0.5 * (1.0 + x);
        ws[i] = 0.5 * w;
        ws[n - 1 - i] = 0.5 * w;
    }
    (xs, ws)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `∫_{R_n} f^(n)(Σ_j s_j x_j) ds` over the standard simplex with
/// `s_0 = 1 − Σ_{j≥1} s_j`, by iterated Gauss–Legendre quadrature on the
/// collapsed cube `s_j = u_j Π_{i<j}(1 − u_i)`.
pub fn dd_simplex_oracle(f: &FunctionModel, xs: &NodeList) -> Result<f64> {
    let n = xs.order();
    if n > ORACLE_MAX_ORDER {
        return Err(Error::UnsupportedOrder(n));
    }
    f.check_order(n)?;
    let x = xs.as_slice();
    if n == 0 {
        return f.eval(x[0]);
    }
    let (nodes, weights) = gauss_legendre_unit(ORACLE_POINTS);

    let mut total = 0.0;
    let mut idx = vec![0usize; n];
    loop {
        // current quadrature point
        let mut remaining = 1.0;
        let mut jac = 1.0;
        let mut weight = 1.0;
        let mut arg = 0.0;
        for (axis, &q) in idx.iter().enumerate() {
            let u = nodes[q];
            let s = u * remaining;
            arg += s * x[axis + 1];
            jac *= remaining;
            remaining *= 1.0 - u;
            weight *= weights[q];
        }
        arg += remaining * x[0];
        total += weight * jac * f.eval_deriv(n, arg)?;

        // odometer increment
        let mut axis = n;
        loop {
            if axis == 0 {
                return Ok(total);
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < ORACLE_POINTS {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// `|f^[n](x)·(x_{j−1} − x_j) − (f^[n−1](x without x_j) − f^[n−1](x without x_{j−1}))|`.
pub fn dd_recursion_residual(f: &FunctionModel, xs: &NodeList, j: usize) -> Result<f64> {
    let (lhs, rhs) = dd_recursion_sides(f, xs, j)?;
    Ok((lhs - rhs).abs())
}

/// Both sides of the recursion identity checked by [`dd_recursion_residual`].
pub fn dd_recursion_sides(f: &FunctionModel, xs: &NodeList, j: usize) -> Result<(f64, f64)> {
    let n = xs.order();
    if n == 0 || j == 0 || j > n {
        return Err(Error::InvalidArgument(format!(
            "slot j={j} must satisfy 1 <= j <= n={n}"
        )));
    }
    let x = xs.as_slice();
    let lhs = divided_difference(f, xs)? * (x[j - 1] - x[j]);
    let rhs = divided_difference(f, &xs.without(j)?)? - divided_difference(f, &xs.without(j - 1)?)?;
    Ok((lhs, rhs))
}

/// Residual of the product identity
/// `f^[n](x)·g(x_0) = (gf)^[n](x) − f(x_n)·g^[n](x) − Σ_{l=1}^{n−1} g^[l](x_0..x_l)·f^[n−l](x_l..x_n)`.
pub fn dd_product_residual(f: &FunctionModel, g: &FunctionModel, xs: &NodeList) -> Result<f64> {
    let (lhs, rhs) = dd_product_sides(f, g, xs)?;
    Ok((lhs - rhs).abs())
}

/// Both sides of the product identity checked by [`dd_product_residual`].
pub fn dd_product_sides(f: &FunctionModel, g: &FunctionModel, xs: &NodeList) -> Result<(f64, f64)> {
    let n = xs.order();
    if n == 0 {
        return Err(Error::InvalidArgument("product identity needs order n >= 1".into()));
    }
    let x = xs.as_slice();
    let gf = FunctionModel::product(f, g);
    let lhs = divided_difference(f, xs)? * g.eval(x[0])?;
    let mut rhs = divided_difference(&gf, xs)? - f.eval(x[n])? * divided_difference(g, xs)?;
    for l in 1..n {
        let head = NodeList::new(x[..=l].to_vec())?;
        let tail = NodeList::new(x[l..].to_vec())?;
        rhs -= divided_difference(g, &head)? * divided_difference(f, &tail)?;
    }
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcmodel::{sup_norm_estimate, Interval};
    use crate::rng::SplitMix64;

    fn nl(v: &[f64]) -> NodeList {
        NodeList::new(v.to_vec()).unwrap()
    }

    fn poly(c: &[f64]) -> FunctionModel {
        FunctionModel::polynomial(c.to_vec())
    }

    fn builtins() -> Vec<FunctionModel> {
        vec![
            FunctionModel::exp(1.0),
            FunctionModel::sin(1.0),
            FunctionModel::cos(1.0),
            poly(&[1.0, -2.0, 0.5, 0.3, -0.1, 0.05]),
            FunctionModel::inv_quad(),
            FunctionModel::sqrt_eps(1.0).unwrap(),
        ]
    }

    /// Nodes in [lo, hi] with pairwise gaps of at least `min_gap`.
    fn spread_nodes(rng: &mut SplitMix64, count: usize, lo: f64, hi: f64, min_gap: f64) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..count).map(|_| rng.uniform_in(lo, hi)).collect();
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            if s.windows(2).all(|w| w[1] - w[0] >= min_gap) {
                return v;
            }
        }
    }

    #[test]
    fn examples() {
        assert_eq!(divided_difference(&poly(&[0.0, 0.0, 1.0]), &nl(&[1.0, 2.0])).unwrap(), 3.0);
        assert_eq!(divided_difference(&poly(&[0.0, 0.0, 0.0, 1.0]), &nl(&[1.0, 1.0, 1.0])).unwrap(), 3.0);
        let e = divided_difference(&FunctionModel::exp(1.0), &nl(&[0.0, 1e-9, 2e-9])).unwrap();
        assert!((e - 0.5).abs() < 1e-6, "{e}");
        assert_eq!(divided_difference(&FunctionModel::exp(1.0), &nl(&[0.0])).unwrap(), 1.0);
    }

    #[test]
    fn partition_groups_close_nodes() {
        let p = cluster_partition(&nl(&[2.0, 0.0, 1e-8, 2.0 + 1e-9, 1.0]));
        assert_eq!(p.groups, vec![vec![1, 2], vec![4], vec![0, 3]]);
        assert!((p.representatives[0] - 5e-9).abs() < 1e-20);
        // chaining: each gap under the threshold links all three
        let q = cluster_partition(&nl(&[0.0, 9e-7, 1.8e-6]));
        assert_eq!(q.groups.len(), 1);
    }

    #[test]
    fn confluent_needs_derivatives() {
        let f = FunctionModel::exp(1.0).with_max_order(1);
        assert_eq!(
            divided_difference(&f, &nl(&[0.5, 0.5, 0.5])),
            Err(Error::OrderExceeded { requested: 2, max: 1 })
        );
        // separated nodes only need function values
        assert!(divided_difference(&f.clone().with_max_order(0), &nl(&[0.0, 1.0, 2.0])).is_ok());
    }

    #[test]
    fn mixed_cluster_matches_limit() {
        // f = x^4: f^[3](a,a,a,b) = 3a + b, independent of how it is reached
        let f = poly(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        let v = divided_difference(&f, &nl(&[0.5, 2.0, 0.5, 0.5])).unwrap();
        assert!((v - 3.5).abs() < 1e-13, "{v}");
        let w = divided_difference(&f, &nl(&[0.5, 2.0, 0.5 + 1e-8, 0.5 - 1e-8])).unwrap();
        assert!((w - 3.5).abs() < 1e-12, "{w}");
    }

    #[test]
    fn permutation_symmetry() {
        let mut rng = SplitMix64::new(17);
        for f in builtins() {
            for n in 1..=4 {
                let mut x = spread_nodes(&mut rng, n + 1, -3.0, 3.0, 1e-3);
                let base = divided_difference(&f, &NodeList::new(x.clone()).unwrap()).unwrap();
                for _ in 0..20 {
                    rng.shuffle(&mut x);
                    let v = divided_difference(&f, &NodeList::new(x.clone()).unwrap()).unwrap();
                    assert!((v - base).abs() <= 1e-9 * base.abs().max(1e-300), "{f} n={n}");
                }
            }
        }
    }

    #[test]
    fn coincident_collapse() {
        let mut rng = SplitMix64::new(5);
        for f in builtins() {
            for n in 0..=4 {
                let x = rng.uniform_in(-3.0, 3.0);
                let v = divided_difference(&f, &nl(&vec![x; n + 1])).unwrap();
                let want = f.eval_deriv(n, x).unwrap() / factorial(n);
                assert!((v - want).abs() <= 1e-10 * want.abs(), "{f} n={n}");
            }
        }
    }

    #[test]
    fn cluster_continuity() {
        let mut rng = SplitMix64::new(23);
        for f in builtins() {
            for n in 1..=4 {
                for _ in 0..10 {
                    let x = rng.uniform_in(-3.0, 3.0);
                    let spread: Vec<f64> = (0..=n).map(|i| x + 1e-4 * i as f64).collect();
                    let a = divided_difference(&f, &NodeList::new(spread).unwrap()).unwrap();
                    let b = divided_difference(&f, &nl(&vec![x; n + 1])).unwrap();
                    assert!((a - b).abs() <= 1e-3 * (1.0 + b.abs()), "{f} n={n} x={x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn equispaced_exp_closed_form() {
        // exp[x_0, x_0 + δ, …, x_0 + nδ] = e^{x_0} (e^δ − 1)^n / (n! δ^n)
        let f = FunctionModel::exp(1.0);
        for n in 1..=4 {
            for &delta in &[1e-9, 1e-7, 1e-5, 1e-4, 1e-3, 5e-3, 1e-2, 3e-2, 0.1, 0.5] {
                for &x0 in &[-3.0, -0.7, 0.0, 1.3, 3.0] {
                    let nodes: Vec<f64> = (0..=n).map(|i| x0 + delta * i as f64).collect();
                    let got = divided_difference(&f, &NodeList::new(nodes).unwrap()).unwrap();
                    let want = f64::exp(x0) * (f64::exp_m1(delta) / delta).powi(n as i32) / factorial(n);
                    let tol = if delta >= 1e-2 { 1e-8 } else { 1e-11 };
                    assert!((got - want).abs() <= tol * want, "n={n} δ={delta} x0={x0}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_unit(ORACLE_POINTS);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // exact up to degree 63
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(63)).sum();
        assert!((int - 1.0 / 64.0).abs() < 1e-15);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn oracle_examples() {
        for n in 1..=3 {
            let f = FunctionModel::normalized_monomial(n);
            let x: Vec<f64> = (0..=n).map(|i| 0.3 * i as f64 - 0.7).collect();
            let v = dd_simplex_oracle(&f, &NodeList::new(x).unwrap()).unwrap();
            assert!((v - 1.0 / factorial(n)).abs() < 1e-14, "n={n} v={v}");
        }
        let half_sq = poly(&[0.0, 0.0, 0.5]);
        let v = dd_simplex_oracle(&half_sq, &nl(&[-1.2, 3.4])).unwrap();
        assert!((v - 1.1).abs() < 1e-14);
        let e = FunctionModel::exp(1.0);
        let xs = nl(&[0.0, 1.0, 2.0]);
        let q = dd_simplex_oracle(&e, &xs).unwrap();
        let r = divided_difference(&e, &xs).unwrap();
        assert!((q - r).abs() < 1e-8);
        assert_eq!(dd_simplex_oracle(&e, &nl(&[0.0; 5])), Err(Error::UnsupportedOrder(4)));
        assert!(dd_simplex_oracle(&e.clone().with_max_order(1), &xs).is_err());
    }

    #[test]
    fn oracle_agreement_random() {
        let mut rng = SplitMix64::new(99);
        for f in builtins() {
            for n in 1..=3 {
                for _ in 0..5 {
                    let x: Vec<f64> = (0..=n).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
                    let xs = NodeList::new(x).unwrap();
                    let q = dd_simplex_oracle(&f, &xs).unwrap();
                    let r = divided_difference(&f, &xs).unwrap();
                    assert!((q - r).abs() <= 1e-6 * (1.0 + r.abs()), "{f} n={n}: {q} vs {r}");
                }
            }
        }
    }

    #[test]
    fn recursion_identity() {
        let cube = poly(&[0.0, 0.0, 0.0, 1.0]);
        assert!(dd_recursion_residual(&cube, &nl(&[0.0, 1.0, 2.0]), 1).unwrap() < 1e-14);
        // coincident neighbours: both sides vanish
        let e = FunctionModel::exp(1.0);
        assert_eq!(dd_recursion_residual(&e, &nl(&[0.3, 0.7, 0.7, 1.0]), 2).unwrap(), 0.0);
        assert!(dd_recursion_residual(&e, &nl(&[0.3, 0.7]), 0).is_err());
        assert!(dd_recursion_residual(&e, &nl(&[0.3, 0.7]), 2).is_err());

        let mut rng = SplitMix64::new(31);
        let s = FunctionModel::sin(1.0);
        for n in 1..=4 {
            for _ in 0..10 {
                let x: Vec<f64> = (0..=n).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
                let xs = NodeList::new(x).unwrap();
                for j in 1..=n {
                    let r = dd_recursion_residual(&s, &xs, j).unwrap();
                    assert!(r <= 1e-10, "n={n} j={j} r={r:e}");
                }
            }
        }
    }

    #[test]
    fn product_identity() {
        let one = poly(&[1.0]);
        let mut rng = SplitMix64::new(41);
        for n in 1..=3 {
            let x: Vec<f64> = (0..=n).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
            let xs = NodeList::new(x).unwrap();
            let r = dd_product_residual(&FunctionModel::sin(1.0), &one, &xs).unwrap();
            assert!(r < 1e-13, "n={n} r={r:e}");
        }
        let id = poly(&[0.0, 1.0]);
        assert!(dd_product_residual(&id, &id, &nl(&[0.4, -1.1])).unwrap() < 1e-15);

        let (f, g) = (FunctionModel::exp(1.0), FunctionModel::inv_quad());
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
            let xs = NodeList::new(x).unwrap();
            let r = dd_product_residual(&f, &g, &xs).unwrap();
            assert!(r <= 1e-8, "r={r:e}");
        }
    }

    #[test]
    fn uniform_bound_by_sup_norm() {
        let mut rng = SplitMix64::new(55);
        for f in builtins() {
            for n in 1..=4 {
                let x: Vec<f64> = (0..=n).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
                let xs = NodeList::new(x).unwrap();
                let (lo, hi) = xs.hull();
                let bound = sup_norm_estimate(&f, n, Interval::new(lo, hi).unwrap()).unwrap() / factorial(n);
                let v = divided_difference(&f, &xs).unwrap();
                assert!(v.abs() <= bound + 1e-9, "{f} n={n}: {v} > {bound}");
            }
        }
    }
}
