//! Seeded experiments that turn every identity of the library into report
//! rows, plus the CSV and JSON report writers.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::ddiff::{
    dd_product_sides, dd_recursion_sides, dd_simplex_oracle, divided_difference, NodeList, ORACLE_MAX_ORDER,
};
use crate::error::{Error, Result};
use crate::funcmodel::{factorial, FunctionKind, FunctionModel, FunctionSpec};
use crate::linalg::{schatten_norm, ComplexMatrix, EigenDecomposition, HermitianMatrix, SchattenIndex, C64};
use crate::moi::{
    moi_apply, moi_commuting_check, moi_compose_check, moi_insert_check, moi_split_check, GridKernel, MoiKernel,
};
use crate::perturb::{
    boundedness_ratio, continuity_sweep, derivative_report, perturbation_formula_residual,
    polynomial_path_derivative, taylor_remainder, uniform_grid, PerturbationPath,
};
use crate::residual::Residual;
use crate::rng::{random_complex, random_hermitian_with_norm, SplitMix64};

pub const MAX_DIM: usize = 64;
pub const MAX_ORDER: usize = 4;
/// Spectral norm of the random base matrices `A`.
pub const BASE_SPECTRAL_NORM: f64 = 2.0;
/// Schatten-2 norm of the random perturbation directions `K`.
pub const DIRECTION_NORM: f64 = 1.0;
/// Minimum node separation for the permutation check.
pub const SYMMETRY_MIN_GAP: f64 = 1e-3;
/// Default number of coarse intervals of the continuity grid on `[−1, 1]`.
pub const DEFAULT_CONTINUITY_GRID: usize = 200;
/// Parameter values at which derivatives are compared.
pub const DERIVATIVE_TIMES: [f64; 2] = [0.0, 0.2];

/// The experiment families, one per subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ddiff,
    Moi,
    Derivative,
    Perturb,
    Taylor,
    Continuity,
    Ratio,
    Suite,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Ddiff,
        Command::Moi,
        Command::Derivative,
        Command::Perturb,
        Command::Taylor,
        Command::Continuity,
        Command::Ratio,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Ddiff => "ddiff",
            Command::Moi => "moi",
            Command::Derivative => "derivative",
            Command::Perturb => "perturb",
            Command::Taylor => "taylor",
            Command::Continuity => "continuity",
            Command::Ratio => "ratio",
            Command::Suite => "suite",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Default tolerance per check family.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("ddiff.symmetry", 1e-9),
        ("ddiff.collapse", 1e-10),
        ("ddiff.oracle", 1e-6),
        ("ddiff.recursion", 1e-10),
        ("ddiff.product", 1e-8),
        ("moi.tensor", 1e-10),
        ("moi.compose", 1e-10),
        ("moi.split", 1e-10),
        ("moi.insert", 1e-10),
        ("moi.commuting", 1e-9),
        ("derivative.fd", 1e-5),
        ("derivative.poly", 1e-11),
        ("perturb.formula", 1e-9),
        ("taylor.identity", 1e-9),
        ("taylor.vanishing", 1e-12),
        ("taylor.ratio", 10.0),
        ("continuity.halving", 0.75),
        ("ratio.stability", 10.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// A configuration field that failed to parse or validate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn default_seed() -> u64 {
    42
}
fn default_dim() -> usize {
    4
}
fn default_order() -> usize {
    2
}
fn default_p_values() -> Vec<f64> {
    vec![1.5, 2.0, 3.0, 4.0]
}
fn default_function() -> FunctionSpec {
    FunctionSpec::new("exp", &[1.0])
}
fn default_trials() -> usize {
    10
}

/// Resolved experiment configuration.
///
/// `tolerances` overrides the defaults of [`default_tolerances`] by family
/// name. `slot` restricts slot-indexed checks to one slot, `step` overrides
/// the finite-difference step, `grid` is the coarse interval count of the
/// continuity sweep, and `a_matrix`/`k_matrix` load fixed path matrices
/// from matrix files instead of sampling them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_p_values")]
    pub p_values: Vec<f64>,
    #[serde(default = "default_function")]
    pub function: FunctionSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_tolerances")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_matrix: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_matrix: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: default_seed(),
            dim: default_dim(),
            order: default_order(),
            p_values: default_p_values(),
            function: default_function(),
            trials: default_trials(),
            tolerances: default_tolerances(),
            slot: None,
            step: None,
            grid: None,
            a_matrix: None,
            k_matrix: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON config; errors name the offending field.
    pub fn from_json(text: &str) -> std::result::Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "config".to_string() } else { path };
            ConfigError::new(field, e.into_inner().to_string())
        })?;
        // explicit overrides merge into the defaults
        let mut tolerances = default_tolerances();
        tolerances.append(&mut cfg.tolerances);
        cfg.tolerances = tolerances;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(ConfigError::new("dim", format!("must be in 1..={MAX_DIM}, got {}", self.dim)));
        }
        if self.order == 0 || self.order > MAX_ORDER {
            return Err(ConfigError::new("order", format!("must be in 1..={MAX_ORDER}, got {}", self.order)));
        }
        if self.p_values.is_empty() {
            return Err(ConfigError::new("p_values", "must not be empty"));
        }
        if let Some(p) = self.p_values.iter().find(|p| !(p.is_finite() && **p > 1.0)) {
            return Err(ConfigError::new("p_values", format!("every p must be a finite real > 1, got {p}")));
        }
        if self.trials == 0 {
            return Err(ConfigError::new("trials", "must be at least 1"));
        }
        for (name, tol) in &self.tolerances {
            if !(tol.is_finite() && *tol >= 0.0) {
                return Err(ConfigError::new(
                    format!("tolerances.{name}"),
                    format!("must be a finite nonnegative real, got {tol}"),
                ));
            }
            if !default_tolerances().contains_key(name) {
                return Err(ConfigError::new(format!("tolerances.{name}"), "unknown check family"));
            }
        }
        let model = self
            .function
            .to_model()
            .map_err(|e| ConfigError::new("function", e.to_string()))?;
        if model.max_order() < self.order {
            return Err(ConfigError::new(
                "function",
                format!("{} supports derivatives only up to order {}", self.function, model.max_order()),
            ));
        }
        if self.slot == Some(0) {
            return Err(ConfigError::new("slot", "slots are numbered from 1"));
        }
        if let Some(h) = self.step {
            if !(h.is_finite() && h > 0.0) {
                return Err(ConfigError::new("step", format!("must be a positive real, got {h}")));
            }
        }
        if self.grid == Some(0) {
            return Err(ConfigError::new("grid", "must be at least 1"));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<FunctionModel> {
        self.function.to_model()
    }

    pub fn schatten_indices(&self) -> Result<Vec<SchattenIndex>> {
        self.p_values.iter().map(|&p| SchattenIndex::new(p)).collect()
    }

    pub fn tolerance(&self, family: &str) -> f64 {
        self.tolerances
            .get(family)
            .copied()
            .unwrap_or_else(|| default_tolerances()[family])
    }

    fn slots(&self, lo: usize, hi: usize) -> Vec<usize> {
        match self.slot {
            Some(j) if (lo..=hi).contains(&j) => vec![j],
            Some(_) => Vec::new(),
            None => (lo..=hi).collect(),
        }
    }
}

/// One line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub seed: u64,
    pub trial: usize,
    pub check: String,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ReportRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(seed: u64, trial: usize, check: String, lhs: f64, rhs: f64, abs: f64, rel: f64, tolerance: f64) -> Self {
        ReportRow {
            seed,
            trial,
            check,
            lhs_norm: lhs,
            rhs_norm: rhs,
            abs_err: abs,
            rel_err: rel,
            tolerance,
            pass: rel <= tolerance,
        }
    }
}

/// Receives report rows as they are produced.
pub trait RowSink {
    fn emit(&mut self, row: ReportRow) -> io::Result<()>;
}

impl RowSink for Vec<ReportRow> {
    fn emit(&mut self, row: ReportRow) -> io::Result<()> {
        self.push(row);
        Ok(())
    }
}

/// Failure of a run: a numerical or argument error, or an output error.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Numeric(#[from] Error),
    #[error("writing report failed: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Pass/fail tally of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub rows: usize,
    pub failed: usize,
}

impl RunSummary {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

struct Emitter<'a> {
    cfg: &'a ExperimentConfig,
    sink: &'a mut dyn RowSink,
    summary: RunSummary,
}

impl Emitter<'_> {
    #[allow(clippy::too_many_arguments)]
    fn raw(&mut self, trial: usize, family: &str, label: String, lhs: f64, rhs: f64, abs: f64, rel: f64) -> io::Result<()> {
        let check = if label.is_empty() { family.to_string() } else { format!("{family}[{label}]") };
        let row = ReportRow::new(self.cfg.seed, trial, check, lhs, rhs, abs, rel, self.cfg.tolerance(family));
        self.summary.rows += 1;
        if !row.pass {
            self.summary.failed += 1;
        }
        self.sink.emit(row)
    }

    fn residual(&mut self, trial: usize, family: &str, label: String, r: Residual) -> io::Result<()> {
        self.raw(trial, family, label, r.lhs_norm, r.rhs_norm, r.abs_err, r.rel_err())
    }

    fn scalar(&mut self, trial: usize, family: &str, label: String, lhs: f64, rhs: f64) -> io::Result<()> {
        let abs = (lhs - rhs).abs();
        let rel = abs / (1.0 + lhs.abs().max(rhs.abs()));
        self.raw(trial, family, label, lhs.abs(), rhs.abs(), abs, rel)
    }
}

/// Runs one subcommand (or the whole suite), streaming rows into `sink`.
pub fn run(command: Command, cfg: &ExperimentConfig, sink: &mut dyn RowSink) -> std::result::Result<RunSummary, RunError> {
    cfg.validate()?;
    let mut em = Emitter {
        cfg,
        sink,
        summary: RunSummary::default(),
    };
    match command {
        Command::Suite => {
            for c in Command::ALL {
                run_one(c, &mut em)?;
            }
        }
        c => run_one(c, &mut em)?,
    }
    Ok(em.summary)
}

fn run_one(command: Command, em: &mut Emitter<'_>) -> std::result::Result<(), RunError> {
    match command {
        Command::Ddiff => run_ddiff(em),
        Command::Moi => run_moi(em),
        Command::Derivative => run_derivative(em),
        Command::Perturb => run_perturb(em),
        Command::Taylor => run_taylor(em),
        Command::Continuity => run_continuity(em),
        Command::Ratio => run_ratio(em),
        Command::Suite => unreachable!("suite is expanded by run"),
    }
}

fn trial_rng(cfg: &ExperimentConfig, trial: usize) -> SplitMix64 {
    SplitMix64::for_trial(cfg.seed, trial as u64)
}

/// `count` nodes in `[−2, 2]` with pairwise separation at least `gap`.
pub fn separated_nodes(rng: &mut SplitMix64, count: usize, gap: f64) -> Vec<f64> {
    loop {
        let mut xs: Vec<f64> = (0..count).map(|_| rng.uniform_in(-2.0, 2.0)).collect();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).all(|w| w[1] - w[0] >= gap) {
            rng.shuffle(&mut xs);
            return xs;
        }
    }
}

fn run_ddiff(em: &mut Emitter<'_>) -> std::result::Result<(), RunError> {
    let cfg = em.cfg;
    let f = cfg.model()?;
    let g = FunctionModel::cos(1.0);
    let n = cfg.order;
    for trial in 0..cfg.trials {
        let mut rng = trial_rng(cfg, trial);
        let xs = separated_nodes(&mut rng, n + 1, SYMMETRY_MIN_GAP);
        let mut shuffled = xs.clone();
        rng.shuffle(&mut shuffled);
        let base = divided_difference(&f, &NodeList::new(xs.clone())?)?;
        let perm = divided_difference(&f, &NodeList::new(shuffled)?)?;
        em.scalar(trial, "ddiff.symmetry", format!("n={n}"), base, perm)?;

        let x = rng.uniform_in(-2.0, 2.0);
        let collapsed = divided_difference(&f, &NodeList::new(vec![x; n + 1])?)?;
        em.scalar(trial, "ddiff.collapse", format!("n={n}"), collapsed, f.eval_deriv(n, x)? / factorial(n))?;

        let nodes = NodeList::new(xs)?;
        if n <= ORACLE_MAX_ORDER {
            em.scalar(trial, "ddiff.oracle", format!("n={n}"), base, dd_simplex_oracle(&f, &nodes)?)?;
        }
        for j in cfg.slots(1, n) {
            let (lhs, rhs) = dd_recursion_sides(&f, &nodes, j)?;
            em.scalar(trial, "ddiff.recursion", format!("n={n},j={j}"), lhs, rhs)?;
        }
        if g.max_order() >= n {
            let (lhs, rhs) = dd_product_sides(&f, &g, &nodes)?;
            em.scalar(trial, "ddiff.product", format!("n={n}"), lhs, rhs)?;
        }
    }
    Ok(())
}

fn random_spectra(rng: &mut SplitMix64, count: usize, d: usize) -> Result<Vec<EigenDecomposition>> {
    (0..count)
        .map(|_| random_hermitian_with_norm(rng, d, SchattenIndex::Infinity, BASE_SPECTRAL_NORM).eigh())
        .collect()
}

fn random_grid(rng: &mut SplitMix64, order: usize, d: usize) -> MoiKernel {
    MoiKernel::Grid(GridKernel::from_fn(vec![d; order + 1], |_| rng.complex_normal()))
}

/// Random polynomial of degree 2 in `A` with complex coefficients.
fn random_polynomial_in(rng: &mut SplitMix64, a: &ComplexMatrix) -> ComplexMatrix {
    let d = a.rows();
    let (c0, c1, c2) = (rng.complex_normal(), rng.complex_normal(), rng.complex_normal());
    let mut out = ComplexMatrix::identity(d).scale(c0);
    out = &out + &a.scale(c1);
    &out + &(a * a).scale(c2)
}

fn run_moi(em: &mut Emitter<'_>) -> std::result::Result<(), RunError> {
    let cfg = em.cfg;
    let f = cfg.model()?;
    let (n, d) = (cfg.order, cfg.dim);
    for trial in 0..cfg.trials {
        let mut rng = trial_rng(cfg, trial);
        let es = random_spectra(&mut rng, n + 1, d)?;
        let sp: Vec<&EigenDecomposition> = es.iter().collect();
        let ops: Vec<ComplexMatrix> = (0..n).map(|_| random_complex(&mut rng, d, d)).collect();

        let factors: Vec<Vec<C64>> = (0..=n).map(|_| (0..d).map(|_| rng.complex_normal()).collect()).collect();
        let got = moi_apply(&MoiKernel::TensorProduct(factors.clone()), &sp, &ops)?;
        let mut chain = sp[0].apply_values(&factors[0]);
        for k in 0..n {
            chain = &(&chain * &ops[k]) * &sp[k + 1].apply_values(&factors[k + 1]);
        }
        em.residual(trial, "moi.tensor", format!("n={n}"), Residual::frobenius(&got, &chain))?;

        let phi = random_grid(&mut rng, n, d);
        let inner = random_grid(&mut rng, 1, d);
        for j in cfg.slots(1, n) {
            let r = moi_compose_check(&phi, &inner, j, &sp, &ops)?;
            em.residual(trial, "moi.compose", format!("n={n},j={j}"), r)?;
        }
        for j in cfg.slots(2, n) {
            let left = random_grid(&mut rng, j - 1, d);
            let right = random_grid(&mut rng, n + 1 - j, d);
            let r = moi_split_check(&left, &right, j, &sp, &ops)?;
            em.residual(trial, "moi.split", format!("n={n},j={j}"), r)?;
        }
        let reduced = random_grid(&mut rng, n - 1, d);
        for j in cfg.slots(1, n + 1) {
            let r = moi_insert_check(&reduced, j, &sp, &ops)?;
            em.residual(trial, "moi.insert", format!("n={n},j={j}"), r)?;
        }

        let a = random_hermitian_with_norm(&mut rng, d, SchattenIndex::Infinity, BASE_SPECTRAL_NORM);
        let zs: Vec<ComplexMatrix> = (0..n).map(|_| random_polynomial_in(&mut rng, a.as_matrix())).collect();
        let r = moi_commuting_check(&f, n, &a, &zs)?;
        em.residual(trial, "moi.commuting", format!("n={n}"), r)?;
    }
    Ok(())
}

fn load_matrix(path: &PathBuf, field: &str) -> std::result::Result<HermitianMatrix, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(field, format!("cannot read {}: {e}", path.display())))?;
    let m: ComplexMatrix = serde_json::from_str(&text)
        .map_err(|e| ConfigError::new(field, format!("bad matrix file {}: {e}", path.display())))?;
    HermitianMatrix::new(m).map_err(|e| ConfigError::new(field, e.to_string()).into())
}

fn trial_path(cfg: &ExperimentConfig, rng: &mut SplitMix64, f: &FunctionModel) -> std::result::Result<PerturbationPath, RunError> {
    let d = cfg.dim;
    let a = random_hermitian_with_norm(rng, d, SchattenIndex::Infinity, BASE_SPECTRAL_NORM);
    let k = random_hermitian_with_norm(rng, d, SchattenIndex::Finite(2.0), DIRECTION_NORM);
    let a = match &cfg.a_matrix {
        Some(p) => load_matrix(p, "a_matrix")?,
        None => a,
    };
    let k = match &cfg.k_matrix {
        Some(p) => load_matrix(p, "k_matrix")?,
        None => k,
    };
    if a.dim() != d || k.dim() != d {
        return Err(ConfigError::new("dim", format!("matrix files must be {d}x{d}")).into());
    }
    Ok(PerturbationPath::new(a, k, f.clone())?)
}

fn run_derivative(em: &mut Emitter<'_>) -> std::result::Result<(), RunError> {
    let cfg = em.cfg;
    let f = cfg.model()?;
    let ps = cfg.schatten_indices()?;
    let is_poly = matches!(f.kind(), FunctionKind::Polynomial(_));
    for trial in 0..cfg.trials {
        let mut rng = trial_rng(cfg, trial);
        let path = trial_path(cfg, &mut rng, &f)?;
        for k in 1..=cfg.order {
            for t in DERIVATIVE_TIMES {
                let report = match cfg.step {
                    Some(h) => {
                        let moi = crate::perturb::derivative_moi(&path, k, t)?;
                        let fd = crate::perturb::derivative_fd(&path, k, t, h)?;
                        crate::perturb::DerivativeReport {
                            order: k,
                            t,
                            schatten_errors: relative_errors(&moi, &fd, &ps)?,
                            moi_value: moi,
                            fd_value: fd,
                        }
                    }
                    None => derivative_report(&path, k, t, &ps)?,
                };
                for &(p, rel) in &report.schatten_errors {
                    let lhs = schatten_norm(&report.moi_value, p)?;
                    let rhs = schatten_norm(&report.fd_value, p)?;
                    let abs = schatten_norm(&(&report.moi_value - &report.fd_value), p)?;
                    em.raw(trial, "derivative.fd", format!("k={k},t={t},p={p}"), lhs, rhs, abs, rel)?;
                }
                if is_poly {
                    let exact = polynomial_path_derivative(&path, k, t)?;
                    let errs = relative_errors(&report.moi_value, &exact, &ps)?;
                    for (p, rel) in errs {
                        let lhs = schatten_norm(&report.moi_value, p)?;
                        let rhs = schatten_norm(&exact, p)?;
                        let abs = schatten_norm(&(&report.moi_value - &exact), p)?;
                        em.raw(trial, "derivative.poly", format!("k={k},t={t},p={p}"), lhs, rhs, abs, rel)?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// `‖x − reference‖_p / ‖reference‖_p`, or the plain norm when the reference vanishes.
pub fn relative_errors(x: &ComplexMatrix, reference: &ComplexMatrix, ps: &[SchattenIndex]) -> Result<Vec<(SchattenIndex, f64)>> {
    let diff = x - reference;
    ps.iter()
        .map(|&p| {
            let denom = schatten_norm(reference, p)?;
            let num = schatten_norm(&diff, p)?;
            Ok((p, if denom > 0.0 { num / denom } else { num }))
        })
        .collect()
}

fn run_perturb(em: &mut Emitter<'_>) -> std::result::Result<(), RunError> {
    let cfg = em.cfg;
    let f = cfg.model()?;
    let ps = cfg.schatten_indices()?;
    let (n, d) = (cfg.order, cfg.dim);
    for trial in 0..cfg.trials {
        let mut rng = trial_rng(cfg, trial);
        let a = random_hermitian_with_norm(&mut rng, d, SchattenIndex::Infinity, BASE_SPECTRAL_NORM);
        let b = random_hermitian_with_norm(&mut rng, d, SchattenIndex::Infinity, BASE_SPECTRAL_NORM);
        let background: Vec<HermitianMatrix> = (0..n - 1)
            .map(|_| random_hermitian_with_norm(&mut rng, d, SchattenIndex::Infinity, BASE_SPECTRAL_NORM))
            .collect();
        let ks: Vec<ComplexMatrix> = (0..n - 1).map(|_| random_complex(&mut rng, d, d)).collect();
        for j in cfg.slots(1, n) {
            for &p in &ps {
                let r = perturbation_formula_residual(&background, &a, &b, &f, n, j, &ks, p)?;
                em.residual(trial, "perturb.formula", format!("n={n},j={j},p={p}"), r)?;
            }
        }
    }
    Ok(())
}

/// Median of a nonempty list.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn run_taylor(em: &mut Emitter<'_>) -> std::result::Result<(), RunError> {
    let cfg = em.cfg;
    let f = cfg.model()?;
    let ps = cfg.schatten_indices()?;
    let n = cfg.order;
    let vanishing = match f.kind() {
        FunctionKind::Polynomial(c) => c.iter().rposition(|&x| x != 0.0).is_none_or(|deg| deg < n),
        _ => false,
    };
    // ratios[p][trial] = (‖R‖_p, denominator, ratio)
    let mut ratios: Vec<Vec<Option<(f64, f64, f64)>>> = vec![Vec::new(); ps.len()];
    for trial in 0..cfg.trials {
        let mut rng = trial_rng(cfg, trial);
        let path = trial_path(cfg, &mut rng, &f)?;
        for (pi, &p) in ps.iter().enumerate() {
            let rem = taylor_remainder(&path, n, p)?;
            em.residual(trial, "taylor.identity", format!("n={n},p={p}"), rem.residual)?;
            if vanishing {
                let direct = schatten_norm(&rem.direct, p)?;
                let moi = schatten_norm(&rem.moi, p)?;
                let size = direct.max(moi);
                em.raw(trial, "taylor.vanishing", format!("n={n},p={p}"), direct, moi, size, size / (1.0 + size))?;
            }
            let direct_norm = rem.residual.lhs_norm;
            ratios[pi].push(rem.ratio.map(|r| (direct_norm, direct_norm / r, r)));
        }
    }
    if vanishing {
        return Ok(());
    }
    for (pi, &p) in ps.iter().enumerate() {
        let finite: Vec<f64> = ratios[pi].iter().flatten().map(|r| r.2).filter(|r| r.is_finite()).collect();
        let med = if finite.is_empty() { f64::NAN } else { median(&finite) };
        for (trial, entry) in ratios[pi].iter().enumerate() {
            let (lhs, rhs, ratio) = entry.unwrap_or((f64::NAN, 0.0, f64::NAN));
            em.raw(trial, "taylor.ratio", format!("n={n},p={p}"), lhs, rhs, ratio, ratio / med)?;
        }
    }
    Ok(())
}

fn run_continuity(em: &mut Emitter<'_>) -> std::result::Result<(), RunError> {
    let cfg = em.cfg;
    let f = cfg.model()?;
    let ps = cfg.schatten_indices()?;
    let k = cfg.order;
    let coarse_count = cfg.grid.unwrap_or(DEFAULT_CONTINUITY_GRID);
    let coarse = uniform_grid(-1.0, 1.0, coarse_count);
    let fine = uniform_grid(-1.0, 1.0, 2 * coarse_count);
    for trial in 0..cfg.trials {
        let mut rng = trial_rng(cfg, trial);
        let path = trial_path(cfg, &mut rng, &f)?;
        for &p in &ps {
            let c = continuity_sweep(&path, k, &coarse, p)?.max_increment;
            let fi = continuity_sweep(&path, k, &fine, p)?.max_increment;
            let ratio = if c == 0.0 && fi == 0.0 { 0.0 } else { fi / c };
            em.raw(trial, "continuity.halving", format!("k={k},p={p}"), fi, c, fi, ratio)?;
        }
    }
    Ok(())
}

fn run_ratio(em: &mut Emitter<'_>) -> std::result::Result<(), RunError> {
    let cfg = em.cfg;
    let f = cfg.model()?;
    let ps = cfg.schatten_indices()?;
    let (n, d) = (cfg.order, cfg.dim);
    // per p: (trial, ‖Γ‖_p, denominator, ratio)
    let mut rows: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); ps.len()];
    for trial in 0..cfg.trials {
        let mut rng = trial_rng(cfg, trial);
        let es = random_spectra(&mut rng, n + 1, d)?;
        let sp: Vec<&EigenDecomposition> = es.iter().collect();
        let ops: Vec<ComplexMatrix> = (0..n).map(|_| random_complex(&mut rng, d, d)).collect();
        let value = moi_apply(&MoiKernel::divided_difference(f.clone(), n), &sp, &ops)?;
        for (pi, &p) in ps.iter().enumerate() {
            let entry = match boundedness_ratio(&f, n, &sp, &ops, p) {
                Ok(r) => {
                    let num = schatten_norm(&value, p)?;
                    (num, num / r, r)
                }
                Err(Error::DivisionDegenerate(den)) => (schatten_norm(&value, p)?, den, f64::NAN),
                Err(e) => return Err(e.into()),
            };
            rows[pi].push(entry);
        }
    }
    for (pi, &p) in ps.iter().enumerate() {
        let finite: Vec<f64> = rows[pi].iter().map(|r| r.2).filter(|r| r.is_finite()).collect();
        let med = if finite.is_empty() { f64::NAN } else { median(&finite) };
        for (trial, &(num, den, ratio)) in rows[pi].iter().enumerate() {
            em.raw(trial, "ratio.stability", format!("n={n},p={p}"), num, den, ratio, ratio / med)?;
        }
    }
    Ok(())
}

/// Output format of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const CSV_COLUMNS: [&str; 8] = ["trial", "check", "lhs_norm", "rhs_norm", "abs_err", "rel_err", "tolerance", "pass"];

/// Formats a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Streams rows to a writer as CSV or as a JSON document
/// `{"header": <config>, "rows": [...]}`.
#[allow(clippy::large_enum_variant)]
pub enum ReportWriter<W: Write> {
    Csv(csv::Writer<W>),
    Json { out: W, rows_written: usize },
}

impl<W: Write> ReportWriter<W> {
    pub fn new(format: ReportFormat, mut out: W, cfg: &ExperimentConfig) -> io::Result<Self> {
        match format {
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(CSV_COLUMNS)?;
                w.flush()?;
                Ok(ReportWriter::Csv(w))
            }
            ReportFormat::Json => {
                write!(out, "{{\"header\":")?;
                serde_json::to_writer(&mut out, cfg)?;
                write!(out, ",\"rows\":[")?;
                Ok(ReportWriter::Json { out, rows_written: 0 })
            }
        }
    }

    pub fn finish(self) -> io::Result<W> {
        match self {
            ReportWriter::Csv(w) => w.into_inner().map_err(|e| e.into_error()),
            ReportWriter::Json { mut out, .. } => {
                writeln!(out, "]}}")?;
                out.flush()?;
                Ok(out)
            }
        }
    }
}

impl<W: Write> RowSink for ReportWriter<W> {
    fn emit(&mut self, row: ReportRow) -> io::Result<()> {
        match self {
            ReportWriter::Csv(w) => {
                w.write_record([
                    row.trial.to_string(),
                    row.check.clone(),
                    format_float(row.lhs_norm),
                    format_float(row.rhs_norm),
                    format_float(row.abs_err),
                    format_float(row.rel_err),
                    format_float(row.tolerance),
                    row.pass.to_string(),
                ])?;
                w.flush()
            }
            ReportWriter::Json { out, rows_written } => {
                if *rows_written > 0 {
                    write!(out, ",")?;
                }
                serde_json::to_writer(&mut *out, &row)?;
                *rows_written += 1;
                out.flush()
            }
        }
    }
}
