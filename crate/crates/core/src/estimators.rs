//! Maximum likelihood and lasso-type estimators, preprocessing, the graphical
//! Gaussian lasso baseline and cross-validated predictive log-likelihood.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::{km_factors, lattice_points, RegionSpec, DEFAULT_POINT_CAP};
use crate::linalg::{Cholesky, EPS_PD};
use crate::maxdet::{
    self, AffineMatrix, LinearConstraint, LogDetTerm, MaxDetProblem, SolveReport, SolveStatus,
    SolverConfig,
};
use crate::model::{cosine_product, fisher_origin, hessian_basis, norm_sq, Density, FrequencySet, Mixm, ParamVector, Sgm};
use crate::par;

/// Coefficients with `|θ̂_u|` below this are reported as exact zeros.
pub const ZERO_THRESHOLD: f64 = 1e-8;

/// `n × m` data, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    m: usize,
    values: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(m: usize, values: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if values.len() % m != 0 {
            return Err(Error::DimensionMismatch { expected: m, got: values.len() % m });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at row {}, column {}",
                i / m,
                i % m
            )));
        }
        Ok(Self { m, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map(|r| r.len()).ok_or_else(|| Error::EmptyData("no rows".into()))?;
        let mut values = Vec::with_capacity(rows.len() * m);
        for r in rows {
            if r.len() != m {
                return Err(Error::DimensionMismatch { expected: m, got: r.len() });
            }
            values.extend_from_slice(r);
        }
        Self::new(m, values)
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.m
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.m..(t + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.m)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, idx: &[usize]) -> SampleMatrix {
        let mut values = Vec::with_capacity(idx.len() * self.m);
        for &t in idx {
            values.extend_from_slice(self.row(t));
        }
        SampleMatrix { m: self.m, values }
    }

    /// Errors unless every entry lies in the closed unit cube.
    pub fn check_unit_cube(&self) -> Result<()> {
        for (i, &v) in self.values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfUnitCube { row: i / self.m, column: i % self.m, value: v });
            }
        }
        Ok(())
    }
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Column means and population standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    pub fn fit(raw: &SampleMatrix) -> Result<Self> {
        let n = raw.n();
        if n < 2 {
            return Err(Error::EmptyData(format!("need at least 2 rows, got {n}")));
        }
        let m = raw.m();
        let mut mean = vec![0.0; m];
        for r in raw.rows() {
            for j in 0..m {
                mean[j] += r[j];
            }
        }
        for v in mean.iter_mut() {
            *v /= n as f64;
        }
        let mut var = vec![0.0; m];
        for r in raw.rows() {
            for j in 0..m {
                let d = r[j] - mean[j];
                var[j] += d * d;
            }
        }
        let sd: Vec<f64> = var.iter().map(|v| (v / n as f64).sqrt()).collect();
        for (j, &s) in sd.iter().enumerate() {
            if !(s > 1e-12 * (1.0 + mean[j].abs())) {
                return Err(Error::ConstantColumn { column: j });
            }
        }
        Ok(Self { mean, sd })
    }

    pub fn apply(&self, raw: &SampleMatrix) -> Result<SampleMatrix> {
        if raw.m() != self.mean.len() {
            return Err(Error::DimensionMismatch { expected: self.mean.len(), got: raw.m() });
        }
        let m = raw.m();
        let values = raw
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % m]) / self.sd[i % m])
            .collect();
        SampleMatrix::new(m, values)
    }
}

/// Elementwise `Φ`.
pub fn to_unit(standardized: &SampleMatrix) -> SampleMatrix {
    SampleMatrix {
        m: standardized.m(),
        values: standardized.values().iter().map(|&v| normal_cdf(v)).collect(),
    }
}

/// Standardizes each column (population sd) and maps it through `Φ`.
pub fn preprocess(raw: &SampleMatrix) -> Result<(SampleMatrix, SampleMatrix)> {
    let s = Standardization::fit(raw)?.apply(raw)?;
    let u = to_unit(&s);
    Ok((s, u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Sgm,
    Mixm,
    Gauss,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgm" => Ok(Self::Sgm),
            "mixm" => Ok(Self::Mixm),
            "gauss" => Ok(Self::Gauss),
            _ => Err(Error::InvalidArgument(format!("unknown model {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub freqs: FrequencySet,
    /// Estimate with components below [`ZERO_THRESHOLD`] set to zero.
    pub theta: Vec<f64>,
    /// Estimate as returned by the solver.
    pub theta_raw: Vec<f64>,
    pub region: RegionSpec,
    pub loglik: f64,
    /// `√J_uu θ̂_u` with `J` the Fisher information at the origin.
    pub scaled: Vec<f64>,
    pub report: SolveReport,
}

impl FitResult {
    pub fn sgm(&self) -> Result<Sgm> {
        Sgm::new(self.freqs.clone(), ParamVector::new(self.theta.clone())?)
    }

    pub fn mixm(&self) -> Result<Mixm> {
        Mixm::new(self.freqs.clone(), ParamVector::new(self.theta.clone())?)
    }
}

fn check_fit_input(data: &SampleMatrix, freqs: &FrequencySet, region: &RegionSpec) -> Result<()> {
    if data.n() == 0 {
        return Err(Error::EmptyData("no samples".into()));
    }
    if data.m() != freqs.dim() {
        return Err(Error::DimensionMismatch { expected: freqs.dim(), got: data.m() });
    }
    data.check_unit_cube()?;
    region.validate(freqs)
}

/// Variable layout for the split `θ_u = p_u − q_u` with `p, q ≥ 0`, stored
/// shifted by `s` so the solver's zero start is interior:
/// `p_u = s + v_u`, `q_u = s + v_{|𝒰|+u}`.
struct Split {
    k: usize,
    shift: f64,
}

impl Split {
    /// `s` chosen so the start uses half of the tightest budget.
    fn new(k: usize, tau: f64, max_weight: f64) -> Self {
        Self { k, shift: tau / (4.0 * max_weight) }
    }

    fn nvars(&self) -> usize {
        2 * self.k
    }

    fn theta(&self, v: &[f64]) -> Vec<f64> {
        (0..self.k).map(|u| v[u] - v[self.k + u]).collect()
    }

    /// `p, q ≥ 0` and `Σ_u w_u (p_u + q_u) ≤ τ` for each weight row.
    fn constraints(&self, weights: &[Vec<f64>], tau: f64) -> Vec<LinearConstraint> {
        let n = self.nvars();
        let mut out = Vec::new();
        for i in 0..n {
            let mut a = vec![0.0; n];
            a[i] = -1.0;
            out.push(LinearConstraint { a, b: self.shift });
        }
        for w in weights {
            let total: f64 = w.iter().sum();
            if total == 0.0 {
                continue;
            }
            let mut a = vec![0.0; n];
            a[..self.k].copy_from_slice(w);
            a[self.k..].copy_from_slice(w);
            out.push(LinearConstraint { a, b: tau - 2.0 * self.shift * total });
        }
        out
    }

    /// Duplicates each coefficient with opposite sign for the `q` block.
    fn expand(&self, coeffs: Vec<(usize, DMatrix<f64>)>) -> Vec<(usize, DMatrix<f64>)> {
        let mut out = Vec::with_capacity(2 * coeffs.len());
        for (u, a) in coeffs {
            out.push((self.k + u, -&a));
            out.push((u, a));
        }
        out
    }
}

fn zero_report(nvars: usize, objective: f64) -> SolveReport {
    SolveReport {
        theta: vec![0.0; nvars],
        objective,
        kkt_residual: 0.0,
        newton_iterations: 0,
        outer_iterations: 0,
        converged: true,
        status: SolveStatus::Converged,
        final_mu: 0.0,
        path: Vec::new(),
    }
}

fn finish(
    model: ModelKind,
    freqs: &FrequencySet,
    region: RegionSpec,
    theta_raw: Vec<f64>,
    report: SolveReport,
) -> FitResult {
    let theta: Vec<f64> = theta_raw
        .iter()
        .map(|&t| if t.abs() < ZERO_THRESHOLD { 0.0 } else { t })
        .collect();
    let scaled = fisher_origin(freqs).iter().zip(&theta).map(|(j, t)| j.sqrt() * t).collect();
    FitResult {
        model,
        freqs: freqs.clone(),
        theta,
        theta_raw,
        region,
        loglik: report.objective,
        scaled,
        report,
    }
}

/// Per-sample basis matrices `H_u(x(t))` as affine coefficients.
fn sgm_coefficients(freqs: &FrequencySet, x: &[f64]) -> Vec<(usize, DMatrix<f64>)> {
    freqs.iter().enumerate().map(|(i, u)| (i, hessian_basis(u, x))).collect()
}

fn mixm_coefficients(freqs: &FrequencySet, x: &[f64]) -> Vec<(usize, DMatrix<f64>)> {
    freqs
        .iter()
        .enumerate()
        .map(|(i, u)| (i, DMatrix::from_element(1, 1, norm_sq(u) * cosine_product(u, x))))
        .collect()
}

/// SGM maximum likelihood over the chosen region.
pub fn fit_sgm(data: &SampleMatrix, freqs: &FrequencySet, region: RegionSpec) -> Result<FitResult> {
    fit_sgm_with(data, freqs, region, &SolverConfig::default())
}

pub fn fit_sgm_with(
    data: &SampleMatrix,
    freqs: &FrequencySet,
    region: RegionSpec,
    config: &SolverConfig,
) -> Result<FitResult> {
    check_fit_input(data, freqs, &region)?;
    let m = freqs.dim();
    let k = freqs.len();
    let identity = DMatrix::<f64>::identity(m, m);
    match region {
        RegionSpec::Lit { tau } => {
            if tau == 0.0 {
                return Ok(finish(ModelKind::Sgm, freqs, region, vec![0.0; k], zero_report(k, 0.0)));
            }
            // axis weights u_j²
            let weights: Vec<Vec<f64>> = (0..m)
                .map(|j| freqs.iter().map(|u| (u[j] as f64).powi(2)).collect())
                .collect();
            let max_weight = weights.iter().map(|w| w.iter().sum::<f64>()).fold(0.0, f64::max);
            let split = Split::new(k, tau, max_weight);
            let mut p = MaxDetProblem::new(split.nvars());
            p.objective_terms = par::map_indexed(data.n(), |t| LogDetTerm {
                weight: 1.0,
                matrix: AffineMatrix::new(identity.clone(), split.expand(sgm_coefficients(freqs, data.row(t)))),
            });
            p.linear_constraints = split.constraints(&weights, tau);
            let report = maxdet::solve(&p, config)?;
            let theta = split.theta(&report.theta);
            Ok(finish(ModelKind::Sgm, freqs, region, theta, report))
        }
        RegionSpec::Lattice { m: res } => {
            let factors = km_factors(freqs, res)?;
            let points = lattice_points(m, res, DEFAULT_POINT_CAP)?;
            let mut p = MaxDetProblem::new(k);
            p.objective_terms = par::map_indexed(data.n(), |t| LogDetTerm {
                weight: 1.0,
                matrix: AffineMatrix::new(identity.clone(), sgm_coefficients(freqs, data.row(t))),
            });
            p.psd_constraints = par::map_slice(&points, |xi| {
                let coeffs = sgm_coefficients(freqs, xi)
                    .into_iter()
                    .map(|(i, h)| (i, h / factors[i]))
                    .collect();
                AffineMatrix::new(identity.clone(), coeffs)
            });
            let report = maxdet::solve(&p, config)?;
            let theta = report.theta.clone();
            Ok(finish(ModelKind::Sgm, freqs, region, theta, report))
        }
    }
}

/// MixM maximum likelihood over the MixM analogue of the chosen region.
pub fn fit_mixm(data: &SampleMatrix, freqs: &FrequencySet, region: RegionSpec) -> Result<FitResult> {
    fit_mixm_with(data, freqs, region, &SolverConfig::default())
}

pub fn fit_mixm_with(
    data: &SampleMatrix,
    freqs: &FrequencySet,
    region: RegionSpec,
    config: &SolverConfig,
) -> Result<FitResult> {
    check_fit_input(data, freqs, &region)?;
    let k = freqs.len();
    let one = DMatrix::from_element(1, 1, 1.0);
    match region {
        RegionSpec::Lit { tau } => {
            if tau == 0.0 {
                return Ok(finish(ModelKind::Mixm, freqs, region, vec![0.0; k], zero_report(k, 0.0)));
            }
            let weights = vec![freqs.iter().map(norm_sq).collect::<Vec<f64>>()];
            let split = Split::new(k, tau, weights[0].iter().sum());
            let mut p = MaxDetProblem::new(split.nvars());
            p.objective_terms = par::map_indexed(data.n(), |t| LogDetTerm {
                weight: 1.0,
                matrix: AffineMatrix::new(one.clone(), split.expand(mixm_coefficients(freqs, data.row(t)))),
            });
            p.linear_constraints = split.constraints(&weights, tau);
            let report = maxdet::solve(&p, config)?;
            let theta = split.theta(&report.theta);
            Ok(finish(ModelKind::Mixm, freqs, region, theta, report))
        }
        RegionSpec::Lattice { m: res } => {
            let factors = km_factors(freqs, res)?;
            let points = lattice_points(freqs.dim(), res, DEFAULT_POINT_CAP)?;
            let mut p = MaxDetProblem::new(k);
            p.objective_terms = par::map_indexed(data.n(), |t| LogDetTerm {
                weight: 1.0,
                matrix: AffineMatrix::new(one.clone(), mixm_coefficients(freqs, data.row(t))),
            });
            // p̃(ξ|K_M θ) > 0 is linear: −Σ_u θ_u ‖u‖² Π cos / k_u < 1
            p.linear_constraints = points
                .iter()
                .map(|xi| LinearConstraint {
                    a: freqs
                        .iter()
                        .enumerate()
                        .map(|(i, u)| -norm_sq(u) * cosine_product(u, xi) / factors[i])
                        .collect(),
                    b: 1.0,
                })
                .collect();
            let report = maxdet::solve(&p, config)?;
            let theta = report.theta.clone();
            Ok(finish(ModelKind::Mixm, freqs, region, theta, report))
        }
    }
}

/// Sample correlation matrix of the columns.
pub fn correlation_matrix(data: &SampleMatrix) -> Result<DMatrix<f64>> {
    let s = Standardization::fit(data)?.apply(data)?;
    let n = s.n() as f64;
    let m = s.m();
    let mut c = DMatrix::zeros(m, m);
    for r in s.rows() {
        for i in 0..m {
            for j in 0..=i {
                c[(i, j)] += r[i] * r[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..=i {
            let v = if i == j { 1.0 } else { c[(i, j)] / n };
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// Concentration matrix estimate of the graphical Gaussian lasso.
#[derive(Debug, Clone)]
pub struct ConcentrationMatrix {
    pub c: DMatrix<f64>,
    pub sigma_hat: DMatrix<f64>,
    pub tau: f64,
    pub report: SolveReport,
}

/// Maximizes `log det C − tr(Σ̂ C)` subject to
/// `Σ_{i<j} |C_ij| ≤ τ Σ_{i<j} |(Σ̂⁻¹)_ij|`, with `Σ̂` the sample correlation.
pub fn fit_gauss_lasso(standardized: &SampleMatrix, tau: f64) -> Result<ConcentrationMatrix> {
    fit_gauss_lasso_with(standardized, tau, &SolverConfig::default())
}

pub fn fit_gauss_lasso_with(
    standardized: &SampleMatrix,
    tau: f64,
    config: &SolverConfig,
) -> Result<ConcentrationMatrix> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("τ = {tau} must lie in [0, 1]")));
    }
    let sigma = correlation_matrix(standardized)?;
    gauss_lasso_from_correlation(&sigma, tau, config)
}

pub fn gauss_lasso_from_correlation(
    sigma: &DMatrix<f64>,
    tau: f64,
    config: &SolverConfig,
) -> Result<ConcentrationMatrix> {
    let m = sigma.nrows();
    let inv = Cholesky::new(sigma, EPS_PD).ok_or(Error::NotPositiveDefinite)?.inverse();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))).collect();
    let budget = tau * pairs.iter().map(|&(i, j)| inv[(i, j)].abs()).sum::<f64>();
    let use_off = budget > 0.0 && !pairs.is_empty();
    let split = Split::new(if use_off { pairs.len() } else { 0 }, budget, pairs.len().max(1) as f64);
    // variables: [d_0..d_{m-1}, split block]
    let nvars = m + split.nvars();
    let mut coeffs = Vec::new();
    let mut c = vec![0.0; nvars];
    for i in 0..m {
        let mut e = DMatrix::zeros(m, m);
        e[(i, i)] = 1.0;
        coeffs.push((i, e));
        c[i] = -sigma[(i, i)];
    }
    if use_off {
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let mut e = DMatrix::zeros(m, m);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            coeffs.push((m + k, e.clone()));
            coeffs.push((m + split.k + k, -e));
            c[m + k] = -2.0 * sigma[(i, j)];
            c[m + split.k + k] = 2.0 * sigma[(i, j)];
        }
    }
    let mut p = MaxDetProblem::new(nvars);
    p.objective_terms.push(LogDetTerm { weight: 1.0, matrix: AffineMatrix::new(DMatrix::identity(m, m), coeffs) });
    p.linear_objective = c;
    if use_off {
        let weights = vec![vec![1.0; split.k]];
        for mut l in split.constraints(&weights, budget) {
            let mut a = vec![0.0; m];
            a.append(&mut l.a);
            l.a = a;
            p.linear_constraints.push(l);
        }
    }
    let report = maxdet::solve(&p, config)?;
    let v = &report.theta;
    let mut cm = DMatrix::identity(m, m);
    for i in 0..m {
        cm[(i, i)] += v[i];
    }
    if use_off {
        let off = split.theta(&v[m..]);
        for (k, &(i, j)) in pairs.iter().enumerate() {
            cm[(i, j)] = off[k];
            cm[(j, i)] = off[k];
        }
    }
    Ok(ConcentrationMatrix { c: cm, sigma_hat: sigma.clone(), tau, report })
}

/// `ρ̂_ij = −C_ij / √(C_ii C_jj)` with unit diagonal.
pub fn partial_correlations(c: &DMatrix<f64>) -> DMatrix<f64> {
    let m = c.nrows();
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            1.0
        } else {
            -c[(i, j)] / (c[(i, i)] * c[(j, j)]).sqrt()
        }
    })
}

/// A fitted model ready for out-of-sample evaluation.
#[derive(Debug, Clone)]
pub enum Fitted {
    Sgm(Sgm),
    Mixm(Mixm),
    Gauss(DMatrix<f64>),
}

/// Held-out log-likelihood relative to the null model (uniform on the cube
/// for SGM/MixM, standard normal for the Gaussian model).
///
/// Returns `-∞` when a test point has nonpositive density.
pub fn predictive_loglik(model: &Fitted, test: &SampleMatrix) -> Result<f64> {
    let terms: Vec<f64> = match model {
        Fitted::Sgm(s) => density_logs(s, test)?,
        Fitted::Mixm(s) => density_logs(s, test)?,
        Fitted::Gauss(c) => {
            if test.m() != c.nrows() {
                return Err(Error::DimensionMismatch { expected: c.nrows(), got: test.m() });
            }
            let chol = Cholesky::new(c, 0.0).ok_or(Error::NotPositiveDefinite)?;
            let half_logdet = 0.5 * chol.log_det();
            test.rows()
                .map(|r| {
                    let d = DVector::from_column_slice(r);
                    half_logdet - 0.5 * d.dot(&(c * &d)) + 0.5 * d.dot(&d)
                })
                .collect()
        }
    };
    Ok(terms.iter().sum())
}

fn density_logs<D: Density>(model: &D, test: &SampleMatrix) -> Result<Vec<f64>> {
    if test.m() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: test.m() });
    }
    Ok(par::map_indexed(test.n(), |t| match model.density(test.row(t)) {
        Ok(p) if p > 0.0 => p.ln(),
        _ => f64::NEG_INFINITY,
    }))
}

/// How data are preprocessed inside cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocessing {
    /// Mean/sd estimated on each training fold and applied to its test fold.
    PerFold,
    /// Mean/sd estimated once on the full data.
    Global,
    /// Data used as given (already in the unit cube, or already standardized).
    None,
}

#[derive(Debug, Clone, Serialize)]
pub struct CvConfig {
    pub model: ModelKind,
    pub taus: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub preprocessing: Preprocessing,
    pub solver: SolverConfig,
}

impl CvConfig {
    pub fn new(model: ModelKind) -> Self {
        Self {
            model,
            taus: default_tau_grid(),
            folds: 5,
            seed: 0,
            preprocessing: Preprocessing::PerFold,
            solver: SolverConfig::default(),
        }
    }
}

/// `{0.1, 0.2, …, 1.0}`.
pub fn default_tau_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CvRow {
    pub tau: f64,
    /// Sum over folds of held-out predictive log-likelihood.
    pub loglik: f64,
    pub per_fold: Vec<f64>,
    pub best: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CvTable {
    pub model: ModelKind,
    pub rows: Vec<CvRow>,
    pub best_tau: f64,
}

/// Fold label of each row: a seeded shuffle dealt round-robin into `k` folds.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

/// Fits `model` at budget `τ` on training data already mapped to the scale
/// the model uses (unit cube for SGM/MixM, standardized for Gaussian).
pub fn fit_model(
    model: ModelKind,
    train: &SampleMatrix,
    freqs: &FrequencySet,
    tau: f64,
    solver: &SolverConfig,
) -> Result<Fitted> {
    Ok(match model {
        ModelKind::Sgm => Fitted::Sgm(fit_sgm_with(train, freqs, RegionSpec::Lit { tau }, solver)?.sgm()?),
        ModelKind::Mixm => Fitted::Mixm(fit_mixm_with(train, freqs, RegionSpec::Lit { tau }, solver)?.mixm()?),
        ModelKind::Gauss => Fitted::Gauss(fit_gauss_lasso_with(train, tau, solver)?.c),
    })
}

fn model_scale(model: ModelKind, standardized: SampleMatrix) -> SampleMatrix {
    match model {
        ModelKind::Gauss => standardized,
        _ => to_unit(&standardized),
    }
}

/// Train/test split of `raw` mapped to the model's scale.
fn prepare_fold(
    raw: &SampleMatrix,
    global: Option<&SampleMatrix>,
    train_idx: &[usize],
    test_idx: &[usize],
    cfg: &CvConfig,
) -> Result<(SampleMatrix, SampleMatrix)> {
    match (cfg.preprocessing, global) {
        (Preprocessing::PerFold, _) => {
            let train_raw = raw.select(train_idx);
            let st = Standardization::fit(&train_raw)?;
            let train = model_scale(cfg.model, st.apply(&train_raw)?);
            let test = model_scale(cfg.model, st.apply(&raw.select(test_idx))?);
            Ok((train, test))
        }
        (_, Some(g)) => Ok((g.select(train_idx), g.select(test_idx))),
        (_, None) => Ok((raw.select(train_idx), raw.select(test_idx))),
    }
}

/// K-fold cross-validated predictive log-likelihood over a `τ` grid.
pub fn cross_validate(raw: &SampleMatrix, freqs: &FrequencySet, cfg: &CvConfig) -> Result<CvTable> {
    let n = raw.n();
    if cfg.folds < 2 || cfg.folds > n {
        return Err(Error::InvalidArgument(format!(
            "need 2 ≤ K ≤ n, got K = {} with n = {n}",
            cfg.folds
        )));
    }
    if cfg.taus.is_empty() {
        return Err(Error::InvalidArgument("empty τ grid".into()));
    }
    if let Some(&t) = cfg.taus.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidArgument(format!("τ = {t} must lie in [0, 1]")));
    }
    let global = match cfg.preprocessing {
        Preprocessing::Global => Some(model_scale(cfg.model, preprocess(raw)?.0)),
        _ => None,
    };
    let fold = fold_assignment(n, cfg.folds, cfg.seed);
    let splits: Vec<(SampleMatrix, SampleMatrix)> = (0..cfg.folds)
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&t| fold[t] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&t| fold[t] == f).collect();
            prepare_fold(raw, global.as_ref(), &train, &test, cfg)
        })
        .collect::<Result<_>>()?;
    let jobs = cfg.taus.len() * cfg.folds;
    let results = par::map_indexed(jobs, |job| -> Result<f64> {
        let (ti, f) = (job / cfg.folds, job % cfg.folds);
        let (train, test) = &splits[f];
        let fitted = fit_model(cfg.model, train, freqs, cfg.taus[ti], &cfg.solver)?;
        predictive_loglik(&fitted, test)
    });
    let mut rows = Vec::with_capacity(cfg.taus.len());
    let mut it = results.into_iter();
    for &tau in &cfg.taus {
        let per_fold: Vec<f64> = (0..cfg.folds).map(|_| it.next().expect("job count")).collect::<Result<_>>()?;
        rows.push(CvRow { tau, loglik: per_fold.iter().sum(), per_fold, best: false });
    }
    // first maximum wins ties; −∞ never beats a finite value
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.loglik > rows[best].loglik {
            best = i;
        }
    }
    rows[best].best = true;
    Ok(CvTable { model: cfg.model, best_tau: rows[best].tau, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_cdf_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_relative_eq!(normal_cdf(-1.0), 0.158_655_253_931_457_05, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(-5.0), 2.866_515_718_791_939e-7, max_relative = 1e-12);
    }

    #[test]
    fn preprocess_two_points() {
        let raw = SampleMatrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let (s, u) = preprocess(&raw).unwrap();
        assert_eq!(s.values(), &[-1.0, 1.0]);
        assert_relative_eq!(u.values()[0], 0.158_655_253_931_457_05, epsilon = 1e-15);
        assert_relative_eq!(u.values()[1], 0.841_344_746_068_542_9, epsilon = 1e-15);
    }

    #[test]
    fn preprocess_errors() {
        let raw = SampleMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(preprocess(&raw).unwrap_err(), Error::ConstantColumn { column: 0 });
        let raw = SampleMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(preprocess(&raw), Err(Error::EmptyData(_))));
    }

    #[test]
    fn partial_correlation_examples() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]);
        assert_relative_eq!(partial_correlations(&c)[(0, 1)], 0.5);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert_eq!(partial_correlations(&d)[(0, 1)], 0.0);
    }

    #[test]
    fn folds_are_balanced_and_seeded() {
        let a = fold_assignment(23, 5, 3);
        let b = fold_assignment(23, 5, 3);
        assert_eq!(a, b);
        for f in 0..5 {
            let c = a.iter().filter(|&&x| x == f).count();
            assert!(c == 4 || c == 5);
        }
        assert_ne!(a, fold_assignment(23, 5, 4));
    }

    #[test]
    fn split_layout() {
        let s = Split::new(2, 1.0, 4.0);
        assert_relative_eq!(s.shift, 1.0 / 16.0);
        assert_eq!(s.theta(&[0.3, 0.0, 0.1, 0.2]), vec![0.19999999999999998, -0.2]);
        let c = s.constraints(&[vec![1.0, 3.0]], 1.0);
        assert_eq!(c.len(), 5);
        assert_relative_eq!(c[4].b, 1.0 - 2.0 / 16.0 * 4.0);
    }
}
