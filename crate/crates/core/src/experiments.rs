//! Replicated simulation studies.
//!
//! [`benchmark_study`] repeats fits of all three models on draws from the
//! five-dimensional benchmark; [`recovery_study`] repeats SGM fits on draws
//! from a known SGM. Replicates run through [`crate::par`] and are aggregated
//! in replicate order, so summaries depend only on the config.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    fit_gauss_lasso_with, fit_mixm_with, fit_sgm_with, partial_correlations, predictive_loglik, to_unit,
    FitResult, Fitted, ModelKind, SampleMatrix, Standardization,
};
use crate::feasibility::RegionSpec;
use crate::maxdet::SolverConfig;
use crate::model::{FrequencySet, Sgm};
use crate::par;
use crate::sampling::{sample_benchmark5, sample_sgm, BENCHMARK_DIM};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Mean with its standard error and 95% normal interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl Estimate {
    /// Sample mean and `sd/√n` (with `n − 1` in the variance). A single
    /// value has an infinite standard error; no values give NaN.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        Self { mean, se, lower: mean - Z95 * se, upper: mean + Z95 * se, count: n }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientSummary {
    pub freq: Vec<u32>,
    pub theta: Estimate,
    /// `√J_uu θ̂_u`.
    pub scaled: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairSummary {
    /// Zero-based coordinates.
    pub i: usize,
    pub j: usize,
    pub partial_correlation: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictiveRow {
    pub tau: f64,
    pub loglik: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictiveSummary {
    pub model: ModelKind,
    pub rows: Vec<PredictiveRow>,
    /// Row with the largest mean; first one wins ties.
    pub best_tau: f64,
    pub best: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub model: ModelKind,
    pub tau: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkConfig {
    pub replicates: usize,
    /// Training rows per replicate.
    pub n: usize,
    /// Held-out rows per replicate.
    pub n_test: usize,
    pub seed: u64,
    /// Budget for the coefficient tables.
    pub tau: f64,
    /// Budgets for the predictive comparison.
    pub predictive_taus: Vec<f64>,
    pub solver: SolverConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            replicates: 20,
            n: 40,
            n_test: 10,
            seed: 0,
            tau: 1.0,
            predictive_taus: (1..=10).map(|i| i as f64 / 10.0).collect(),
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkSummary {
    pub sgm: Vec<CoefficientSummary>,
    pub mixm: Vec<CoefficientSummary>,
    pub gauss: Vec<PairSummary>,
    pub predictive: Vec<PredictiveSummary>,
    pub failures: Vec<ReplicateFailure>,
}

impl BenchmarkSummary {
    /// Coefficient summaries of `model` sorted by decreasing mean |scaled|.
    pub fn ranked(&self, model: ModelKind) -> Vec<&CoefficientSummary> {
        let list = match model {
            ModelKind::Sgm => &self.sgm,
            ModelKind::Mixm => &self.mixm,
            ModelKind::Gauss => return Vec::new(),
        };
        let mut r: Vec<&CoefficientSummary> = list.iter().collect();
        r.sort_by(|a, b| b.scaled.mean.abs().total_cmp(&a.scaled.mean.abs()));
        r
    }

    pub fn predictive_for(&self, model: ModelKind) -> Option<&PredictiveSummary> {
        self.predictive.iter().find(|p| p.model == model)
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairSummary> {
        self.gauss.iter().find(|p| (p.i, p.j) == (i.min(j), i.max(j)))
    }
}

/// Per-replicate results; `None` marks a failed fit.
struct BenchmarkReplicate {
    sgm: Option<FitResult>,
    mixm: Option<FitResult>,
    gauss: Option<Vec<f64>>,
    /// `[model][τ]`, models in the order SGM, MixM, Gaussian.
    predictive: [Vec<Option<f64>>; 3],
    failures: Vec<ReplicateFailure>,
}

const MODELS: [ModelKind; 3] = [ModelKind::Sgm, ModelKind::Mixm, ModelKind::Gauss];

fn check_taus(taus: &[f64]) -> Result<()> {
    match taus.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        Some(t) => Err(Error::InvalidArgument(format!("τ = {t} must lie in [0, 1]"))),
        None => Ok(()),
    }
}

/// Benchmark study. Replicate `r` trains on rows `r(n + n_test) ..` of one
/// seeded benchmark draw and tests on the `n_test` rows after them; both sets
/// are standardized with the training mean and sd, and mapped through `Φ`
/// for SGM and MixM.
pub fn benchmark_study(freqs: &FrequencySet, cfg: &BenchmarkConfig) -> Result<BenchmarkSummary> {
    if freqs.dim() != BENCHMARK_DIM {
        return Err(Error::DimensionMismatch { expected: BENCHMARK_DIM, got: freqs.dim() });
    }
    if cfg.replicates == 0 || cfg.n < 2 || cfg.n_test == 0 {
        return Err(Error::InvalidArgument("need replicates ≥ 1, n ≥ 2 and n_test ≥ 1".into()));
    }
    check_taus(&cfg.predictive_taus)?;
    check_taus(&[cfg.tau])?;
    cfg.solver.validate()?;
    let block = cfg.n + cfg.n_test;
    let raw = sample_benchmark5(cfg.replicates * block, cfg.seed)?;
    let reps = par::map_indexed(cfg.replicates, |r| {
        let train: Vec<usize> = (r * block..r * block + cfg.n).collect();
        let test: Vec<usize> = (r * block + cfg.n..(r + 1) * block).collect();
        benchmark_replicate(r, &raw.select(&train), &raw.select(&test), freqs, cfg)
    });
    Ok(summarize_benchmark(freqs, cfg, reps))
}

fn benchmark_replicate(
    r: usize,
    train_raw: &SampleMatrix,
    test_raw: &SampleMatrix,
    freqs: &FrequencySet,
    cfg: &BenchmarkConfig,
) -> BenchmarkReplicate {
    let mut out = BenchmarkReplicate {
        sgm: None,
        mixm: None,
        gauss: None,
        predictive: std::array::from_fn(|_| vec![None; cfg.predictive_taus.len()]),
        failures: Vec::new(),
    };
    let scaled = Standardization::fit(train_raw)
        .and_then(|s| Ok((s.apply(train_raw)?, s.apply(test_raw)?)));
    let (train_std, test_std) = match scaled {
        Ok(v) => v,
        Err(e) => {
            for model in MODELS {
                out.failures.push(ReplicateFailure { replicate: r, model, tau: None, error: e.to_string() });
            }
            return out;
        }
    };
    let (train_unit, test_unit) = (to_unit(&train_std), to_unit(&test_std));
    let fit = |model: ModelKind, tau: f64| -> Result<(Fitted, Option<FitResult>, Option<Vec<f64>>)> {
        let region = RegionSpec::Lit { tau };
        Ok(match model {
            ModelKind::Sgm => {
                let f = fit_sgm_with(&train_unit, freqs, region, &cfg.solver)?;
                (Fitted::Sgm(f.sgm()?), Some(f), None)
            }
            ModelKind::Mixm => {
                let f = fit_mixm_with(&train_unit, freqs, region, &cfg.solver)?;
                (Fitted::Mixm(f.mixm()?), Some(f), None)
            }
            ModelKind::Gauss => {
                let c = fit_gauss_lasso_with(&train_std, tau, &cfg.solver)?.c;
                let rho = partial_correlations(&c);
                let upper = (0..rho.nrows()).flat_map(|i| (i + 1..rho.nrows()).map(move |j| (i, j)));
                let pairs = upper.map(|(i, j)| rho[(i, j)]).collect();
                (Fitted::Gauss(c), None, Some(pairs))
            }
        })
    };
    for (mi, model) in MODELS.into_iter().enumerate() {
        let test = if model == ModelKind::Gauss { &test_std } else { &test_unit };
        let mut table_done = false;
        for (ti, &tau) in cfg.predictive_taus.iter().enumerate() {
            match fit(model, tau).and_then(|(f, res, pairs)| Ok((predictive_loglik(&f, test)?, res, pairs))) {
                Ok((ll, res, pairs)) => {
                    out.predictive[mi][ti] = Some(ll);
                    if tau == cfg.tau && !table_done {
                        table_done = true;
                        store_table(&mut out, model, res, pairs);
                    }
                }
                Err(e) => {
                    out.failures.push(ReplicateFailure { replicate: r, model, tau: Some(tau), error: e.to_string() })
                }
            }
        }
        if !table_done && !cfg.predictive_taus.contains(&cfg.tau) {
            match fit(model, cfg.tau) {
                Ok((_, res, pairs)) => store_table(&mut out, model, res, pairs),
                Err(e) => out.failures.push(ReplicateFailure {
                    replicate: r,
                    model,
                    tau: Some(cfg.tau),
                    error: e.to_string(),
                }),
            }
        }
    }
    out
}

fn store_table(out: &mut BenchmarkReplicate, model: ModelKind, res: Option<FitResult>, pairs: Option<Vec<f64>>) {
    match model {
        ModelKind::Sgm => out.sgm = res,
        ModelKind::Mixm => out.mixm = res,
        ModelKind::Gauss => out.gauss = pairs,
    }
}

fn coefficient_table<'a>(
    freqs: &FrequencySet,
    fits: impl Iterator<Item = &'a FitResult> + Clone,
) -> Vec<CoefficientSummary> {
    (0..freqs.len())
        .map(|k| {
            let theta: Vec<f64> = fits.clone().map(|f| f.theta[k]).collect();
            let scaled: Vec<f64> = fits.clone().map(|f| f.scaled[k]).collect();
            CoefficientSummary {
                freq: freqs.get(k).to_vec(),
                theta: Estimate::from_values(&theta),
                scaled: Estimate::from_values(&scaled),
            }
        })
        .collect()
}

fn summarize_benchmark(
    freqs: &FrequencySet,
    cfg: &BenchmarkConfig,
    reps: Vec<BenchmarkReplicate>,
) -> BenchmarkSummary {
    let sgm = coefficient_table(freqs, reps.iter().filter_map(|r| r.sgm.as_ref()));
    let mixm = coefficient_table(freqs, reps.iter().filter_map(|r| r.mixm.as_ref()));
    let mut gauss = Vec::new();
    let mut k = 0;
    for i in 0..BENCHMARK_DIM {
        for j in i + 1..BENCHMARK_DIM {
            let v: Vec<f64> = reps.iter().filter_map(|r| r.gauss.as_ref().map(|p| p[k])).collect();
            gauss.push(PairSummary { i, j, partial_correlation: Estimate::from_values(&v) });
            k += 1;
        }
    }
    let predictive = MODELS
        .iter()
        .enumerate()
        .map(|(mi, &model)| {
            let rows: Vec<PredictiveRow> = cfg
                .predictive_taus
                .iter()
                .enumerate()
                .map(|(ti, &tau)| {
                    let v: Vec<f64> = reps.iter().filter_map(|r| r.predictive[mi][ti]).collect();
                    PredictiveRow { tau, loglik: Estimate::from_values(&v) }
                })
                .collect();
            let mut best = 0;
            for (i, row) in rows.iter().enumerate() {
                if row.loglik.mean > rows[best].loglik.mean {
                    best = i;
                }
            }
            PredictiveSummary { model, best_tau: rows[best].tau, best: rows[best].loglik, rows }
        })
        .collect();
    let failures = reps.into_iter().flat_map(|r| r.failures).collect();
    BenchmarkSummary { sgm, mixm, gauss, predictive, failures }
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryConfig {
    pub replicates: usize,
    pub n: usize,
    pub seed: u64,
    /// Lattice resolution `M`; skipped when `None`.
    pub lattice_m: Option<u32>,
    /// Lit budget; skipped when `None`.
    pub tau: Option<f64>,
    pub solver: SolverConfig,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self { replicates: 20, n: 100, seed: 0, lattice_m: Some(5), tau: Some(1.0), solver: SolverConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionRecovery {
    pub region: RegionSpec,
    /// Aligned with the fitted frequency set.
    pub coefficients: Vec<CoefficientSummary>,
    pub truth: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoverySummary {
    pub regions: Vec<RegionRecovery>,
    pub failures: Vec<ReplicateFailure>,
}

/// Recovery study: replicate `r` draws `n` points from `truth` with seed
/// `seed + r` and fits over `freqs` in each requested region. Frequencies of
/// `truth` missing from `freqs` are an error.
pub fn recovery_study(truth: &Sgm, freqs: &FrequencySet, cfg: &RecoveryConfig) -> Result<RecoverySummary> {
    if truth.freqs().dim() != freqs.dim() {
        return Err(Error::DimensionMismatch { expected: freqs.dim(), got: truth.freqs().dim() });
    }
    if cfg.replicates == 0 || cfg.n == 0 {
        return Err(Error::InvalidArgument("need replicates ≥ 1 and n ≥ 1".into()));
    }
    cfg.solver.validate()?;
    let mut target = vec![0.0; freqs.len()];
    for (u, t) in truth.freqs().iter().zip(truth.theta().as_slice()) {
        let k = freqs
            .index_of(u)
            .ok_or_else(|| Error::InvalidFrequencySet(format!("true frequency {u:?} is not in the fitted set")))?;
        target[k] = *t;
    }
    let mut regions = Vec::new();
    if let Some(m) = cfg.lattice_m {
        regions.push(RegionSpec::Lattice { m });
    }
    if let Some(tau) = cfg.tau {
        regions.push(RegionSpec::Lit { tau });
    }
    for r in &regions {
        r.validate(freqs)?;
    }
    let reps = par::map_indexed(cfg.replicates, |r| {
        let data = match sample_sgm(truth, cfg.n, cfg.seed.wrapping_add(r as u64)) {
            Ok(d) => d.data,
            Err(e) => return vec![Err(e.to_string()); regions.len()],
        };
        regions
            .iter()
            .map(|&region| fit_sgm_with(&data, freqs, region, &cfg.solver).map_err(|e| e.to_string()))
            .collect::<Vec<_>>()
    });
    let mut failures = Vec::new();
    for (r, rep) in reps.iter().enumerate() {
        for (ri, fit) in rep.iter().enumerate() {
            if let Err(e) = fit {
                let tau = match regions[ri] {
                    RegionSpec::Lit { tau } => Some(tau),
                    _ => None,
                };
                failures.push(ReplicateFailure { replicate: r, model: ModelKind::Sgm, tau, error: e.clone() });
            }
        }
    }
    let regions = regions
        .iter()
        .enumerate()
        .map(|(ri, &region)| RegionRecovery {
            region,
            coefficients: coefficient_table(freqs, reps.iter().filter_map(|rep| rep[ri].as_ref().ok())),
            truth: target.clone(),
        })
        .collect();
    Ok(RecoverySummary { regions, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn estimate_of_known_values() {
        let e = Estimate::from_values(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert_relative_eq!(e.se, (5.0f64 / 3.0 / 4.0).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(e.upper - e.lower, 2.0 * Z95 * e.se, epsilon = 1e-15);
        assert!(Estimate::from_values(&[1.0]).se.is_infinite());
    }

    #[test]
    fn rejects_wrong_dimension() {
        let f = FrequencySet::standard(2).unwrap();
        assert!(matches!(
            benchmark_study(&f, &BenchmarkConfig::default()),
            Err(Error::DimensionMismatch { expected: 5, got: 2 })
        ));
    }
}
