use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;
use sgm_core::analysis::{
    beta122, beta123, cond_mutual_info, correlation, density_grid, fisher_numeric, marginal_density, moments,
    QuadratureRule, Structural,
};
use sgm_core::estimators::{
    cross_validate, fit_gauss_lasso, fit_mixm, fit_sgm, partial_correlations, to_unit, CvConfig, CvTable, FitResult,
    ModelKind, Preprocessing, SampleMatrix, Standardization,
};
use sgm_core::experiments::{
    benchmark_study, recovery_study, BenchmarkConfig, BenchmarkSummary, RecoveryConfig, RecoverySummary,
};
use sgm_core::feasibility::{
    default_resolution, lattice_feasible, lit_margin, ma2_margin, min_eig_grid, mixm_lit_margin, LatticeCheck,
    RegionSpec,
};
use sgm_core::maxdet::SolveReport;
use sgm_core::model::INDEFINITE_TOL;
use sgm_core::sampling::{sample_benchmark5, sample_mixm, sample_sgm, SamplingSummary, BENCHMARK_DIM};
use sgm_core::{par, FrequencySet, Mixm, ParamVector, Sgm};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::input::{read_csv, read_params, resolve_freqs, write_csv, Params};
use crate::output::{emit, write_text};

pub fn run(command: &Command) -> CliResult<()> {
    match command {
        Command::Fit(a) => par::with_threads(a.common.jobs, || fit(a)),
        Command::Cv(a) => par::with_threads(a.common.jobs, || cv(a)),
        Command::Sample(a) => par::with_threads(a.common.jobs, || sample(a)),
        Command::Feasible(a) => par::with_threads(a.common.jobs, || feasible(a)),
        Command::Analyze(a) => par::with_threads(a.common.jobs, || analyze(a)),
        Command::Simulate(a) => par::with_threads(a.common.jobs, || simulate(a)),
    }
}

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn check_tau(tau: f64) -> CliResult<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        usage(format!("--tau must lie in [0, 1], got {tau}"))
    }
}

fn resolve_region(region: RegionArg, tau: f64, m: Option<u32>) -> CliResult<RegionSpec> {
    match (region, m) {
        (RegionArg::Lit, _) => {
            check_tau(tau)?;
            Ok(RegionSpec::Lit { tau })
        }
        (RegionArg::Lattice, Some(m)) => Ok(RegionSpec::Lattice { m }),
        (RegionArg::Lattice, None) => usage("--region lattice needs --M"),
    }
}

fn sgm_of(p: &Params) -> CliResult<Sgm> {
    Ok(Sgm::new(p.freqs.clone(), ParamVector::new(p.theta.clone())?)?)
}

#[derive(Serialize)]
struct GaussFit {
    model: ModelKind,
    tau: f64,
    concentration: Vec<Vec<f64>>,
    partial_correlation: Vec<Vec<f64>>,
    report: SolveReport,
}

#[derive(Serialize)]
#[serde(untagged)]
enum AnyFit {
    Structural(FitResult),
    Gauss(GaussFit),
}

#[derive(Serialize)]
struct FitOutput {
    #[serde(flatten)]
    fit: AnyFit,
    /// Column means and sds used to map the input, when it was preprocessed.
    standardization: Option<Standardization>,
}

fn rows_of(m: &impl std::ops::Index<(usize, usize), Output = f64>, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect()
}

fn fit(a: &FitArgs) -> CliResult<()> {
    let start = Instant::now();
    let model = ModelKind::from(a.model);
    let region = resolve_region(a.region, a.tau, a.lattice_m)?;
    if model == ModelKind::Gauss && a.region == RegionArg::Lattice {
        return usage("the Gaussian model has no lattice region");
    }
    let raw = read_csv(&a.input)?;
    let (data, standardization) = if a.no_preprocess {
        (raw, None)
    } else {
        let st = Standardization::fit(&raw)?;
        let z = st.apply(&raw)?;
        (if model == ModelKind::Gauss { z } else { to_unit(&z) }, Some(st))
    };
    log::info!("fitting {model:?} on {} rows × {} columns", data.n(), data.m());
    let fit = match model {
        ModelKind::Gauss => {
            let c = fit_gauss_lasso(&data, a.tau)?;
            let n = c.c.nrows();
            AnyFit::Gauss(GaussFit {
                model,
                tau: c.tau,
                concentration: rows_of(&c.c, n),
                partial_correlation: rows_of(&partial_correlations(&c.c), n),
                report: c.report,
            })
        }
        _ => {
            let freqs = resolve_freqs(&a.freqs, data.m())?;
            let f = if model == ModelKind::Sgm { fit_sgm } else { fit_mixm };
            AnyFit::Structural(f(&data, &freqs, region)?)
        }
    };
    emit("fit", a, &FitOutput { fit, standardization }, start.elapsed(), a.common.output.as_deref())
}

#[derive(Serialize)]
struct CvOutput {
    frequencies: usize,
    #[serde(flatten)]
    table: CvTable,
}

fn cv(a: &CvArgs) -> CliResult<()> {
    let start = Instant::now();
    let raw = read_csv(&a.input)?;
    let model = ModelKind::from(a.model);
    let mut cfg = CvConfig::new(model);
    cfg.folds = a.folds;
    cfg.seed = a.seed;
    if let Some(t) = &a.taus {
        cfg.taus = t.clone();
    }
    cfg.preprocessing = if a.no_preprocess { Preprocessing::None } else { Preprocessing::PerFold };
    let freqs = resolve_freqs(&a.freqs, raw.m())?;
    let table = cross_validate(&raw, &freqs, &cfg)?;
    log::info!("best τ = {}", table.best_tau);
    let frequencies = if model == ModelKind::Gauss { 0 } else { freqs.len() };
    emit("cv", a, &CvOutput { frequencies, table }, start.elapsed(), a.common.output.as_deref())
}

fn sample(a: &SampleArgs) -> CliResult<()> {
    if a.n == 0 {
        return usage("--n must be positive");
    }
    let (data, summary): (SampleMatrix, Option<SamplingSummary>) = if a.benchmark {
        (sample_benchmark5(a.n, a.seed)?, None)
    } else if let Some(dim) = a.dim {
        if dim == 0 {
            return usage("--dim must be positive");
        }
        let freqs = FrequencySet::standard(dim)?;
        let uniform = Sgm::new(freqs.clone(), ParamVector::zeros(freqs.len()))?;
        let d = sample_sgm(&uniform, a.n, a.seed)?;
        (d.data.clone(), Some((&d).into()))
    } else {
        let path = a.params.as_ref().expect("clap enforces one source");
        let p = read_params(path)?;
        let d = match a.model {
            ModelArg::Sgm => sample_sgm(&sgm_of(&p)?, a.n, a.seed)?,
            ModelArg::Mixm => sample_mixm(&Mixm::new(p.freqs, ParamVector::new(p.theta)?)?, a.n, a.seed)?,
            ModelArg::Gauss => return usage("sampling supports --model sgm or mixm"),
        };
        (d.data.clone(), Some((&d).into()))
    };
    if let Some(s) = summary {
        log::info!("{} draws from {} proposals (bound {}, acceptance {:.4})", s.n, s.proposals, s.bound, s.acceptance_rate);
    }
    write_text(a.common.output.as_deref(), &write_csv(&data, !a.no_header)?)
}

#[derive(Serialize)]
struct Margin {
    margin: f64,
    feasible: bool,
}

#[derive(Serialize)]
struct LitReport {
    tau: f64,
    margin: f64,
    /// `margin ≥ 0`: inside the closed lit region.
    feasible: bool,
}

#[derive(Serialize)]
struct LatticeReport {
    m: u32,
    #[serde(flatten)]
    check: LatticeCheck,
}

#[derive(Serialize)]
struct GridReport {
    resolution: usize,
    min_eigenvalue: f64,
    positive_semidefinite: bool,
}

#[derive(Serialize)]
struct FeasibleOutput {
    freqs: FrequencySet,
    theta: Vec<f64>,
    lit: LitReport,
    lattice: Option<LatticeReport>,
    grid: Option<GridReport>,
    ma2: Option<Margin>,
}

fn feasible(a: &FeasibleArgs) -> CliResult<()> {
    let start = Instant::now();
    check_tau(a.tau)?;
    let p = read_params(&a.params)?;
    let (f, theta) = (&p.freqs, p.theta.as_slice());
    let mut out = FeasibleOutput {
        freqs: f.clone(),
        theta: theta.to_vec(),
        lit: LitReport { tau: a.tau, margin: 0.0, feasible: false },
        lattice: None,
        grid: None,
        ma2: None,
    };
    match a.model {
        ModelArg::Gauss => return usage("feasibility applies to --model sgm or mixm"),
        ModelArg::Mixm => out.lit.margin = mixm_lit_margin(f, theta, a.tau)?,
        ModelArg::Sgm => {
            out.lit.margin = lit_margin(f, theta, a.tau)?;
            let m = a.lattice_m.unwrap_or(f.u_max() + 1);
            RegionSpec::Lattice { m }.validate(f)?;
            out.lattice = Some(LatticeReport { m, check: lattice_feasible(f, theta, m)? });
            let resolution = a.resolution.unwrap_or_else(|| default_resolution(f.dim()));
            let min_eigenvalue = min_eig_grid(f, theta, resolution)?;
            out.grid = Some(GridReport {
                resolution,
                min_eigenvalue,
                positive_semidefinite: min_eigenvalue >= -INDEFINITE_TOL,
            });
            if f.as_vecs() == [vec![1, 1], vec![2, 2]] {
                let margin = ma2_margin(theta[0], theta[1]);
                out.ma2 = Some(Margin { margin, feasible: margin >= 0.0 });
            }
        }
    }
    out.lit.feasible = out.lit.margin >= 0.0;
    emit("feasible", a, &out, start.elapsed(), a.common.output.as_deref())
}

#[derive(Serialize)]
struct Table1Row {
    statistic: &'static str,
    model: ModelKind,
    frequency: Vec<u32>,
    theta: f64,
    value: f64,
}

#[derive(Serialize)]
struct CmiRow {
    model: ModelKind,
    freqs: FrequencySet,
    epsilon: f64,
    /// `I(X1; X2 | X3) / ε⁴` at `θ = (ε, ε)`.
    ratio: f64,
}

#[derive(Serialize)]
struct Table1 {
    rows: Vec<Table1Row>,
    cmi: Vec<CmiRow>,
}

fn table1(rule: &QuadratureRule) -> CliResult<Table1> {
    use ModelKind::{Mixm as X, Sgm as S};
    type Stat = fn(&Structural, &QuadratureRule) -> sgm_core::Result<f64>;
    let corr: Stat = |s, r| correlation(s, 0, 1, r);
    let b2: Stat = beta122;
    let b3: Stat = beta123;
    let spec: [(&str, Stat, ModelKind, &[u32], f64); 6] = [
        ("correlation", corr, S, &[1, 1], 1.0),
        ("correlation", corr, X, &[1, 1], 0.5),
        ("beta122", b2, S, &[1, 2], -0.25),
        ("beta122", b2, X, &[1, 2], -0.2),
        ("beta123", b3, S, &[1, 1, 1], -1.0),
        ("beta123", b3, X, &[1, 1, 1], -1.0 / 3.0),
    ];
    let mut rows = Vec::new();
    for (statistic, stat, model, u, theta) in spec {
        let value = stat(&Structural::single(model, u, theta)?, rule)?;
        rows.push(Table1Row { statistic, model, frequency: u.to_vec(), theta, value });
    }
    let freqs = FrequencySet::new(3, vec![vec![1, 0, 1], vec![0, 1, 1]])?;
    let mut cmi = Vec::new();
    for model in [S, X] {
        for epsilon in [0.2, 0.1, 0.05] {
            let s = Structural::new(model, freqs.clone(), vec![epsilon, epsilon])?;
            let ratio = cond_mutual_info(&s, rule)? / epsilon.powi(4);
            cmi.push(CmiRow { model, freqs: freqs.clone(), epsilon, ratio });
        }
    }
    Ok(Table1 { rows, cmi })
}

fn zero_based(axes: &[usize], dim: usize) -> CliResult<Vec<usize>> {
    axes.iter()
        .map(|&a| if (1..=dim).contains(&a) { Ok(a - 1) } else { usage(format!("axis {a} outside 1..={dim}")) })
        .collect()
}

fn conditioning(specs: &[String], dim: usize) -> CliResult<Vec<(usize, f64)>> {
    specs
        .iter()
        .map(|s| {
            let parsed = s.split_once('=').and_then(|(a, v)| Some((a.trim().parse::<usize>().ok()?, v.trim().parse::<f64>().ok()?)));
            match parsed {
                Some((axis, v)) if (0.0..=1.0).contains(&v) => Ok((zero_based(&[axis], dim)?[0], v)),
                _ => usage(format!("--condition expects AXIS=VALUE with VALUE in [0, 1], got {s:?}")),
            }
        })
        .collect()
}

#[derive(Serialize)]
struct GridFile {
    path: PathBuf,
    axes: Vec<usize>,
    resolution: usize,
    trapezoid: f64,
}

fn raw<T: Serialize>(t: &T) -> CliResult<serde_value::Value> {
    serde_value::to_value(t).map_err(|e| CliError::Numerical(format!("cannot serialize output: {e}")))
}

fn analyze(a: &AnalyzeArgs) -> CliResult<()> {
    let start = Instant::now();
    let rule = QuadratureRule::gauss_legendre(a.quad_nodes)?;
    if a.table1 {
        let t = table1(&rule)?;
        return emit("analyze", a, &t, start.elapsed(), a.common.output.as_deref());
    }
    if a.quantities.is_empty() {
        return usage("give at least one --quantity, or --table1");
    }
    let kind = match a.model {
        ModelArg::Gauss => return usage("analysis applies to --model sgm or mixm"),
        m => ModelKind::from(m),
    };
    let p = read_params(a.params.as_ref().expect("clap enforces one of --table1/--params"))?;
    let model = Structural::new(kind, p.freqs.clone(), p.theta.clone())?;
    let dim = p.freqs.dim();
    let pair = zero_based(&a.pair, dim)?;
    if pair.len() != 2 {
        return usage("--pair takes two axes");
    }
    let mut out: BTreeMap<String, serde_value::Value> = BTreeMap::new();
    for q in &a.quantities {
        let (name, value) = match q {
            Quantity::Moments => ("moments", raw(&moments(&model, &rule)?)?),
            Quantity::Correlation => ("correlation", raw(&correlation(&model, pair[0], pair[1], &rule)?)?),
            Quantity::Beta122 => ("beta122", raw(&beta122(&model, &rule)?)?),
            Quantity::Beta123 => ("beta123", raw(&beta123(&model, &rule)?)?),
            Quantity::Cmi => ("cmi", raw(&cond_mutual_info(&model, &rule)?)?),
            Quantity::Fisher => ("fisher", raw(&fisher_numeric(&model, &rule)?)?),
            Quantity::Marginal => {
                let (Some(axes), Some(point)) = (&a.axes, &a.point) else {
                    return usage("--quantity marginal needs --axes and --point");
                };
                if axes.len() != point.len() {
                    return usage("--axes and --point differ in length");
                }
                ("marginal", raw(&marginal_density(&model, &zero_based(axes, dim)?, point, &rule)?)?)
            }
            Quantity::Grid => {
                let cond = conditioning(&a.condition, dim)?;
                let g = density_grid(&model, (pair[0], pair[1]), a.resolution, &cond, &rule)?;
                match &a.grid_output {
                    Some(path) => {
                        write_text(Some(path), &g.to_tsv())?;
                        let info = GridFile {
                            path: path.clone(),
                            axes: a.pair.clone(),
                            resolution: a.resolution,
                            trapezoid: g.trapezoid(),
                        };
                        ("grid", raw(&info)?)
                    }
                    None => ("grid", raw(&g)?),
                }
            }
        };
        out.insert(name.to_string(), value);
    }
    emit("analyze", a, &out, start.elapsed(), a.common.output.as_deref())
}

#[derive(Serialize)]
#[serde(tag = "study", rename_all = "lowercase")]
enum Study {
    Benchmark { settings: BenchmarkConfig, summary: BenchmarkSummary },
    Recovery { settings: RecoveryConfig, truth: Params, summary: RecoverySummary },
}

impl Serialize for Params {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Params", 2)?;
        st.serialize_field("freqs", &self.freqs)?;
        st.serialize_field("theta", &self.theta)?;
        st.end()
    }
}

fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let start = Instant::now();
    let study = if a.recovery {
        let p = read_params(a.params.as_ref().expect("clap enforces --params"))?;
        let truth = sgm_of(&p)?;
        let freqs = match a.freqs.as_deref() {
            None | Some("truth") => p.freqs.clone(),
            Some(spec) => resolve_freqs(spec, p.freqs.dim())?,
        };
        if a.region != Some(RegionArg::Lattice) {
            check_tau(a.tau)?;
        }
        let settings = RecoveryConfig {
            replicates: a.replicates,
            n: a.n.unwrap_or(100),
            seed: a.seed,
            lattice_m: (a.region != Some(RegionArg::Lit)).then_some(a.lattice_m),
            tau: (a.region != Some(RegionArg::Lattice)).then_some(a.tau),
            ..RecoveryConfig::default()
        };
        let summary = recovery_study(&truth, &freqs, &settings)?;
        Study::Recovery { settings, truth: p, summary }
    } else {
        if a.params.is_some() {
            return usage("--params is only used with --recovery");
        }
        check_tau(a.tau)?;
        let freqs = resolve_freqs(a.freqs.as_deref().unwrap_or("standard"), BENCHMARK_DIM)?;
        let mut settings = BenchmarkConfig {
            replicates: a.replicates,
            n: a.n.unwrap_or(40),
            n_test: a.n_test,
            seed: a.seed,
            tau: a.tau,
            ..BenchmarkConfig::default()
        };
        if let Some(t) = &a.taus {
            settings.predictive_taus = t.clone();
        }
        let summary = benchmark_study(&freqs, &settings)?;
        Study::Benchmark { settings, summary }
    };
    emit("simulate", a, &study, start.elapsed(), a.common.output.as_deref())
}
