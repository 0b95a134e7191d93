//! Tensor Gauss–Legendre quadrature on the unit cube and the moment
//! functionals built on it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::ModelKind;
use crate::linalg::{frobenius, Cholesky, EPS_PD};
use crate::model::{hessian_basis, norm_sq, cosine_product, Density, FrequencySet, Mixm, ParamVector, Sgm};
use crate::par;

/// Default Gauss–Legendre nodes per axis.
pub const DEFAULT_NODES: usize = 48;
/// Largest dimension handled by tensor rules.
pub const MAX_TENSOR_DIM: usize = 4;
/// Largest tensor grid evaluated.
pub const MAX_TENSOR_POINTS: u128 = 100_000_000;
/// Floor applied inside logarithms of densities.
pub const LOG_FLOOR: f64 = 1e-300;

/// One-dimensional rule on `[0,1]` applied on every axis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// `n`-point Gauss–Legendre rule on `[0,1]`, nodes ascending.
    pub fn gauss_legendre(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                if n == 1 {
                    p0 = 1.0;
                    p1 = z;
                }
                dp = nf * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let w = 1.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = 0.5 * (1.0 - z);
            nodes[n - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(Self { nodes, weights })
    }

    /// `n`-point midpoint rule; integrates `cos(πkx)` exactly for `k < 2n`.
    pub fn midpoint(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
        }
        let h = 1.0 / n as f64;
        Ok(Self { nodes: (0..n).map(|i| (i as f64 + 0.5) * h).collect(), weights: vec![h; n] })
    }

    /// `panels` equal subintervals with an `n`-point rule on each.
    pub fn composite(n: usize, panels: usize) -> Result<Self> {
        if panels == 0 {
            return Err(Error::InvalidArgument("need at least one panel".into()));
        }
        Self::gauss_legendre(n)?.on_intervals(&(0..=panels).map(|k| k as f64 / panels as f64).collect::<Vec<_>>())
    }

    /// The rule replicated on each `[edges[k], edges[k+1]]`.
    pub fn on_intervals(&self, edges: &[f64]) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            for (x, wt) in self.nodes.iter().zip(&self.weights) {
                nodes.push(a + (b - a) * x);
                weights.push((b - a) * wt);
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn check_tensor(dim: usize, points: usize) -> Result<()> {
    if dim > MAX_TENSOR_DIM {
        return Err(Error::ResourceCap { requested: dim as u128, cap: MAX_TENSOR_DIM as u128 });
    }
    let total = (points as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
    if total > MAX_TENSOR_POINTS {
        return Err(Error::ResourceCap { requested: total, cap: MAX_TENSOR_POINTS });
    }
    Ok(())
}

/// Tensor-product quadrature of `k` integrands at once; `f` writes the `k`
/// values at a node into its output slice.
pub fn integrate_many<F>(dim: usize, rule: &QuadratureRule, k: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()> + Sync + Send,
{
    check_tensor(dim, rule.len())?;
    if dim == 0 {
        let mut out = vec![0.0; k];
        f(&[], &mut out)?;
        return Ok(out);
    }
    let n = rule.len();
    let inner = n.pow(dim as u32 - 1);
    // one slab per node of the first axis, reduced in order
    let slabs = par::map_indexed(n, |i0| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; k];
        let mut vals = vec![0.0; k];
        let mut x = vec![0.0; dim];
        x[0] = rule.nodes[i0];
        for mut idx in 0..inner {
            let mut w = rule.weights[i0];
            for xj in x.iter_mut().skip(1) {
                let ij = idx % n;
                idx /= n;
                *xj = rule.nodes[ij];
                w *= rule.weights[ij];
            }
            f(&x, &mut vals)?;
            for (a, v) in acc.iter_mut().zip(&vals) {
                *a += w * v;
            }
        }
        Ok(acc)
    });
    let mut total = vec![0.0; k];
    for s in slabs {
        for (t, v) in total.iter_mut().zip(s?) {
            *t += v;
        }
    }
    Ok(total)
}

/// Tensor-product quadrature of a scalar integrand.
pub fn integrate<F>(dim: usize, rule: &QuadratureRule, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + Sync + Send,
{
    Ok(integrate_many(dim, rule, 1, |x, out| {
        out[0] = f(x)?;
        Ok(())
    })?[0])
}

/// A concrete SGM or MixM instance.
#[derive(Debug, Clone)]
pub enum Structural {
    Sgm(Sgm),
    Mixm(Mixm),
}

impl Structural {
    pub fn new(kind: ModelKind, freqs: FrequencySet, theta: Vec<f64>) -> Result<Self> {
        let theta = ParamVector::new(theta)?;
        match kind {
            ModelKind::Sgm => Ok(Self::Sgm(Sgm::new(freqs, theta)?)),
            ModelKind::Mixm => Ok(Self::Mixm(Mixm::new(freqs, theta)?)),
            ModelKind::Gauss => Err(Error::InvalidArgument("Gaussian model has no structural density".into())),
        }
    }

    /// Single-frequency model `𝒰 = {u}` with coefficient `θ`.
    pub fn single(kind: ModelKind, u: &[u32], theta: f64) -> Result<Self> {
        Self::new(kind, FrequencySet::new(u.len(), vec![u.to_vec()])?, vec![theta])
    }

    pub fn freqs(&self) -> &FrequencySet {
        match self {
            Self::Sgm(s) => s.freqs(),
            Self::Mixm(s) => s.freqs(),
        }
    }

    pub fn theta(&self) -> &[f64] {
        match self {
            Self::Sgm(s) => s.theta().as_slice(),
            Self::Mixm(s) => s.theta().as_slice(),
        }
    }

    /// Score `∂ log p / ∂θ_u` at `x`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Sgm(s) => s.score(x),
            Self::Mixm(s) => s.score(x),
        }
    }
}

impl Density for Structural {
    fn dim(&self) -> usize {
        self.freqs().dim()
    }

    fn density(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::Sgm(s) => s.density(x),
            Self::Mixm(s) => s.density(x),
        }
    }
}

/// Mean vector and covariance matrix under `model`.
#[derive(Debug, Clone, Serialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

pub fn moments<D: Density>(model: &D, rule: &QuadratureRule) -> Result<Moments> {
    let m = model.dim();
    // [1, x_i, x_i x_j (i ≤ j)]
    let k = 1 + m + m * (m + 1) / 2;
    let v = integrate_many(m, rule, k, |x, out| {
        let p = model.density(x)?;
        out[0] = p;
        let mut c = 1 + m;
        for i in 0..m {
            out[1 + i] = p * x[i];
            for j in 0..=i {
                out[c] = p * x[i] * x[j];
                c += 1;
            }
        }
        Ok(())
    })?;
    let mean: Vec<f64> = (0..m).map(|i| v[1 + i] / v[0]).collect();
    let mut cov = vec![vec![0.0; m]; m];
    let mut c = 1 + m;
    for i in 0..m {
        for j in 0..=i {
            let val = v[c] / v[0] - mean[i] * mean[j];
            cov[i][j] = val;
            cov[j][i] = val;
            c += 1;
        }
    }
    Ok(Moments { mean, cov })
}

/// Correlation of `X_i` and `X_j`.
pub fn correlation<D: Density>(model: &D, i: usize, j: usize, rule: &QuadratureRule) -> Result<f64> {
    let mo = moments(model, rule)?;
    Ok(mo.cov[i][j] / (mo.cov[i][i] * mo.cov[j][j]).sqrt())
}

/// `E[(X₁ − 1/2)(X₂ − 1/2)²] / (V[X₁]^{1/2} V[X₂])`.
pub fn beta122<D: Density>(model: &D, rule: &QuadratureRule) -> Result<f64> {
    check_dim(model, 2)?;
    let v = integrate_many(2, rule, 6, |x, out| {
        let p = model.density(x)?;
        let (a, b) = (x[0] - 0.5, x[1] - 0.5);
        out.copy_from_slice(&[p, p * a * b * b, p * a, p * a * a, p * b, p * b * b]);
        Ok(())
    })?;
    let z = v[0];
    let num = v[1] / z;
    let var1 = v[3] / z - (v[2] / z).powi(2);
    let var2 = v[5] / z - (v[4] / z).powi(2);
    Ok(num / (var1.sqrt() * var2))
}

/// `E[Π_i (X_i − EX_i)] / √(V[X₁]V[X₂]V[X₃])`.
pub fn beta123<D: Density>(model: &D, rule: &QuadratureRule) -> Result<f64> {
    check_dim(model, 3)?;
    let mo = moments(model, rule)?;
    let mu = mo.mean.clone();
    let v = integrate_many(3, rule, 2, |x, out| {
        let p = model.density(x)?;
        out[0] = p;
        out[1] = p * (x[0] - mu[0]) * (x[1] - mu[1]) * (x[2] - mu[2]);
        Ok(())
    })?;
    Ok(v[1] / v[0] / (mo.cov[0][0] * mo.cov[1][1] * mo.cov[2][2]).sqrt())
}

fn check_dim<D: Density>(model: &D, dim: usize) -> Result<()> {
    if model.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: model.dim() });
    }
    Ok(())
}

/// Conditional mutual information `I₁₂|₃` of a three-dimensional density.
///
/// Marginals are formed with the same rule as the outer integral, so the
/// quadrature bias cancels in the log-ratio.
pub fn cond_mutual_info<D: Density>(model: &D, rule: &QuadratureRule) -> Result<f64> {
    check_dim(model, 3)?;
    check_tensor(3, rule.len())?;
    let n = rule.len();
    let w = &rule.weights;
    let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    let p: Vec<f64> = par::map_indexed(n * n * n, |t| {
        let (i, j, k) = (t / (n * n), (t / n) % n, t % n);
        model.density(&[rule.nodes[i], rule.nodes[j], rule.nodes[k]])
    })
    .into_iter()
    .collect::<Result<_>>()?;
    if let Some(&bad) = p.iter().find(|v| !(**v > 0.0) && **v != 0.0) {
        return Err(Error::Domain { function: "cond_mutual_info", detail: format!("density {bad}") });
    }
    let mut p13 = vec![0.0; n * n];
    let mut p23 = vec![0.0; n * n];
    let mut p3 = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = p[idx(i, j, k)];
                p13[i * n + k] += w[j] * v;
                p23[j * n + k] += w[i] * v;
                p3[k] += w[i] * w[j] * v;
            }
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = p[idx(i, j, k)];
                if v <= 0.0 {
                    continue;
                }
                let ratio = (v.max(LOG_FLOOR) * p3[k].max(LOG_FLOOR))
                    / (p13[i * n + k].max(LOG_FLOOR) * p23[j * n + k].max(LOG_FLOOR));
                total += w[i] * w[j] * w[k] * v * ratio.ln();
            }
        }
    }
    Ok(total)
}

/// Density of the coordinates `axes` at `x_sub`, integrating out the rest.
pub fn marginal_density<D: Density>(model: &D, axes: &[usize], x_sub: &[f64], rule: &QuadratureRule) -> Result<f64> {
    let m = model.dim();
    if axes.len() != x_sub.len() {
        return Err(Error::DimensionMismatch { expected: axes.len(), got: x_sub.len() });
    }
    if axes.iter().any(|&a| a >= m) {
        return Err(Error::InvalidArgument(format!("axis out of range for dimension {m}")));
    }
    let rest: Vec<usize> = (0..m).filter(|j| !axes.contains(j)).collect();
    if rest.len() > 3 {
        return Err(Error::ResourceCap { requested: rest.len() as u128, cap: 3 });
    }
    integrate(rest.len(), rule, |y| {
        let mut x = vec![0.0; m];
        for (a, v) in axes.iter().zip(x_sub) {
            x[*a] = *v;
        }
        for (r, v) in rest.iter().zip(y) {
            x[*r] = *v;
        }
        model.density(&x)
    })
}

/// Fisher information `∫ p s_u s_v` of a structural model.
pub fn fisher_numeric(model: &Structural, rule: &QuadratureRule) -> Result<Vec<Vec<f64>>> {
    let m = model.dim();
    if m > 3 {
        return Err(Error::ResourceCap { requested: m as u128, cap: 3 });
    }
    let k = model.freqs().len();
    let freqs = model.freqs();
    let flat = integrate_many(m, rule, k * k, |x, out| {
        // p s_u s_v, written so that no division by p is needed for MixM and
        // the SGM form uses the adjugate-free Cholesky solve
        let (p, s) = match model {
            Structural::Sgm(sg) => {
                let g = sg.hessian(x);
                let chol = Cholesky::new(&g, EPS_PD).ok_or(Error::NotPositiveDefinite)?;
                let inv = chol.inverse();
                let s: Vec<f64> = freqs.iter().map(|u| frobenius(&inv, &hessian_basis(u, x))).collect();
                (chol.det(), s)
            }
            Structural::Mixm(mx) => {
                let p = mx.raw_density(x);
                if !(p > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                (p, freqs.iter().map(|u| norm_sq(u) * cosine_product(u, x) / p).collect())
            }
        };
        for a in 0..k {
            for b in 0..k {
                out[a * k + b] = p * s[a] * s[b];
            }
        }
        Ok(())
    })?;
    Ok((0..k).map(|a| flat[a * k..(a + 1) * k].to_vec()).collect())
}

/// Tabulated two-dimensional density on a regular grid.
#[derive(Debug, Clone, Serialize)]
pub struct DensityGrid {
    /// Zero-based axes.
    pub axes: (usize, usize),
    pub coords: Vec<f64>,
    /// `values[a][b]` at `(coords[a], coords[b])`.
    pub values: Vec<Vec<f64>>,
    /// Conditioning coordinates `(axis, value)`, zero-based.
    pub conditioning: Vec<(usize, f64)>,
}

impl DensityGrid {
    /// TSV with a `x_i<TAB>x_j<TAB>density` header (1-based axis labels),
    /// row-major, 17 significant digits.
    pub fn to_tsv(&self) -> String {
        let mut s = format!("x_{}\tx_{}\tdensity\n", self.axes.0 + 1, self.axes.1 + 1);
        for (a, xa) in self.coords.iter().enumerate() {
            for (b, xb) in self.coords.iter().enumerate() {
                s.push_str(&format!("{:.16e}\t{:.16e}\t{:.16e}\n", xa, xb, self.values[a][b]));
            }
        }
        s
    }

    /// Trapezoid-rule integral over the square.
    pub fn trapezoid(&self) -> f64 {
        let n = self.coords.len();
        let h = 1.0 / (n - 1) as f64;
        let w = |k: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let mut t = 0.0;
        for a in 0..n {
            for b in 0..n {
                t += w(a) * w(b) * self.values[a][b];
            }
        }
        t * h * h
    }
}

/// Marginal (or, with `conditioning`, conditional) density of the pair
/// `axes` on a `resolution × resolution` grid over `[0,1]²`. Remaining
/// coordinates are integrated with `rule`.
pub fn density_grid<D: Density>(
    model: &D,
    axes: (usize, usize),
    resolution: usize,
    conditioning: &[(usize, f64)],
    rule: &QuadratureRule,
) -> Result<DensityGrid> {
    let m = model.dim();
    if resolution < 2 {
        return Err(Error::InvalidArgument("grid resolution must be at least 2".into()));
    }
    let fixed: Vec<usize> = conditioning.iter().map(|c| c.0).collect();
    if axes.0 == axes.1 || axes.0 >= m || axes.1 >= m || fixed.iter().any(|&a| a >= m || a == axes.0 || a == axes.1) {
        return Err(Error::InvalidArgument(format!("bad axes {axes:?} / conditioning {fixed:?} for dimension {m}")));
    }
    let coords: Vec<f64> = (0..resolution).map(|k| k as f64 / (resolution - 1) as f64).collect();
    let mut sub_axes = vec![axes.0, axes.1];
    sub_axes.extend(&fixed);
    let cells = par::map_indexed(resolution * resolution, |t| {
        let (a, b) = (t / resolution, t % resolution);
        let mut x_sub = vec![coords[a], coords[b]];
        x_sub.extend(conditioning.iter().map(|c| c.1));
        marginal_density(model, &sub_axes, &x_sub, rule)
    });
    let mut values = vec![vec![0.0; resolution]; resolution];
    for (t, v) in cells.into_iter().enumerate() {
        values[t / resolution][t % resolution] = v?;
    }
    if !conditioning.is_empty() {
        let vals: Vec<f64> = conditioning.iter().map(|c| c.1).collect();
        let norm = marginal_density(model, &fixed, &vals, rule)?;
        if !(norm > 0.0) {
            return Err(Error::Domain { function: "density_grid", detail: "conditioning value has zero density".into() });
        }
        for row in values.iter_mut() {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
    Ok(DensityGrid { axes, coords, values, conditioning: conditioning.to_vec() })
}

/// Number of strict local maxima of a sequence, endpoints included.
pub fn count_local_maxima(values: &[f64]) -> usize {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let left = i == 0 || values[i] > values[i - 1];
            let right = i == n - 1 || values[i] > values[i + 1];
            left && right
        })
        .count()
}

/// Probabilities of the `bins^m` equal cells, each integrated with `rule`
/// mapped onto the cell. Cells are ordered with the first axis slowest.
pub fn cell_probabilities<D: Density>(model: &D, bins: usize, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let m = model.dim();
    if bins == 0 {
        return Err(Error::InvalidArgument("need at least one bin".into()));
    }
    let per_axis = rule.on_intervals(&(0..=bins).map(|k| k as f64 / bins as f64).collect::<Vec<_>>())?;
    check_tensor(m, per_axis.len())?;
    let q = rule.len();
    let cells = bins.pow(m as u32);
    par::map_indexed(cells, |c| -> Result<f64> {
        // cell multi-index, first axis slowest
        let mut cell = vec![0; m];
        let mut r = c;
        for j in (0..m).rev() {
            cell[j] = r % bins;
            r /= bins;
        }
        let mut total = 0.0;
        let mut x = vec![0.0; m];
        for mut t in 0..q.pow(m as u32) {
            let mut w = 1.0;
            for j in 0..m {
                let node = cell[j] * q + t % q;
                t /= q;
                x[j] = per_axis.nodes[node];
                w *= per_axis.weights[node];
            }
            total += w * model.density(&x)?;
        }
        Ok(total)
    })
    .into_iter()
    .collect()
}
