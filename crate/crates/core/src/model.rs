//! Structural gradient model: cosine-series potential, its Hessian field, the
//! induced density `det D²ψ`, scores and Fisher information, plus the affine
//! structural mixture model used as a baseline.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, Cholesky, EPS_PD};

/// Negative eigenvalues of the Hessian smaller than this in magnitude are
/// treated as rounding noise on the boundary of the feasible region.
pub const INDEFINITE_TOL: f64 = 1e-8;

/// Ordering used for frequency vectors: lexicographic with the last
/// coordinate most significant, so `(1,0,0) < (2,0,0) < (0,1,0) < (1,1,0)`.
pub fn frequency_order(a: &[u32], b: &[u32]) -> Ordering {
    a.iter().rev().cmp(b.iter().rev())
}

/// Squared Euclidean norm `‖u‖²`.
pub fn norm_sq(u: &[u32]) -> f64 {
    u.iter().map(|&k| (k as f64) * (k as f64)).sum()
}

/// Number of nonzero coordinates, `|σ(u)|`.
pub fn support_size(u: &[u32]) -> usize {
    u.iter().filter(|&&k| k > 0).count()
}

/// A finite set of nonzero cosine frequencies in `ℤ≥0^m`, kept in canonical
/// order so parameter indices are reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FrequencySetRepr", into = "FrequencySetRepr")]
pub struct FrequencySet {
    dim: usize,
    freqs: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct FrequencySetRepr {
    dim: usize,
    freqs: Vec<Vec<u32>>,
}

impl TryFrom<FrequencySetRepr> for FrequencySet {
    type Error = Error;
    fn try_from(r: FrequencySetRepr) -> Result<Self> {
        FrequencySet::new(r.dim, r.freqs)
    }
}

impl From<FrequencySet> for FrequencySetRepr {
    fn from(f: FrequencySet) -> Self {
        Self { dim: f.dim, freqs: f.freqs }
    }
}

impl FrequencySet {
    /// Validates and canonically orders `freqs`.
    pub fn new(dim: usize, mut freqs: Vec<Vec<u32>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidFrequencySet("dimension must be positive".into()));
        }
        for u in &freqs {
            if u.len() != dim {
                return Err(Error::InvalidFrequencySet(format!(
                    "frequency {u:?} has {} components, expected {dim}",
                    u.len()
                )));
            }
            if u.iter().all(|&k| k == 0) {
                return Err(Error::InvalidFrequencySet(
                    "the zero frequency is not identifiable".into(),
                ));
            }
        }
        freqs.sort_by(|a, b| frequency_order(a, b));
        if let Some(w) = freqs.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidFrequencySet(format!(
                "duplicate frequency {:?}",
                w[0]
            )));
        }
        Ok(Self { dim, freqs })
    }

    /// All nonzero `u` with `‖u‖∞ ≤ 2` and `‖u‖₁ ≤ 3`.
    pub fn standard(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidFrequencySet("dimension must be positive".into()));
        }
        let mut freqs = Vec::new();
        let unit = |entries: &[(usize, u32)]| {
            let mut u = vec![0u32; dim];
            for &(j, k) in entries {
                u[j] = k;
            }
            u
        };
        for i in 0..dim {
            freqs.push(unit(&[(i, 1)]));
            freqs.push(unit(&[(i, 2)]));
            for j in (i + 1)..dim {
                freqs.push(unit(&[(i, 1), (j, 1)]));
                freqs.push(unit(&[(i, 2), (j, 1)]));
                freqs.push(unit(&[(i, 1), (j, 2)]));
                for k in (j + 1)..dim {
                    freqs.push(unit(&[(i, 1), (j, 1), (k, 1)]));
                }
            }
        }
        Self::new(dim, freqs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.freqs[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.freqs.iter().map(|u| u.as_slice())
    }

    pub fn as_vecs(&self) -> &[Vec<u32>] {
        &self.freqs
    }

    pub fn index_of(&self, u: &[u32]) -> Option<usize> {
        self.freqs
            .binary_search_by(|v| frequency_order(v, u))
            .ok()
    }

    /// `U_max = max_u ‖u‖∞` (0 for an empty set).
    pub fn u_max(&self) -> u32 {
        self.iter()
            .flat_map(|u| u.iter().copied())
            .max()
            .unwrap_or(0)
    }
}

/// Coefficients `θ_u`, aligned with a [`FrequencySet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite parameter {v}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Adds `weight · H_u(x)` to `out`, where
/// `H_u(x) = D²(−π⁻² Π_j cos(π u_j x_j))`.
///
/// Coordinates outside `[0,1]` are evaluated with the same formula, which is
/// the periodic even extension of the potential.
pub fn add_hessian_basis(u: &[u32], x: &[f64], weight: f64, out: &mut DMatrix<f64>) {
    // Only coordinates in the support contribute; elsewhere cos = 1, sin = 0.
    const STACK: usize = 16;
    let k = support_size(u);
    if k <= STACK {
        let mut sup = [0usize; STACK];
        let mut trig = [(0.0f64, 0.0f64, 0.0f64); STACK];
        fill_support(u, x, &mut sup[..k], &mut trig[..k]);
        accumulate_basis(&sup[..k], &trig[..k], weight, out);
    } else {
        let mut sup = vec![0usize; k];
        let mut trig = vec![(0.0, 0.0, 0.0); k];
        fill_support(u, x, &mut sup, &mut trig);
        accumulate_basis(&sup, &trig, weight, out);
    }
}

/// Support indices with `(u_j, cos(π u_j x_j), sin(π u_j x_j))`.
fn fill_support(u: &[u32], x: &[f64], sup: &mut [usize], trig: &mut [(f64, f64, f64)]) {
    let mut t = 0;
    for (j, &uj) in u.iter().enumerate() {
        if uj > 0 {
            let a = PI * uj as f64 * x[j];
            sup[t] = j;
            trig[t] = (uj as f64, a.cos(), a.sin());
            t += 1;
        }
    }
}

fn accumulate_basis(sup: &[usize], trig: &[(f64, f64, f64)], weight: f64, out: &mut DMatrix<f64>) {
    let k = sup.len();
    for a in 0..k {
        let (ua, ca, sa) = trig[a];
        let mut diag = ua * ua * ca;
        for (b, t) in trig.iter().enumerate() {
            if b != a {
                diag *= t.1;
            }
        }
        out[(sup[a], sup[a])] += weight * diag;
        for b in (a + 1)..k {
            let (ub, _, sb) = trig[b];
            let mut off = -ua * ub * sa * sb;
            for (r, t) in trig.iter().enumerate() {
                if r != a && r != b {
                    off *= t.1;
                }
            }
            out[(sup[a], sup[b])] += weight * off;
            out[(sup[b], sup[a])] += weight * off;
        }
    }
}

/// `H_u(x)` as a standalone matrix.
pub fn hessian_basis(u: &[u32], x: &[f64]) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(u.len(), u.len());
    add_hessian_basis(u, x, 1.0, &mut h);
    h
}

/// `Π_j cos(π u_j x_j)`.
pub fn cosine_product(u: &[u32], x: &[f64]) -> f64 {
    u.iter()
        .zip(x)
        .filter(|(&k, _)| k > 0)
        .map(|(&k, &xj)| (PI * k as f64 * xj).cos())
        .product()
}

fn check_point(dim: usize, x: &[f64]) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
    }
    Ok(())
}

/// Common interface of densities on `[0,1]^m`.
pub trait Density: Sync {
    fn dim(&self) -> usize;
    fn density(&self, x: &[f64]) -> Result<f64>;
}

/// A structural gradient model with fixed frequency set and parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgm {
    freqs: FrequencySet,
    theta: ParamVector,
}

impl Sgm {
    pub fn new(freqs: FrequencySet, theta: ParamVector) -> Result<Self> {
        if theta.len() != freqs.len() {
            return Err(Error::DimensionMismatch { expected: freqs.len(), got: theta.len() });
        }
        Ok(Self { freqs, theta })
    }

    /// Convenience constructor from raw frequency/coefficient pairs in any order.
    pub fn from_pairs(dim: usize, pairs: &[(Vec<u32>, f64)]) -> Result<Self> {
        let freqs = FrequencySet::new(dim, pairs.iter().map(|(u, _)| u.clone()).collect())?;
        let mut theta = vec![0.0; freqs.len()];
        for (u, v) in pairs {
            let i = freqs.index_of(u).expect("frequency present after construction");
            theta[i] = *v;
        }
        Self::new(freqs, ParamVector::new(theta)?)
    }

    pub fn freqs(&self) -> &FrequencySet {
        &self.freqs
    }

    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    /// `ψ(x|θ) = xᵀx/2 − Σ_u (θ_u/π²) Π_j cos(π u_j x_j)`.
    pub fn potential(&self, x: &[f64]) -> f64 {
        let quad: f64 = 0.5 * x.iter().map(|v| v * v).sum::<f64>();
        let series: f64 = self
            .freqs
            .iter()
            .zip(self.theta.as_slice())
            .map(|(u, &t)| t * cosine_product(u, x))
            .sum();
        quad - series / (PI * PI)
    }

    /// Hessian `D²ψ(x|θ) = I + Σ_u θ_u H_u(x)`, exactly symmetric.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        hessian_with(&self.freqs, self.theta.as_slice(), x)
    }

    /// Brenier map `Dψ(x|θ)`.
    pub fn gradient_map(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for (u, &t) in self.freqs.iter().zip(self.theta.as_slice()) {
            if t == 0.0 {
                continue;
            }
            for j in 0..x.len() {
                if u[j] == 0 {
                    continue;
                }
                let mut prod = (t / PI) * u[j] as f64 * (PI * u[j] as f64 * x[j]).sin();
                for (r, &ur) in u.iter().enumerate() {
                    if r != j && ur > 0 {
                        prod *= (PI * ur as f64 * x[r]).cos();
                    }
                }
                y[j] += prod;
            }
        }
        y
    }

    /// Score `∂ log p/∂θ_u = tr(G⁻¹ H_u(x))` with `G = D²ψ(x|θ)`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(self.freqs.dim(), x)?;
        let g = self.hessian(x);
        let chol = Cholesky::new(&g, EPS_PD).ok_or(Error::NotPositiveDefinite)?;
        let ginv = chol.inverse();
        Ok(self
            .freqs
            .iter()
            .map(|u| crate::linalg::frobenius(&ginv, &hessian_basis(u, x)))
            .collect())
    }

    /// Log density, `None` when the density vanishes at `x`.
    pub fn log_density(&self, x: &[f64]) -> Result<Option<f64>> {
        check_point(self.freqs.dim(), x)?;
        let g = self.hessian(x);
        match Cholesky::new(&g, EPS_PD) {
            Some(c) => Ok(Some(c.log_det())),
            None => {
                classify_singular(&g, x)?;
                Ok(None)
            }
        }
    }
}

/// `I + Σ_u θ_u H_u(x)` for explicit frequencies and coefficients.
pub fn hessian_with(freqs: &FrequencySet, theta: &[f64], x: &[f64]) -> DMatrix<f64> {
    let m = freqs.dim();
    let mut h = DMatrix::identity(m, m);
    for (u, &t) in freqs.iter().zip(theta) {
        if t != 0.0 {
            add_hessian_basis(u, x, t, &mut h);
        }
    }
    h
}

fn classify_singular(g: &DMatrix<f64>, x: &[f64]) -> Result<()> {
    let lam = min_eigenvalue(g);
    if lam < -INDEFINITE_TOL || lam.is_nan() {
        return Err(Error::IndefiniteHessian { point: x.to_vec(), min_eigenvalue: lam });
    }
    Ok(())
}

impl Density for Sgm {
    fn dim(&self) -> usize {
        self.freqs.dim()
    }

    /// `det D²ψ(x|θ)`; zero on a semidefinite Hessian, an error when the
    /// Hessian is indefinite beyond [`INDEFINITE_TOL`].
    fn density(&self, x: &[f64]) -> Result<f64> {
        check_point(self.freqs.dim(), x)?;
        let g = self.hessian(x);
        match Cholesky::new(&g, EPS_PD) {
            Some(c) => Ok(c.det()),
            None => {
                classify_singular(&g, x)?;
                Ok(0.0)
            }
        }
    }
}

/// Structural mixture model `p̃(x|θ) = 1 + Σ_u θ_u ‖u‖² Π_j cos(π u_j x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixm {
    freqs: FrequencySet,
    theta: ParamVector,
}

impl Mixm {
    pub fn new(freqs: FrequencySet, theta: ParamVector) -> Result<Self> {
        if theta.len() != freqs.len() {
            return Err(Error::DimensionMismatch { expected: freqs.len(), got: theta.len() });
        }
        Ok(Self { freqs, theta })
    }

    pub fn freqs(&self) -> &FrequencySet {
        &self.freqs
    }

    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    /// Unclipped affine density value (may be negative for infeasible θ).
    pub fn raw_density(&self, x: &[f64]) -> f64 {
        mixm_density_with(&self.freqs, self.theta.as_slice(), x)
    }

    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(self.freqs.dim(), x)?;
        let p = self.raw_density(x);
        if !(p > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(self
            .freqs
            .iter()
            .map(|u| norm_sq(u) * cosine_product(u, x) / p)
            .collect())
    }
}

pub fn mixm_density_with(freqs: &FrequencySet, theta: &[f64], x: &[f64]) -> f64 {
    1.0 + freqs
        .iter()
        .zip(theta)
        .map(|(u, &t)| t * norm_sq(u) * cosine_product(u, x))
        .sum::<f64>()
}

impl Density for Mixm {
    fn dim(&self) -> usize {
        self.freqs.dim()
    }

    fn density(&self, x: &[f64]) -> Result<f64> {
        check_point(self.freqs.dim(), x)?;
        let p = self.raw_density(x);
        if p < -INDEFINITE_TOL || p.is_nan() {
            return Err(Error::IndefiniteHessian { point: x.to_vec(), min_eigenvalue: p });
        }
        Ok(p.max(0.0))
    }
}

/// Score shared by both models at `θ = 0`: `‖u‖² Π_j cos(π u_j x_j)`.
pub fn score_at_origin(freqs: &FrequencySet, x: &[f64]) -> Vec<f64> {
    freqs.iter().map(|u| norm_sq(u) * cosine_product(u, x)).collect()
}

/// Diagonal of the Fisher information at `θ = 0`: `‖u‖⁴ / 2^{|σ(u)|}`.
pub fn fisher_origin(freqs: &FrequencySet) -> Vec<f64> {
    freqs
        .iter()
        .map(|u| {
            let n2 = norm_sq(u);
            n2 * n2 / f64::powi(2.0, support_size(u) as i32)
        })
        .collect()
}

/// Fisher information of the one-dimensional model `𝒰 = {u}`:
/// `(1 − √(1−θ²u⁴)) / (θ² √(1−θ²u⁴))`.
///
/// Evaluated in the rationalized form `u⁴ / (s (1 + s))`, `s = √(1−θ²u⁴)`,
/// which has no removable singularity at `θ = 0`.
pub fn fisher_closed_1d(u: u32, theta: f64) -> Result<f64> {
    if u == 0 {
        return Err(Error::Domain { function: "fisher_closed_1d", detail: "u must be positive".into() });
    }
    let u2 = (u as f64) * (u as f64);
    let a = theta * u2;
    if !(a.abs() < 1.0) {
        return Err(Error::Domain {
            function: "fisher_closed_1d",
            detail: format!("|θ|u² = {} must be < 1", a.abs()),
        });
    }
    let s = (1.0 - a * a).sqrt();
    Ok(u2 * u2 / (s * (1.0 + s)))
}

/// Fisher information of the correlation model `𝒰 = {(1,1)}`:
/// `2(1 − √(1−θ²)) / (θ² √(1−θ²))`, rationalized as `2 / (s (1 + s))`.
pub fn fisher_closed_corr(theta: f64) -> Result<f64> {
    if !(theta.abs() < 1.0) {
        return Err(Error::Domain {
            function: "fisher_closed_corr",
            detail: format!("|θ| = {} must be < 1", theta.abs()),
        });
    }
    let s = (1.0 - theta * theta).sqrt();
    Ok(2.0 / (s * (1.0 + s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(x: f64) -> f64 {
        (PI * x).cos()
    }
    fn s(x: f64) -> f64 {
        (PI * x).sin()
    }

    /// Brute-force enumeration of {u : ‖u‖∞ ≤ 2, ‖u‖₁ ≤ 3, u ≠ 0}.
    fn enumerate_standard(m: usize) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let total = 3usize.pow(m as u32);
        for code in 1..total {
            let mut u = vec![0u32; m];
            let mut r = code;
            for j in 0..m {
                u[j] = (r % 3) as u32;
                r /= 3;
            }
            if u.iter().sum::<u32>() <= 3 {
                out.push(u);
            }
        }
        out.sort_by(|a, b| frequency_order(a, b));
        out
    }

    #[test]
    fn standard_set_matches_enumeration_and_cardinality() {
        for m in 1..=6 {
            let f = FrequencySet::standard(m).unwrap();
            assert_eq!(f.as_vecs(), enumerate_standard(m).as_slice());
            assert_eq!(f.len(), m * (m + 1) * (m + 5) / 6);
        }
        assert_eq!(FrequencySet::standard(1).unwrap().as_vecs(), &[vec![1], vec![2]]);
        assert_eq!(FrequencySet::standard(2).unwrap().len(), 7);
    }

    #[test]
    fn standard_set_m3_column_order() {
        let rows = [
            [1, 2, 0, 1, 2, 0, 1, 0, 1, 2, 0, 1, 0, 0, 1, 0],
            [0, 0, 1, 1, 1, 2, 2, 0, 0, 0, 1, 1, 2, 0, 0, 1],
            [0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 2, 2, 2],
        ];
        let f = FrequencySet::standard(3).unwrap();
        assert_eq!(f.len(), 16);
        for (i, u) in f.iter().enumerate() {
            assert_eq!(u, &[rows[0][i], rows[1][i], rows[2][i]]);
        }
    }

    #[test]
    fn frequency_set_validation() {
        assert!(FrequencySet::new(2, vec![vec![0, 0]]).is_err());
        assert!(FrequencySet::new(2, vec![vec![1, 0], vec![1, 0]]).is_err());
        assert!(FrequencySet::new(2, vec![vec![1, 0, 0]]).is_err());
        assert!(FrequencySet::new(0, vec![]).is_err());
        let f = FrequencySet::new(2, vec![vec![2, 2], vec![1, 1]]).unwrap();
        assert_eq!(f.get(0), &[1, 1]);
        assert_eq!(f.index_of(&[2, 2]), Some(1));
        assert_eq!(f.index_of(&[2, 1]), None);
        assert_eq!(f.u_max(), 2);
    }

    #[test]
    fn basis_at_origin_is_diag_u_squared() {
        let u = [1, 2, 0, 3];
        let h = hessian_basis(&u, &[0.0; 4]);
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0, 0.0, 9.0]));
        assert!((h - expect).norm() < 1e-15);
        assert!((hessian_basis(&[1, 1], &[0.0, 0.0]) - DMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn basis_matches_heteroscedastic_display() {
        let (x1, x2) = (0.3, 0.71);
        let h = hessian_basis(&[1, 2], &[x1, x2]);
        assert_relative_eq!(h[(0, 0)], c(x1) * c(2.0 * x2), epsilon = 1e-14);
        assert_relative_eq!(h[(1, 1)], 4.0 * c(x1) * c(2.0 * x2), epsilon = 1e-14);
        assert_relative_eq!(h[(0, 1)], -2.0 * s(x1) * s(2.0 * x2), epsilon = 1e-14);
        assert_eq!(h[(0, 1)], h[(1, 0)]);
    }

    #[test]
    fn hessian_examples() {
        let f = FrequencySet::new(2, vec![vec![1, 1]]).unwrap();
        let zero = Sgm::new(f.clone(), ParamVector::zeros(1)).unwrap();
        assert_eq!(zero.hessian(&[0.2, 0.9]), DMatrix::identity(2, 2));
        let half = Sgm::new(f, ParamVector::new(vec![0.5]).unwrap()).unwrap();
        let h = half.hessian(&[0.0, 0.0]);
        assert!((h - DMatrix::identity(2, 2) * 1.5).norm() < 1e-15);
        assert_relative_eq!(half.density(&[0.0, 0.0]).unwrap(), 2.25, epsilon = 1e-14);
    }

    #[test]
    fn hessian_matches_conditional_independence_display() {
        let (t, p) = (0.3, -0.2);
        let model = Sgm::from_pairs(3, &[(vec![1, 0, 1], t), (vec![0, 1, 1], p)]).unwrap();
        let x = [0.13, 0.58, 0.77];
        let (c1, c2, c3) = (c(x[0]), c(x[1]), c(x[2]));
        let (s1, s2, s3) = (s(x[0]), s(x[1]), s(x[2]));
        let expect = DMatrix::from_row_slice(
            3,
            3,
            &[
                1.0 + t * c1 * c3, 0.0, -t * s1 * s3,
                0.0, 1.0 + p * c2 * c3, -p * s2 * s3,
                -t * s1 * s3, -p * s2 * s3, 1.0 + t * c1 * c3 + p * c2 * c3,
            ],
        );
        assert!((model.hessian(&x) - expect).norm() < 1e-14);
    }

    #[test]
    fn density_closed_form_correlation_model() {
        let t = 0.7;
        let model = Sgm::from_pairs(2, &[(vec![1, 1], t)]).unwrap();
        for &(x1, x2) in &[(0.1, 0.2), (0.5, 0.5), (0.9, 0.05), (0.33, 0.66)] {
            let closed = 1.0 + 2.0 * t * c(x1) * c(x2) + 0.5 * t * t * (c(2.0 * x1) + c(2.0 * x2));
            assert_relative_eq!(model.density(&[x1, x2]).unwrap(), closed, epsilon = 1e-13);
        }
    }

    #[test]
    fn density_zero_on_boundary_and_error_when_infeasible() {
        let edge = Sgm::from_pairs(2, &[(vec![1, 1], 1.0)]).unwrap();
        // λ₋ = 1 + cos(π(x1 − x2)) vanishes at (0, 1).
        assert_eq!(edge.density(&[0.0, 1.0]).unwrap(), 0.0);
        let bad = Sgm::from_pairs(2, &[(vec![1, 1], 1.5)]).unwrap();
        assert!(matches!(bad.density(&[0.0, 1.0]), Err(Error::IndefiniteHessian { .. })));
    }

    #[test]
    fn potential_examples() {
        let model = Sgm::from_pairs(2, &[(vec![1, 1], 1.0)]).unwrap();
        assert_relative_eq!(model.potential(&[0.0, 0.0]), -1.0 / (PI * PI), epsilon = 1e-15);
        let zero = Sgm::new(FrequencySet::standard(2).unwrap(), ParamVector::zeros(7)).unwrap();
        assert_relative_eq!(zero.potential(&[0.3, 0.4]), 0.125, epsilon = 1e-15);
    }

    #[test]
    fn gradient_map_vertices_and_faces() {
        let f = FrequencySet::standard(3).unwrap();
        let theta: Vec<f64> = (0..f.len()).map(|i| 0.02 * ((i as f64) - 7.0)).collect();
        let model = Sgm::new(f, ParamVector::new(theta).unwrap()).unwrap();
        for v in 0..8u32 {
            let x: Vec<f64> = (0..3).map(|j| ((v >> j) & 1) as f64).collect();
            let y = model.gradient_map(&x);
            for j in 0..3 {
                assert!((y[j] - x[j]).abs() < 1e-15);
            }
        }
        for j in 0..3 {
            for b in [0.0, 1.0] {
                for k in 0..25 {
                    let mut x = vec![(k as f64) / 24.0, ((k * 7) % 25) as f64 / 24.0, ((k * 3) % 25) as f64 / 24.0];
                    x[j] = b;
                    let y = model.gradient_map(&x);
                    assert!((y[j] - b).abs() < 1e-14, "face x_{j} = {b} not preserved");
                }
            }
        }
    }

    #[test]
    fn score_at_origin_and_finite_differences() {
        let f = FrequencySet::standard(2).unwrap();
        let zero = Sgm::new(f.clone(), ParamVector::zeros(f.len())).unwrap();
        let s0 = zero.score(&[0.0, 0.0]).unwrap();
        for (u, v) in f.iter().zip(&s0) {
            assert_relative_eq!(*v, norm_sq(u), epsilon = 1e-14);
        }
        let x = [0.21, 0.64];
        let mixm_zero = Mixm::new(f.clone(), ParamVector::zeros(f.len())).unwrap();
        for (a, b) in zero.score(&x).unwrap().iter().zip(mixm_zero.score(&x).unwrap()) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }

        let theta = vec![0.05, -0.03, 0.1, 0.02, -0.04, 0.01, 0.03];
        let model = Sgm::new(f.clone(), ParamVector::new(theta.clone()).unwrap()).unwrap();
        let score = model.score(&x).unwrap();
        let h = 1e-6;
        for i in 0..f.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[i] += h;
            tm[i] -= h;
            let lp = Sgm::new(f.clone(), ParamVector::new(tp).unwrap()).unwrap().density(&x).unwrap().ln();
            let lm = Sgm::new(f.clone(), ParamVector::new(tm).unwrap()).unwrap().density(&x).unwrap().ln();
            assert!(((lp - lm) / (2.0 * h) - score[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn mixm_examples() {
        let f = FrequencySet::new(2, vec![vec![1, 1]]).unwrap();
        let m = Mixm::new(f.clone(), ParamVector::new(vec![0.3]).unwrap()).unwrap();
        let x = [0.2, 0.7];
        assert_relative_eq!(m.density(&x).unwrap(), 1.0 + 0.6 * c(0.2) * c(0.7), epsilon = 1e-15);
        let z = Mixm::new(f, ParamVector::zeros(1)).unwrap();
        assert_eq!(z.density(&x).unwrap(), 1.0);
    }

    #[test]
    fn fisher_origin_values() {
        let f = FrequencySet::new(3, vec![vec![1, 1, 0], vec![2, 0, 0], vec![1, 1, 1]]).unwrap();
        let j = fisher_origin(&f);
        assert_eq!(f.as_vecs(), &[vec![2, 0, 0], vec![1, 1, 0], vec![1, 1, 1]]);
        assert_eq!(j, vec![8.0, 1.0, 9.0 / 8.0]);
    }

    #[test]
    fn fisher_closed_forms() {
        assert_relative_eq!(fisher_closed_1d(1, 0.6).unwrap(), 0.2 / (0.36 * 0.8), epsilon = 1e-14);
        assert_relative_eq!(fisher_closed_1d(1, 0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(fisher_closed_1d(2, 1e-9).unwrap(), 8.0, epsilon = 1e-12);
        assert_relative_eq!(fisher_closed_corr(0.6).unwrap(), 0.4 / (0.36 * 0.8), epsilon = 1e-14);
        assert_relative_eq!(fisher_closed_corr(0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(fisher_closed_1d(2, 0.25).is_err());
        assert!(fisher_closed_corr(-1.0).is_err());
        // direct (unrationalized) expression away from zero
        let t: f64 = 0.3;
        let s = (1.0 - t * t).sqrt();
        assert_relative_eq!(fisher_closed_corr(t).unwrap(), 2.0 * (1.0 - s) / (t * t * s), max_relative = 1e-12);
    }

    fn random_model(seed: &[f64]) -> Sgm {
        let f = FrequencySet::standard(2).unwrap();
        let raw: Vec<f64> = seed.iter().map(|v| v * 0.15).collect();
        Sgm::new(f, ParamVector::new(raw).unwrap()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn hessian_is_symmetric_and_matches_potential_fd(
            seed in proptest::collection::vec(-1.0f64..1.0, 7),
            x0 in 0.05f64..0.95, x1 in 0.05f64..0.95,
        ) {
            let model = random_model(&seed);
            let x = [x0, x1];
            let h = model.hessian(&x);
            prop_assert_eq!(h[(0, 1)], h[(1, 0)]);
            let step = 1e-4;
            for a in 0..2 {
                for b in 0..2 {
                    let eval = |da: f64, db: f64| {
                        let mut y = x;
                        y[a] += da;
                        y[b] += db;
                        model.potential(&y)
                    };
                    let fd = (eval(step, step) - eval(step, -step) - eval(-step, step) + eval(-step, -step)) / (4.0 * step * step);
                    let rel = (fd - h[(a, b)]).abs() / h[(a, b)].abs().max(1.0);
                    prop_assert!(rel < 1e-6, "entry ({a},{b}) fd {fd} analytic {}", h[(a, b)]);
                }
            }
        }

        #[test]
        fn gradient_map_is_monotone(
            seed in proptest::collection::vec(-1.0f64..1.0, 7),
            x in proptest::collection::vec(0.0f64..1.0, 2),
            y in proptest::collection::vec(0.0f64..1.0, 2),
        ) {
            // 0.15 · Σ|θ|u_j² stays below 1 for the m = 2 standard set
            let model = random_model(&seed);
            prop_assume!((x[0] - y[0]).abs() + (x[1] - y[1]).abs() > 1e-6);
            let gx = model.gradient_map(&x);
            let gy = model.gradient_map(&y);
            let inner: f64 = (0..2).map(|j| (gx[j] - gy[j]) * (x[j] - y[j])).sum();
            prop_assert!(inner > 0.0);
        }

        #[test]
        fn score_at_zero_matches_mixm(x in proptest::collection::vec(0.0f64..1.0, 3)) {
            let f = FrequencySet::standard(3).unwrap();
            let sgm = Sgm::new(f.clone(), ParamVector::zeros(f.len())).unwrap();
            let origin = score_at_origin(&f, &x);
            for (a, b) in sgm.score(&x).unwrap().iter().zip(&origin) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
