//! Parameter regions of the structural gradient model.
//!
//! * `Θ` — Hessian positive semidefinite on the whole cube (checked
//!   approximately by [`min_eig_grid`]).
//! * `Θ_M°` — inner lattice approximation: the rescaled Hessian is positive
//!   definite at every point of `{0, 1/M, …, 1}^m`.
//! * `Θ_τ^lit` — polyhedral region `Σ_u |θ_u| u_j² ≤ τ` for every axis.
//!
//! The Fejér-kernel reconstruction is kept here as a numerical oracle for the
//! lattice approximation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, EPS_PD};
use crate::model::{add_hessian_basis, hessian_with, norm_sq, FrequencySet};
use crate::par;

/// Default cap on the number of lattice (or reconstruction) points.
pub const DEFAULT_POINT_CAP: u128 = 10_000_000;

/// Which tractable parameter region to use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RegionSpec {
    /// `Θ_M°` with lattice resolution `M`.
    Lattice { m: u32 },
    /// `Θ_τ^lit` with budget `τ ∈ [0,1]`.
    Lit { tau: f64 },
}

impl RegionSpec {
    pub fn validate(&self, freqs: &FrequencySet) -> Result<()> {
        match *self {
            RegionSpec::Lattice { m } => {
                if m < freqs.u_max() + 1 {
                    return Err(Error::InvalidArgument(format!(
                        "lattice resolution M = {m} must be at least U_max + 1 = {}",
                        freqs.u_max() + 1
                    )));
                }
            }
            RegionSpec::Lit { tau } => {
                if !(0.0..=1.0).contains(&tau) {
                    return Err(Error::InvalidArgument(format!("τ = {tau} must lie in [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

fn check_len(freqs: &FrequencySet, theta: &[f64]) -> Result<()> {
    if theta.len() != freqs.len() {
        return Err(Error::DimensionMismatch { expected: freqs.len(), got: theta.len() });
    }
    Ok(())
}

/// Per-axis loads `Σ_u |θ_u| u_j²`.
pub fn axis_loads(freqs: &FrequencySet, theta: &[f64]) -> Vec<f64> {
    let mut loads = vec![0.0; freqs.dim()];
    for (u, &t) in freqs.iter().zip(theta) {
        for (j, &uj) in u.iter().enumerate() {
            loads[j] += t.abs() * (uj as f64) * (uj as f64);
        }
    }
    loads
}

/// `min_j (τ − Σ_u |θ_u| u_j²)`; nonnegative exactly on `Θ_τ^lit`.
pub fn lit_margin(freqs: &FrequencySet, theta: &[f64], tau: f64) -> Result<f64> {
    check_len(freqs, theta)?;
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!("τ = {tau} must lie in [0, 1]")));
    }
    Ok(axis_loads(freqs, theta)
        .into_iter()
        .map(|l| tau - l)
        .fold(f64::INFINITY, f64::min))
}

/// Margin of the mixture model's conservative region, `τ − Σ_u |θ_u| ‖u‖²`.
pub fn mixm_lit_margin(freqs: &FrequencySet, theta: &[f64], tau: f64) -> Result<f64> {
    check_len(freqs, theta)?;
    Ok(tau - freqs.iter().zip(theta).map(|(u, t)| t.abs() * norm_sq(u)).sum::<f64>())
}

/// Per-frequency factors `Π_j (1 − u_j/M)` of the operator `K_M`.
pub fn km_factors(freqs: &FrequencySet, m: u32) -> Result<Vec<f64>> {
    RegionSpec::Lattice { m }.validate(freqs)?;
    Ok(freqs
        .iter()
        .map(|u| u.iter().map(|&k| 1.0 - k as f64 / m as f64).product())
        .collect())
}

/// `(K_M θ)_u = θ_u / Π_j (1 − u_j/M)`.
pub fn scale_km(freqs: &FrequencySet, theta: &[f64], m: u32) -> Result<Vec<f64>> {
    check_len(freqs, theta)?;
    Ok(km_factors(freqs, m)?
        .into_iter()
        .zip(theta)
        .map(|(f, t)| t / f)
        .collect())
}

/// Points of `L_M^m`, enumerated with the first coordinate varying fastest.
pub fn lattice_points(dim: usize, m: u32, cap: u128) -> Result<Vec<Vec<f64>>> {
    let count = (m as u128 + 1).checked_pow(dim as u32).unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::ResourceCap { requested: count, cap });
    }
    let side = m as usize + 1;
    Ok((0..count as usize)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let k = idx % side;
                    idx /= side;
                    k as f64 / m as f64
                })
                .collect()
        })
        .collect())
}

/// Outcome of a lattice membership test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeCheck {
    pub feasible: bool,
    /// Minimum eigenvalue of the rescaled Hessian over the lattice.
    pub margin: f64,
}

/// Membership in `Θ_M°`: `D²ψ(ξ|K_M θ) ≻ 0` at every `ξ ∈ L_M^m`.
pub fn lattice_feasible(freqs: &FrequencySet, theta: &[f64], m: u32) -> Result<LatticeCheck> {
    lattice_feasible_capped(freqs, theta, m, DEFAULT_POINT_CAP)
}

pub fn lattice_feasible_capped(
    freqs: &FrequencySet,
    theta: &[f64],
    m: u32,
    cap: u128,
) -> Result<LatticeCheck> {
    let scaled = scale_km(freqs, theta, m)?;
    let points = lattice_points(freqs.dim(), m, cap)?;
    let margin = par::argmin_indexed(points.len(), |i| {
        min_eigenvalue(&hessian_with(freqs, &scaled, &points[i]))
    })
    .map(|(_, v)| v)
    .unwrap_or(f64::INFINITY);
    Ok(LatticeCheck { feasible: margin > EPS_PD, margin })
}

/// Default grid resolution used by [`min_eig_grid`] for each dimension.
pub fn default_resolution(dim: usize) -> usize {
    match dim {
        0..=2 => 201,
        3 => 41,
        _ => 41,
    }
}

/// Number of random starts used for `m ≥ 4`.
pub const MULTISTARTS: usize = 64;

/// Approximate `min_{x ∈ [0,1]^m} λ_min(D²ψ(x|θ))`.
///
/// For `m ≤ 3` this is an exhaustive scan of a regular grid with
/// `resolution` points per axis (endpoints included). For `m ≥ 4` it runs
/// coordinate descent from the cube vertices (when there are at most 4096)
/// and [`MULTISTARTS`] seeded random points, scanning each coordinate line at
/// `resolution` points before a golden-section refinement. The result is an
/// upper bound on the true minimum.
pub fn min_eig_grid(freqs: &FrequencySet, theta: &[f64], resolution: usize) -> Result<f64> {
    check_len(freqs, theta)?;
    if resolution < 2 {
        return Err(Error::InvalidArgument("resolution must be at least 2".into()));
    }
    let dim = freqs.dim();
    let eval = |x: &[f64]| min_eigenvalue(&hessian_with(freqs, theta, x));
    if dim <= 3 {
        let count = resolution.pow(dim as u32);
        let step = 1.0 / (resolution - 1) as f64;
        let best = par::argmin_indexed(count, |mut idx| {
            let mut x = [0.0; 3];
            for xj in x.iter_mut().take(dim) {
                *xj = (idx % resolution) as f64 * step;
                idx /= resolution;
            }
            eval(&x[..dim])
        });
        return Ok(best.map(|(_, v)| v).unwrap_or(f64::INFINITY));
    }

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if dim <= 12 {
        for v in 0..(1usize << dim) {
            starts.push((0..dim).map(|j| ((v >> j) & 1) as f64).collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_e1e5);
    for _ in 0..MULTISTARTS {
        starts.push((0..dim).map(|_| rng.random::<f64>()).collect());
    }
    let results = par::map_slice(&starts, |x0| coordinate_descent(&eval, x0.clone(), resolution));
    Ok(results.into_iter().fold(f64::INFINITY, f64::min))
}

fn coordinate_descent<F: Fn(&[f64]) -> f64>(eval: &F, mut x: Vec<f64>, resolution: usize) -> f64 {
    let mut best = eval(&x);
    for _sweep in 0..50 {
        let before = best;
        for j in 0..x.len() {
            let line = |t: f64, x: &mut Vec<f64>| {
                let old = x[j];
                x[j] = t;
                let v = eval(x);
                x[j] = old;
                v
            };
            let step = 1.0 / (resolution - 1) as f64;
            let mut arg = x[j];
            let mut val = best;
            for k in 0..resolution {
                let t = k as f64 * step;
                let v = line(t, &mut x);
                if v < val {
                    val = v;
                    arg = t;
                }
            }
            // golden-section refinement inside the bracket around the best grid point
            let (mut lo, mut hi) = ((arg - step).max(0.0), (arg + step).min(1.0));
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = hi - g * (hi - lo);
            let mut d = lo + g * (hi - lo);
            let mut fc = line(c, &mut x);
            let mut fd = line(d, &mut x);
            for _ in 0..40 {
                if fc < fd {
                    hi = d;
                    d = c;
                    fd = fc;
                    c = hi - g * (hi - lo);
                    fc = line(c, &mut x);
                } else {
                    lo = c;
                    c = d;
                    fc = fd;
                    d = lo + g * (hi - lo);
                    fd = line(d, &mut x);
                }
            }
            let (t, v) = if fc < fd { (c, fc) } else { (d, fd) };
            if v < val {
                val = v;
                arg = t;
            }
            x[j] = arg;
            best = val;
        }
        if before - best < 1e-13 {
            break;
        }
    }
    best
}

/// Exact minimum over the cube of the smaller Hessian eigenvalue for
/// `𝒰 = {(1,1), (2,2)}`.
///
/// The eigenvalues are `1 + ρ₁ cos z + ρ₂ cos 2z` with `ρ₁ = θ₍₁,₁₎`,
/// `ρ₂ = 4θ₍₂,₂₎` and `z = π(x₁ ± x₂)` sweeping a full period, so the
/// minimum is that of `(1 − ρ₂) + ρ₁ c + 2ρ₂ c²` over `c ∈ [−1, 1]`.
pub fn ma2_margin(theta_11: f64, theta_22: f64) -> f64 {
    let (r1, r2) = (theta_11, 4.0 * theta_22);
    let f = |c: f64| (1.0 - r2) + r1 * c + 2.0 * r2 * c * c;
    let mut best = f(-1.0).min(f(1.0));
    if r2 > 0.0 {
        let vertex = -r1 / (4.0 * r2);
        if vertex.abs() <= 1.0 {
            best = best.min(f(vertex));
        }
    }
    best
}

/// Exact membership in `Θ` for `𝒰 = {(1,1), (2,2)}`: the MA(2) spectral
/// density `1 + ρ₁ cos z + ρ₂ cos 2z` is nonnegative iff
/// `1 − |ρ₁| + ρ₂ ≥ 0` and, when its vertex `c* = −ρ₁/(4ρ₂)` lies in
/// `[−1,1]`, `ρ₁² ≤ 8ρ₂(1 − ρ₂)`.
pub fn ma2_feasible(theta_11: f64, theta_22: f64) -> bool {
    let (r1, r2) = (theta_11, 4.0 * theta_22);
    if 1.0 - r1.abs() + r2 < 0.0 {
        return false;
    }
    if r2 > 0.0 && r1.abs() <= 4.0 * r2 {
        return r1 * r1 <= 8.0 * r2 * (1.0 - r2);
    }
    true
}

/// Fejér-type kernel `Q_M(z) = (1/2M²) (sin(πMz/2) / sin(πz/2))²`.
///
/// Near even integers, where the ratio is 0/0, the equivalent form
/// `(1/2M²) |Σ_{a<M} e^{iπaz}|²` is summed directly.
pub fn fejer_kernel(m: u32, z: f64) -> f64 {
    let mf = m as f64;
    let den = (0.5 * PI * z).sin();
    if den.abs() > 1e-4 {
        let r = (0.5 * PI * mf * z).sin() / den;
        r * r / (2.0 * mf * mf)
    } else {
        let (mut re, mut im) = (0.0, 0.0);
        for a in 0..m {
            let ang = PI * a as f64 * z;
            re += ang.cos();
            im += ang.sin();
        }
        (re * re + im * im) / (2.0 * mf * mf)
    }
}

/// `R_M = {−(M−1)/M, …, (M−1)/M, 1}`.
pub fn reconstruction_nodes(m: u32) -> Vec<f64> {
    let mi = m as i64;
    (-(mi - 1)..=mi).map(|k| k as f64 / m as f64).collect()
}

/// Right-hand side of the Fejér reconstruction
/// `Σ_{ξ ∈ R_M^m} D²ψ(ξ|K_M θ) Π_j Q_M(x_j − ξ_j)`, with the Hessian at
/// `ξ` outside the cube taken from the periodic even extension.
pub fn fejer_reconstruct(
    freqs: &FrequencySet,
    theta: &[f64],
    m: u32,
    x: &[f64],
) -> Result<nalgebra::DMatrix<f64>> {
    fejer_reconstruct_capped(freqs, theta, m, x, DEFAULT_POINT_CAP)
}

pub fn fejer_reconstruct_capped(
    freqs: &FrequencySet,
    theta: &[f64],
    m: u32,
    x: &[f64],
    cap: u128,
) -> Result<nalgebra::DMatrix<f64>> {
    let dim = freqs.dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
    }
    let scaled = scale_km(freqs, theta, m)?;
    let nodes = reconstruction_nodes(m);
    let side = nodes.len();
    let count = (side as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::ResourceCap { requested: count, cap });
    }
    // kernel weights per axis
    let weights: Vec<Vec<f64>> = (0..dim)
        .map(|j| nodes.iter().map(|&xi| fejer_kernel(m, x[j] - xi)).collect())
        .collect();
    let terms = par::map_indexed(count as usize, |mut idx| {
        let mut xi = vec![0.0; dim];
        let mut w = 1.0;
        for j in 0..dim {
            let k = idx % side;
            idx /= side;
            xi[j] = nodes[k];
            w *= weights[j][k];
        }
        let mut h = nalgebra::DMatrix::identity(dim, dim) * w;
        for (u, &t) in freqs.iter().zip(&scaled) {
            if t != 0.0 {
                add_hessian_basis(u, &xi, w * t, &mut h);
            }
        }
        h
    });
    let mut total = nalgebra::DMatrix::zeros(dim, dim);
    for t in &terms {
        total += t;
    }
    Ok(total)
}
