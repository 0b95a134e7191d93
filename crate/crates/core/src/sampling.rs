//! Exact samplers.
//!
//! SGM and MixM draws use rejection from the uniform proposal with a
//! closed-form envelope. Work is cut into fixed shards of [`SHARD`] accepted
//! samples; shard `s` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream
//! `s`, so the output depends only on the seed and never on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::SampleMatrix;
use crate::feasibility::axis_loads;
use crate::model::{norm_sq, Density, FrequencySet, Mixm, Sgm};
use crate::par;

/// Accepted samples per shard.
pub const SHARD: usize = 256;

/// Envelope `Π_j (1 + Σ_u |θ_u| u_j²)` of the SGM density.
pub fn rejection_bound(freqs: &FrequencySet, theta: &[f64]) -> f64 {
    axis_loads(freqs, theta).iter().map(|l| 1.0 + l).product()
}

/// Envelope `1 + Σ_u |θ_u| ‖u‖²` of the MixM density.
pub fn mixm_bound(freqs: &FrequencySet, theta: &[f64]) -> f64 {
    1.0 + freqs.iter().zip(theta).map(|(u, t)| t.abs() * norm_sq(u)).sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct Draws {
    pub data: SampleMatrix,
    /// Uniform proposals consumed (accepted and rejected).
    pub proposals: u64,
    pub bound: f64,
}

impl Draws {
    pub fn acceptance_rate(&self) -> f64 {
        self.data.n() as f64 / self.proposals as f64
    }
}

fn shard_rng(seed: u64, shard: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shard as u64);
    rng
}

fn shard_sizes(n: usize) -> Vec<usize> {
    (0..n.div_ceil(SHARD)).map(|s| SHARD.min(n - s * SHARD)).collect()
}

/// Rejection sampling from `density` under the envelope `bound`.
pub fn rejection_sample<D: Density>(model: &D, bound: f64, n: usize, seed: u64) -> Result<Draws> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let m = model.dim();
    let shards = shard_sizes(n);
    let out = par::map_indexed(shards.len(), |s| -> Result<(Vec<f64>, u64)> {
        let mut rng = shard_rng(seed, s);
        let mut values = Vec::with_capacity(shards[s] * m);
        let mut x = vec![0.0; m];
        let mut proposals = 0u64;
        while values.len() < shards[s] * m {
            for xj in x.iter_mut() {
                *xj = rng.random::<f64>();
            }
            let u: f64 = rng.random();
            proposals += 1;
            let p = model.density(&x)?;
            if p > bound * (1.0 + 1e-12) {
                return Err(Error::BoundViolation { density: p, bound });
            }
            if u * bound < p {
                values.extend_from_slice(&x);
            }
        }
        Ok((values, proposals))
    });
    let mut values = Vec::with_capacity(n * m);
    let mut proposals = 0;
    for r in out {
        let (v, p) = r?;
        values.extend(v);
        proposals += p;
    }
    Ok(Draws { data: SampleMatrix::new(m, values)?, proposals, bound })
}

pub fn sample_sgm(model: &Sgm, n: usize, seed: u64) -> Result<Draws> {
    let bound = rejection_bound(model.freqs(), model.theta().as_slice());
    rejection_sample(model, bound, n, seed)
}

pub fn sample_mixm(model: &Mixm, n: usize, seed: u64) -> Result<Draws> {
    let bound = mixm_bound(model.freqs(), model.theta().as_slice());
    rejection_sample(model, bound, n, seed)
}

/// Dimension of the benchmark generator.
pub const BENCHMARK_DIM: usize = 5;

/// Five-dimensional benchmark: `x₁ ~ N(0,1)`, `x₂ | x₁ ~ N(x₁, 1)`,
/// `x₃ | x₂ ~ N(0, 1 + tanh x₂)`, and `(x₄, x₅) | x₃` standard bivariate
/// normal with correlation `tanh x₃`.
pub fn sample_benchmark5(n: usize, seed: u64) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    let shards = shard_sizes(n);
    let out = par::map_indexed(shards.len(), |s| {
        let mut rng = shard_rng(seed, s);
        let mut z = || -> f64 { rng.sample(StandardNormal) };
        let mut values = Vec::with_capacity(shards[s] * BENCHMARK_DIM);
        for _ in 0..shards[s] {
            let x1 = z();
            let x2 = x1 + z();
            let x3 = (1.0 + x2.tanh()).sqrt() * z();
            let r = x3.tanh();
            let (z4, z5) = (z(), z());
            let x4 = z4;
            let x5 = r * z4 + (1.0 - r * r).sqrt() * z5;
            values.extend_from_slice(&[x1, x2, x3, x4, x5]);
        }
        values
    });
    SampleMatrix::new(BENCHMARK_DIM, out.concat())
}

/// Summary used by experiment drivers and the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct SamplingSummary {
    pub n: usize,
    pub proposals: u64,
    pub bound: f64,
    pub acceptance_rate: f64,
}

impl From<&Draws> for SamplingSummary {
    fn from(d: &Draws) -> Self {
        Self { n: d.data.n(), proposals: d.proposals, bound: d.bound, acceptance_rate: d.acceptance_rate() }
    }
}
