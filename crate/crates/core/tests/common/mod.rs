#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgm_core::maxdet::{AffineMatrix, LinearConstraint, LogDetTerm, MaxDetProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let v = rng.random_range(-scale..scale);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// Random bounded maxdet instance with `θ = 0` strictly feasible.
pub fn random_problem(rng: &mut ChaCha8Rng) -> MaxDetProblem {
    let nvars = rng.random_range(1..=4);
    let d = rng.random_range(1..=4);
    let mut p = MaxDetProblem::new(nvars);
    let affine = |rng: &mut ChaCha8Rng| {
        AffineMatrix::new(
            DMatrix::identity(d, d),
            (0..nvars).map(|k| (k, random_symmetric(rng, d, 0.5))).collect(),
        )
    };
    for _ in 0..rng.random_range(1..=4) {
        let weight = rng.random_range(0.5..2.0);
        p.objective_terms.push(LogDetTerm { weight, matrix: affine(rng) });
    }
    p.psd_constraints.push(affine(rng));
    for k in 0..nvars {
        for sign in [1.0, -1.0] {
            let mut a = vec![0.0; nvars];
            a[k] = sign;
            p.linear_constraints.push(LinearConstraint { a, b: rng.random_range(0.5..2.0) });
        }
    }
    let a: Vec<f64> = (0..nvars).map(|_| rng.random_range(-1.0..1.0)).collect();
    p.linear_constraints.push(LinearConstraint { a, b: rng.random_range(0.2..1.0) });
    p
}

/// A strictly feasible point found by shrinking a random direction.
pub fn random_feasible(p: &MaxDetProblem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x: Vec<f64> = (0..p.nvars).map(|_| rng.random_range(-1.0..1.0)).collect();
    loop {
        let ok = sgm_core::maxdet::constraint_margin(p, &x) > 1e-3
            && p.objective_terms.iter().all(|t| {
                sgm_core::linalg::min_eigenvalue(&t.matrix.eval(&x)) > 1e-3
            });
        if ok {
            return x;
        }
        for v in x.iter_mut() {
            *v *= 0.5;
        }
    }
}

pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Cell of `x` among `bins^m` equal cells, first axis slowest.
pub fn cell_index(x: &[f64], bins: usize) -> usize {
    x.iter().fold(0, |acc, &v| acc * bins + ((v * bins as f64) as usize).min(bins - 1))
}

/// Pearson statistic of `data` against cell probabilities `probs`.
pub fn chi_square(data: &sgm_core::estimators::SampleMatrix, bins: usize, probs: &[f64]) -> f64 {
    let mut counts = vec![0usize; probs.len()];
    for r in data.rows() {
        counts[cell_index(r, bins)] += 1;
    }
    let n = data.n() as f64;
    counts.iter().zip(probs).map(|(&c, &p)| (c as f64 - n * p).powi(2) / (n * p)).sum()
}

/// Upper 1% point of χ²_k (Wilson–Hilferty).
pub fn chi_square_99(k: usize) -> f64 {
    let k = k as f64;
    let z = 2.326_347_874_040_841;
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}
