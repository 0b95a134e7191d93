//! Determinant maximization by log-barrier path following.
//!
//! Solves
//!
//! ```text
//! maximize   cᵀθ + Σ_i w_i log det A_i(θ)
//! subject to B_k(θ) ≻ 0,   a_lᵀθ ≤ b_l
//! ```
//!
//! where every `A_i` and `B_k` is affine in `θ`. Each outer iteration centers
//! the barrier objective `f(θ) + μ (Σ_k log det B_k(θ) + Σ_l log(b_l − a_lᵀθ))`
//! with damped Newton steps, then shrinks `μ` geometrically. The start point
//! is always `θ = 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{least_squares, null_space, Cholesky};
use crate::par;

/// `A(θ) = A₀ + Σ_k θ_k A_k`, stored sparsely over the variable index.
#[derive(Debug, Clone)]
pub struct AffineMatrix {
    pub constant: DMatrix<f64>,
    pub coefficients: Vec<(usize, DMatrix<f64>)>,
}

impl AffineMatrix {
    pub fn new(constant: DMatrix<f64>, coefficients: Vec<(usize, DMatrix<f64>)>) -> Self {
        Self { constant, coefficients }
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, theta: &[f64]) -> DMatrix<f64> {
        let mut a = self.constant.clone();
        for (k, ak) in &self.coefficients {
            let t = theta[*k];
            if t != 0.0 {
                a += ak * t;
            }
        }
        a
    }
}

/// One weighted `w log det A(θ)` term.
#[derive(Debug, Clone)]
pub struct LogDetTerm {
    pub weight: f64,
    pub matrix: AffineMatrix,
}

/// `aᵀθ ≤ b`.
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone)]
pub struct MaxDetProblem {
    pub nvars: usize,
    /// Linear objective coefficients `c`; empty means zero.
    pub linear_objective: Vec<f64>,
    pub objective_terms: Vec<LogDetTerm>,
    pub psd_constraints: Vec<AffineMatrix>,
    pub linear_constraints: Vec<LinearConstraint>,
}

impl MaxDetProblem {
    pub fn new(nvars: usize) -> Self {
        Self {
            nvars,
            linear_objective: Vec::new(),
            objective_terms: Vec::new(),
            psd_constraints: Vec::new(),
            linear_constraints: Vec::new(),
        }
    }

    /// Barrier parameter count `ν`: total PSD dimension plus linear constraints.
    pub fn barrier_degree(&self) -> usize {
        self.psd_constraints.iter().map(|b| b.dim()).sum::<usize>() + self.linear_constraints.len()
    }

    fn validate(&self) -> Result<()> {
        let check = |m: &AffineMatrix| -> Result<()> {
            if m.constant.nrows() != m.constant.ncols() {
                return Err(Error::InvalidArgument("affine matrix constant is not square".into()));
            }
            for (k, a) in &m.coefficients {
                if *k >= self.nvars || a.shape() != m.constant.shape() {
                    return Err(Error::InvalidArgument(format!(
                        "bad coefficient for variable {k} in affine matrix"
                    )));
                }
            }
            Ok(())
        };
        for t in &self.objective_terms {
            check(&t.matrix)?;
        }
        for b in &self.psd_constraints {
            check(b)?;
        }
        for l in &self.linear_constraints {
            if l.a.len() != self.nvars {
                return Err(Error::DimensionMismatch { expected: self.nvars, got: l.a.len() });
            }
        }
        if !self.linear_objective.is_empty() && self.linear_objective.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                got: self.linear_objective.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub barrier_init: f64,
    pub barrier_shrink: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_outer: usize,
    /// Stop once `μ ν ≤ gap_tol (1 + ‖∇f(0)‖)`.
    pub gap_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            barrier_init: 1.0,
            barrier_shrink: 0.2,
            newton_tol: 1e-9,
            max_newton: 50,
            max_outer: 30,
            gap_tol: 1e-13,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.barrier_init > 0.0
            && self.barrier_shrink > 0.0
            && self.barrier_shrink < 1.0
            && self.newton_tol > 0.0
            && self.max_newton > 0
            && self.max_outer > 0
            && self.gap_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid solver config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    BudgetExhausted,
    LineSearchStalled,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub newton_iterations: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub status: SolveStatus,
    pub final_mu: f64,
    /// `(μ, f(θ(μ)))` at each centered point.
    pub path: Vec<(f64, f64)>,
}

/// Value, gradient and curvature of a concave function.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl Evaluation {
    fn zeros(n: usize) -> Self {
        Self { value: 0.0, gradient: DVector::zeros(n), hessian: DMatrix::zeros(n, n) }
    }

    fn add(&mut self, other: &Evaluation) {
        self.value += other.value;
        self.gradient += &other.gradient;
        self.hessian += &other.hessian;
    }
}

const CHUNK: usize = 32;

/// Accumulates `w log det A(θ)` with derivatives into `acc`; `None` when some
/// `A(θ)` fails to factor.
fn logdet_into(
    acc: &mut Evaluation,
    weight: f64,
    matrix: &AffineMatrix,
    theta: &[f64],
) -> Option<()> {
    let a = matrix.eval(theta);
    let chol = Cholesky::new(&a, 0.0)?;
    acc.value += weight * chol.log_det();
    // whitened coefficients W_k = L⁻¹ A_k L⁻ᵀ for all k via two products
    let d = a.nrows();
    let nk = matrix.coefficients.len();
    let linv = chol.l_inverse();
    let mut side = DMatrix::zeros(d, d * nk);
    for (c, (_, ak)) in matrix.coefficients.iter().enumerate() {
        side.view_mut((0, c * d), (d, d)).copy_from(ak);
    }
    let left = &linv * side;
    let mut stacked = DMatrix::zeros(d * nk, d);
    for c in 0..nk {
        stacked.view_mut((c * d, 0), (d, d)).copy_from(&left.view((0, c * d), (d, d)));
    }
    // row block c of `whitened` is W_cᵀ = W_c
    let whitened = stacked * linv.transpose();
    // columns hold W_k as symmetric vectors (off-diagonal entries scaled by
    // √2), so that the Gram matrix gives tr(W_k W_l)
    let mut packed = DMatrix::zeros(d * (d + 1) / 2, nk);
    for (c, (k, _)) in matrix.coefficients.iter().enumerate() {
        let w = whitened.view((c * d, 0), (d, d));
        acc.gradient[*k] += weight * w.trace();
        let mut r = 0;
        for i in 0..d {
            packed[(r, c)] = w[(i, i)];
            r += 1;
            for j in 0..i {
                packed[(r, c)] = std::f64::consts::SQRT_2 * 0.5 * (w[(i, j)] + w[(j, i)]);
                r += 1;
            }
        }
    }
    let gram = packed.transpose() * &packed;
    for (a, (k, _)) in matrix.coefficients.iter().enumerate() {
        for (b, (l, _)) in matrix.coefficients.iter().enumerate() {
            acc.hessian[(*k, *l)] -= weight * gram[(a, b)];
        }
    }
    Some(())
}

/// Sums `w log det` terms over a list, chunked for parallel evaluation with
/// an ordered reduction.
fn logdet_sum(n: usize, terms: &[(f64, &AffineMatrix)], theta: &[f64]) -> Option<Evaluation> {
    let chunks = terms.len().div_ceil(CHUNK);
    let partial = par::map_indexed(chunks, |c| {
        let mut acc = Evaluation::zeros(n);
        for &(w, m) in &terms[c * CHUNK..((c + 1) * CHUNK).min(terms.len())] {
            logdet_into(&mut acc, w, m, theta)?;
        }
        Some(acc)
    });
    let mut total = Evaluation::zeros(n);
    for p in partial {
        total.add(&p?);
    }
    Some(total)
}

fn check_theta(problem: &MaxDetProblem, theta: &[f64]) -> Result<()> {
    if theta.len() != problem.nvars {
        return Err(Error::DimensionMismatch { expected: problem.nvars, got: theta.len() });
    }
    Ok(())
}

/// Objective value, gradient and (negative semidefinite) curvature at `θ`.
pub fn objective_eval(problem: &MaxDetProblem, theta: &[f64]) -> Result<Evaluation> {
    check_theta(problem, theta)?;
    let terms: Vec<(f64, &AffineMatrix)> =
        problem.objective_terms.iter().map(|t| (t.weight, &t.matrix)).collect();
    let mut e = logdet_sum(problem.nvars, &terms, theta).ok_or(Error::NotPositiveDefinite)?;
    for (k, c) in problem.linear_objective.iter().enumerate() {
        e.value += c * theta[k];
        e.gradient[k] += c;
    }
    Ok(e)
}

/// Log-barrier of the constraints (unit weight); `None` outside the interior.
fn barrier_eval(problem: &MaxDetProblem, theta: &[f64]) -> Option<Evaluation> {
    let n = problem.nvars;
    let terms: Vec<(f64, &AffineMatrix)> = problem.psd_constraints.iter().map(|b| (1.0, b)).collect();
    let mut e = logdet_sum(n, &terms, theta)?;
    for l in &problem.linear_constraints {
        let s = l.b - dot(&l.a, theta);
        if !(s > 0.0) {
            return None;
        }
        e.value += s.ln();
        for i in 0..n {
            if l.a[i] == 0.0 {
                continue;
            }
            e.gradient[i] -= l.a[i] / s;
            for j in 0..n {
                e.hessian[(i, j)] -= l.a[i] * l.a[j] / (s * s);
            }
        }
    }
    Some(e)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn barrier_objective(problem: &MaxDetProblem, theta: &[f64], mu: f64) -> Option<Evaluation> {
    let mut f = objective_eval(problem, theta).ok()?;
    if problem.barrier_degree() > 0 {
        let b = barrier_eval(problem, theta)?;
        f.value += mu * b.value;
        f.gradient += b.gradient * mu;
        f.hessian += b.hessian * mu;
    }
    Some(f)
}

fn barrier_value(problem: &MaxDetProblem, theta: &[f64], mu: f64) -> Option<f64> {
    // cheaper than a full evaluation: log-determinants only
    let mut v = 0.0;
    for t in &problem.objective_terms {
        v += t.weight * Cholesky::new(&t.matrix.eval(theta), 0.0)?.log_det();
    }
    v += dot(&problem.linear_objective, theta);
    if problem.barrier_degree() > 0 {
        let mut b = 0.0;
        for m in &problem.psd_constraints {
            b += Cholesky::new(&m.eval(theta), 0.0)?.log_det();
        }
        for l in &problem.linear_constraints {
            let s = l.b - dot(&l.a, theta);
            if !(s > 0.0) {
                return None;
            }
            b += s.ln();
        }
        v += mu * b;
    }
    v.is_finite().then_some(v)
}

/// Smallest constraint margin at `θ`: minimum eigenvalue for PSD constraints,
/// slack for linear ones.
pub fn constraint_margin(problem: &MaxDetProblem, theta: &[f64]) -> f64 {
    let mut margin = f64::INFINITY;
    for b in &problem.psd_constraints {
        margin = margin.min(crate::linalg::min_eigenvalue(&b.eval(theta)));
    }
    for l in &problem.linear_constraints {
        margin = margin.min(l.b - dot(&l.a, theta));
    }
    margin
}

/// Newton direction `(−H)⁻¹ g`, regularized if `−H` is numerically singular.
fn newton_direction(e: &Evaluation) -> DVector<f64> {
    let n = e.gradient.len();
    let neg = -&e.hessian;
    let scale = (0..n).map(|i| neg[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 0.0;
    loop {
        let mut m = neg.clone();
        for i in 0..n {
            m[(i, i)] += ridge;
        }
        if let Some(c) = Cholesky::new(&m, 0.0) {
            return c.solve(&e.gradient);
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 10.0 };
    }
}

/// Result of one damped Newton step.
#[derive(Debug, Clone)]
pub struct Step {
    pub theta: Vec<f64>,
    /// Newton decrement squared, `gᵀ(−H)⁻¹g`, at the starting point.
    pub decrement: f64,
    pub step_size: f64,
}

/// One damped Newton step on the barrier objective at parameter `μ`.
pub fn barrier_step(problem: &MaxDetProblem, theta: &[f64], mu: f64) -> Result<Step> {
    check_theta(problem, theta)?;
    let e = barrier_objective(problem, theta, mu).ok_or(Error::InfeasibleStart {
        margin: constraint_margin(problem, theta),
    })?;
    step_from(problem, theta, mu, &e)
}

fn step_from(problem: &MaxDetProblem, theta: &[f64], mu: f64, e: &Evaluation) -> Result<Step> {
    let d = newton_direction(e);
    let decrement = e.gradient.dot(&d);
    let mut t = 1.0;
    let mut trial = vec![0.0; theta.len()];
    const MIN_STEP: f64 = 1e-14;
    // When the predicted gain is near the rounding level of the objective,
    // value comparisons are meaningless; accept on gradient reduction instead.
    let fine = 0.5 * decrement <= 1e-10 * (1.0 + e.value.abs());
    let gnorm = e.gradient.norm();
    if gnorm == 0.0 {
        return Ok(Step { theta: theta.to_vec(), decrement: 0.0, step_size: 0.0 });
    }
    while t >= MIN_STEP {
        for i in 0..theta.len() {
            trial[i] = theta[i] + t * d[i];
        }
        if fine {
            if let Some(next) = barrier_objective(problem, &trial, mu) {
                if next.gradient.norm() < gnorm {
                    return Ok(Step { theta: trial, decrement, step_size: t });
                }
            }
        } else if let Some(v) = barrier_value(problem, &trial, mu) {
            if v >= e.value + 0.01 * t * decrement {
                return Ok(Step { theta: trial, decrement, step_size: t });
            }
        }
        t *= 0.5;
    }
    if fine {
        // already centered to rounding
        return Ok(Step { theta: theta.to_vec(), decrement, step_size: 0.0 });
    }
    Err(Error::LineSearchFailure { min_step: MIN_STEP })
}

/// KKT residual
///
/// ```text
/// r(θ) = min_{λ ≥ 0} ‖∇f(θ) + Σ_i λ_i ∇c_i(θ)‖ + Σ_i λ_i c_i(θ)
/// ```
///
/// over the constraint pieces `c_i`: linear slacks and quadratic forms
/// `vᵀB(θ)v` along near-null directions of each PSD constraint. Two multiplier candidates are tried and the smaller
/// value is reported: the barrier weights `λ_i = t / c_i` with the best scalar
/// `t`, and a nonnegative least-squares refit on the pieces with slack below
/// `1e-5`. The second avoids the rounding in `1/c_i` at tiny slacks. It
/// vanishes at an optimum and equals `‖∇f‖` without constraints.
pub fn kkt_residual(problem: &MaxDetProblem, theta: &[f64]) -> Result<f64> {
    let f = objective_eval(problem, theta)?;
    let nu = problem.barrier_degree() as f64;
    if nu == 0.0 {
        return Ok(f.gradient.norm());
    }
    let b = barrier_eval(problem, theta).ok_or(Error::InfeasibleStart {
        margin: constraint_margin(problem, theta),
    })?;
    let r = |t: f64| (&f.gradient + &b.gradient * t).norm() + t * nu;
    // convex in t; the optimum lies in [0, ‖∇f‖/ν]
    let (mut lo, mut hi) = (0.0, f.gradient.norm() / nu);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (r(c), r(d));
    for _ in 0..200 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = r(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = r(d);
        }
        if hi - lo <= 1e-16 * hi.max(1e-300) {
            break;
        }
    }
    let scalar = r(0.0).min(r(lo)).min(fc).min(fd);
    Ok(scalar.min(refit_residual(problem, theta, &f.gradient)))
}

/// Residual with multipliers refit by NNLS on the near-active pieces.
fn refit_residual(problem: &MaxDetProblem, theta: &[f64], grad: &DVector<f64>) -> f64 {
    const ACTIVE: f64 = 1e-5;
    let n = problem.nvars;
    let mut columns: Vec<(DVector<f64>, f64)> = Vec::new();
    for l in &problem.linear_constraints {
        let s = l.b - dot(&l.a, theta);
        if s <= ACTIVE {
            columns.push((-DVector::from_column_slice(&l.a), s));
        }
    }
    for bm in &problem.psd_constraints {
        let value = bm.eval(theta);
        let eig = value.clone().symmetric_eigen();
        let null: Vec<DVector<f64>> = (0..eig.eigenvalues.len())
            .filter(|&j| eig.eigenvalues[j] <= ACTIVE)
            .map(|j| eig.eigenvectors.column(j).into_owned())
            .collect();
        // dual directions: near-null eigenvectors and their pairwise (v_i ± v_j)/√2
        let mut dirs = null.clone();
        for i in 0..null.len() {
            for j in 0..i {
                dirs.push((&null[i] + &null[j]) * std::f64::consts::FRAC_1_SQRT_2);
                dirs.push((&null[i] - &null[j]) * std::f64::consts::FRAC_1_SQRT_2);
            }
        }
        for v in dirs {
            let mut col = DVector::zeros(n);
            for (k, ak) in &bm.coefficients {
                col[*k] += v.dot(&(ak * &v));
            }
            columns.push((col, v.dot(&(&value * &v))));
        }
    }
    if columns.is_empty() {
        return grad.norm();
    }
    let gmat = DMatrix::from_columns(&columns.iter().map(|c| c.0.clone()).collect::<Vec<_>>());
    let lambda = nnls(&gmat, &(-grad));
    let slack: f64 = columns.iter().zip(lambda.iter()).map(|(c, l)| c.1.max(0.0) * l).sum();
    (grad + &gmat * &lambda).norm() + slack
}

/// Lawson–Hanson nonnegative least squares `min_{x ≥ 0} ‖A x − b‖`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let k = a.ncols();
    let mut x = DVector::zeros(k);
    let mut passive = vec![false; k];
    let tol = 1e-13 * a.norm().max(1.0) * b.norm().max(1.0);
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
        let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
        let z = least_squares(&sub, b);
        let mut full = DVector::zeros(k);
        for (c, &i) in idx.iter().enumerate() {
            full[i] = z[c];
        }
        full
    };
    for _ in 0..(3 * k + 10) {
        let w = a.transpose() * (b - a * &x);
        let next = (0..k)
            .filter(|&i| !passive[i] && w[i] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = next else { break };
        passive[j] = true;
        loop {
            let z = solve_passive(&passive);
            if (0..k).all(|i| !passive[i] || z[i] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in 0..k {
                if passive[i] && z[i] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z[i]));
                }
            }
            for i in 0..k {
                x[i] += alpha * (z[i] - x[i]);
                if passive[i] && x[i] <= 1e-300 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Slack below which a constraint counts as active when polishing.
const POLISH_ACTIVE: f64 = 1e-5;
/// Relative slack left on active constraints after polishing.
const FACE_SLACK: f64 = 1e-15;

/// Orthonormal basis of `{d : a_i·d = 0, i ∈ rows}`.
fn null_basis(problem: &MaxDetProblem, rows: &[usize]) -> DMatrix<f64> {
    let normals = DMatrix::from_fn(rows.len(), problem.nvars, |i, j| problem.linear_constraints[rows[i]].a[j]);
    null_space(&normals)
}

/// Primal active-set refinement of a barrier solution with respect to the
/// linear constraints: reduced Newton steps on the current face, blocking
/// constraints added by a ratio test, and the constraint with the most
/// negative multiplier released. At tiny `μ` the barrier Hessian is too
/// ill-conditioned to resolve the free subspace or release a wrongly active
/// constraint; this recovers both. Returns `None` when a PSD constraint is
/// near-active.
fn polish(problem: &MaxDetProblem, theta: &[f64], scale: f64) -> Option<Vec<f64>> {
    if problem.psd_constraints.iter().any(|b| crate::linalg::min_eigenvalue(&b.eval(theta)) <= POLISH_ACTIVE) {
        return None;
    }
    let slack = |x: &[f64], i: usize| {
        let l = &problem.linear_constraints[i];
        l.b - dot(&l.a, x)
    };
    let ncons = problem.linear_constraints.len();
    let mut active: Vec<usize> = (0..ncons).filter(|&i| slack(theta, i) <= POLISH_ACTIVE).collect();
    let mut x = theta.to_vec();
    let mut e = objective_eval(problem, &x).ok()?;
    // move onto the active face: the barrier leaves slacks of order μ/λ there,
    // which the null-space steps below would otherwise keep fixed
    if !active.is_empty() {
        let a = DMatrix::from_fn(active.len(), problem.nvars, |r, c| problem.linear_constraints[active[r]].a[c]);
        let r = DVector::from_iterator(
            active.len(),
            active.iter().map(|&i| (slack(&x, i) - FACE_SLACK * (1.0 + problem.linear_constraints[i].b.abs())).max(0.0)),
        );
        let d = a.transpose() * least_squares(&(&a * a.transpose()), &r);
        let trial: Vec<f64> = x.iter().zip(d.iter()).map(|(p, q)| p + q).collect();
        let feasible = (0..ncons).all(|i| slack(&trial, i) > 0.0)
            && problem.psd_constraints.iter().all(|b| Cholesky::new(&b.eval(&trial), 0.0).is_some());
        if feasible {
            if let Ok(f) = objective_eval(problem, &trial) {
                if f.value >= e.value - 1e-12 * (1.0 + e.value.abs()) {
                    x = trial;
                    e = f;
                }
            }
        }
    }
    for _ in 0..(2 * ncons + 10) {
        for _ in 0..30 {
            let z = null_basis(problem, &active);
            if z.ncols() == 0 {
                break;
            }
            let gr = z.tr_mul(&e.gradient);
            if gr.norm() <= 1e-15 * scale {
                break;
            }
            let hr = z.tr_mul(&(-&e.hessian * &z));
            let d = &z * Cholesky::new(&hr, 0.0)?.solve(&gr);
            // largest step keeping every inactive constraint feasible
            let mut tmax = f64::INFINITY;
            let mut blocking = None;
            for i in (0..ncons).filter(|i| !active.contains(i)) {
                let rate = dot(&problem.linear_constraints[i].a, d.as_slice());
                if rate > 0.0 {
                    let t = slack(&x, i) / rate;
                    if t < tmax {
                        tmax = t;
                        blocking = Some(i);
                    }
                }
            }
            let mut t = if tmax <= 1.0 { tmax * (1.0 - 1e-12) } else { 1.0 };
            let hit = tmax <= 1.0;
            let mut next = None;
            while t >= 1e-12 {
                let trial: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + t * b).collect();
                let ok = (0..ncons).all(|i| slack(&trial, i) > 0.0)
                    && problem.psd_constraints.iter().all(|b| Cholesky::new(&b.eval(&trial), 0.0).is_some());
                if ok {
                    if let Ok(f) = objective_eval(problem, &trial) {
                        if f.value >= e.value - 1e-12 * (1.0 + e.value.abs()) {
                            next = Some((trial, f, t));
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            let Some((trial, f, taken)) = next else { break };
            x = trial;
            e = f;
            if hit && taken >= tmax * (1.0 - 1e-9) {
                active.push(blocking.expect("set with tmax"));
            }
        }
        if active.is_empty() {
            break;
        }
        // least-squares multipliers of ∇f = Σ λ_i a_i
        let nt = DMatrix::from_fn(problem.nvars, active.len(), |r, c| problem.linear_constraints[active[c]].a[r]);
        let lambda = least_squares(&nt, &e.gradient);
        let (worst, lmin) = lambda.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &l)| if l < acc.1 { (i, l) } else { acc });
        if lmin >= -1e-10 * scale {
            break;
        }
        active.remove(worst);
    }
    Some(x)
}

/// Solves the problem from `θ = 0`.
pub fn solve(problem: &MaxDetProblem, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    problem.validate()?;
    let n = problem.nvars;
    let theta0 = vec![0.0; n];
    let margin = constraint_margin(problem, &theta0);
    if problem.barrier_degree() > 0 && !(margin > 0.0) {
        return Err(Error::InfeasibleStart { margin });
    }
    if problem.barrier_degree() > 0 && barrier_eval(problem, &theta0).is_none() {
        return Err(Error::InfeasibleStart { margin });
    }
    let f0 = objective_eval(problem, &theta0)?;
    let scale = 1.0 + f0.gradient.norm();
    let nu = problem.barrier_degree() as f64;

    let mut theta = theta0;
    let mut mu = config.barrier_init;
    let mut path = Vec::new();
    let mut newton_iterations = 0;
    let mut outer_iterations = 0;
    let mut status = SolveStatus::BudgetExhausted;

    'outer: for _ in 0..config.max_outer {
        outer_iterations += 1;
        let mut centered = false;
        for _ in 0..config.max_newton {
            let e = barrier_objective(problem, &theta, mu).ok_or(Error::NotPositiveDefinite)?;
            let d = newton_direction(&e);
            let decrement = e.gradient.dot(&d);
            // gradient small, or the predicted gain is below the objective's resolution
            if e.gradient.norm() <= 0.1 * config.newton_tol * scale
                || 0.5 * decrement <= 1e-30 * (1.0 + e.value.abs())
            {
                centered = true;
                break;
            }
            match step_from(problem, &theta, mu, &e) {
                Ok(step) => {
                    newton_iterations += 1;
                    let size = theta.iter().fold(1.0f64, |a, t| a.max(t.abs()));
                    let moved = theta
                        .iter()
                        .zip(&step.theta)
                        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
                    theta = step.theta;
                    // iterate pinned at floating-point resolution
                    if moved <= 4.0 * f64::EPSILON * size {
                        centered = true;
                        break;
                    }
                }
                Err(Error::LineSearchFailure { .. }) => {
                    // no representable ascent left along the Newton direction
                    if 0.5 * decrement <= 1e-10 * (1.0 + e.value.abs()) {
                        centered = true;
                        break;
                    }
                    status = SolveStatus::LineSearchStalled;
                    path.push((mu, objective_eval(problem, &theta)?.value));
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
        }
        path.push((mu, objective_eval(problem, &theta)?.value));
        if !centered && outer_iterations == config.max_outer {
            break;
        }
        if nu == 0.0 || mu * nu <= config.gap_tol * scale {
            if centered {
                status = SolveStatus::Converged;
            }
            break;
        }
        mu *= config.barrier_shrink;
    }

    let mut kkt = kkt_residual(problem, &theta)?;
    if kkt > 0.0 {
        if let Some(polished) = polish(problem, &theta, scale) {
            let k = kkt_residual(problem, &polished)?;
            if k < kkt {
                theta = polished;
                kkt = k;
            }
        }
    }
    let objective = objective_eval(problem, &theta)?.value;
    log::debug!(
        "maxdet: status {status:?}, {outer_iterations} outer / {newton_iterations} Newton iterations, kkt {kkt:e}"
    );
    Ok(SolveReport {
        theta,
        objective,
        kkt_residual: kkt,
        newton_iterations,
        outer_iterations,
        converged: status == SolveStatus::Converged,
        status,
        final_mu: mu,
        path,
    })
}
