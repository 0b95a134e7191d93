//! Small dense symmetric linear algebra on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Pivot tolerance separating positive definite from semidefinite matrices.
pub const EPS_PD: f64 = 1e-10;

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factorizes the symmetric matrix `a`, reading only its lower triangle.
    /// Fails unless every squared pivot exceeds `min_pivot` (and is finite).
    pub fn new(a: &DMatrix<f64>, min_pivot: f64) -> Option<Self> {
        let n = a.nrows();
        debug_assert_eq!(n, a.ncols());
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > min_pivot) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(Self { l })
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn det(&self) -> f64 {
        let p: f64 = self.l.diagonal().iter().product();
        p * p
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let y = self.forward(b);
        self.backward(&y)
    }

    /// `L⁻¹ b`.
    pub fn forward(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// `L⁻ᵀ y`.
    pub fn backward(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = y.clone();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Whitened matrix `L⁻¹ B L⁻ᵀ` for symmetric `B`.
    pub fn whiten(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        // Y = L⁻¹ B, column by column.
        let mut y = b.clone();
        for c in 0..n {
            for i in 0..n {
                let mut s = y[(i, c)];
                for k in 0..i {
                    s -= self.l[(i, k)] * y[(k, c)];
                }
                y[(i, c)] = s / self.l[(i, i)];
            }
        }
        // W = Y L⁻ᵀ = (L⁻¹ Yᵀ)ᵀ; B symmetric so Yᵀ = B L⁻ᵀ.
        let mut w = y.transpose();
        for c in 0..n {
            for i in 0..n {
                let mut s = w[(i, c)];
                for k in 0..i {
                    s -= self.l[(i, k)] * w[(k, c)];
                }
                w[(i, c)] = s / self.l[(i, i)];
            }
        }
        // symmetrize away rounding
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (w[(i, j)] + w[(j, i)]);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        w
    }

    /// `L⁻¹`.
    pub fn l_inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut x = DMatrix::zeros(n, n);
        for c in 0..n {
            for i in c..n {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for k in c..i {
                    s -= self.l[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.l[(i, i)];
            }
        }
        x
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::<f64>::zeros(n, n);
        for c in 0..n {
            let mut e = DVector::<f64>::zeros(n);
            e[c] = 1.0;
            inv.set_column(c, &self.solve(&e));
        }
        inv
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    match a.nrows() {
        0 => f64::INFINITY,
        1 => a[(0, 0)],
        2 => {
            let (p, q, r) = (a[(0, 0)], a[(1, 1)], a[(0, 1)]);
            let mean = 0.5 * (p + q);
            let half = 0.5 * (p - q);
            mean - (half * half + r * r).sqrt()
        }
        _ => a
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
    }
}

/// Least squares `min ‖A x − b‖` by column-pivoted QR. Columns whose pivot
/// falls below `1e-12 |r₀₀|` get a zero coefficient.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let k = a.ncols();
    if k == 0 {
        return DVector::zeros(0);
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let qtb = qr.q().tr_mul(b);
    let tol = 1e-12 * r[(0, 0)].abs();
    let rank = (0..r.nrows().min(k)).take_while(|&i| r[(i, i)].abs() > tol).count();
    let mut x = DVector::zeros(k);
    for i in (0..rank).rev() {
        let mut s = qtb[i];
        for j in (i + 1)..rank {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    qr.p().inv_permute_rows(&mut x);
    x
}

/// Orthonormal basis of the null space of `a`, from the eigenvectors of
/// `aᵀa` with eigenvalues below `1e-12` of the largest.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let eig = a.tr_mul(a).symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let free: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= 1e-12 * top).collect();
    DMatrix::from_fn(n, free.len(), |r, c| eig.eigenvectors[(r, free[c])])
}

/// Frobenius inner product `Σ A_ij B_ij`.
pub fn frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    #[test]
    fn least_squares_and_null_space() {
        use nalgebra::{DMatrix, DVector};
        let a = DMatrix::from_fn(7, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0 + if i == j { 4.0 } else { 0.0 });
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let got = super::least_squares(&a, &(&a * &x));
        assert!((got - &x).norm() < 1e-12);
        // rank-deficient: duplicated column
        let mut d = a.clone().insert_column(4, 0.0);
        d.set_column(4, &a.column(1));
        let y = super::least_squares(&d, &(&a * &x));
        assert!((&d * &y - &a * &x).norm() < 1e-10);
        let z = super::null_space(&d.transpose().transpose());
        assert_eq!(z.ncols(), 1);
        assert!((&d * &z).norm() < 1e-12);
        assert!((z.tr_mul(&z) - DMatrix::identity(1, 1)).norm() < 1e-12);
    }

    use super::*;
    use approx::assert_relative_eq;

    fn spd() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0])
    }

    #[test]
    fn det_and_solve() {
        let a = spd();
        let c = Cholesky::new(&a, EPS_PD).unwrap();
        assert_relative_eq!(c.det(), a.determinant(), max_relative = 1e-13);
        assert_relative_eq!(c.log_det(), a.determinant().ln(), max_relative = 1e-13);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = c.solve(&b);
        assert!((&a * x - b).norm() < 1e-13);
        let inv = c.inverse();
        assert!((&a * inv - DMatrix::identity(3, 3)).norm() < 1e-13);
    }

    #[test]
    fn whiten_matches_definition() {
        let a = spd();
        let c = Cholesky::new(&a, 0.0).unwrap();
        let b = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 2.0, -1.0, 0.3, 0.0, 0.3, 0.7]);
        let w = c.whiten(&b);
        let linv = c.l().clone().try_inverse().unwrap();
        let expect = &linv * &b * linv.transpose();
        assert!((w - expect).norm() < 1e-13);
    }

    #[test]
    fn rejects_semidefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(Cholesky::new(&a, EPS_PD).is_none());
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(Cholesky::new(&a, 0.0).is_none());
    }

    #[test]
    fn min_eigenvalue_small_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_relative_eq!(min_eigenvalue(&a), 1.0, epsilon = 1e-14);
        let a = spd();
        let ev = a.clone().symmetric_eigenvalues().min();
        assert_relative_eq!(min_eigenvalue(&a), ev, epsilon = 1e-13);
    }
}
