//! Dense symmetric positive-definite solves via Cholesky, sized for Gram
//! systems (a few hundred rows).

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    /// Row-major n x n; only the lower triangle is meaningful.
    l: Vec<f64>,
    n: usize,
}

/// Factors a row-major symmetric matrix. Returns `None` when a pivot is
/// not strictly positive (matrix not positive definite, or ill-conditioned
/// enough that rounding drives a pivot to zero).
pub fn cholesky(a: &[f64], n: usize) -> Option<CholeskyFactor> {
    assert_eq!(a.len(), n * n);
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(CholeskyFactor { l, n })
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves (L L^T) x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        // Forward: L y = b.
        for i in 0..n {
            let mut sum = b[i];
            for j in 0..i {
                sum -= self.l[i * n + j] * b[j];
            }
            b[i] = sum / self.l[i * n + i];
        }
        // Backward: L^T x = y.
        for i in (0..n).rev() {
            let mut sum = b[i];
            for j in (i + 1)..n {
                sum -= self.l[j * n + i] * b[j];
            }
            b[i] = sum / self.l[i * n + i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
