//! Small dense linear algebra: factor-and-solve paths for the Gram systems.
//!
//! Every inversion in the crate goes through one of these routines; no
//! explicit inverse is formed on a production path. Matrices here are tiny
//! (at most 2(r+1) square), so the exact 1-norm reciprocal condition number
//! is computed alongside each factorization by solving for the columns of
//! the inverse.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Reciprocal-condition threshold below which a Gram matrix is treated as
/// singular.
pub const RCOND_MIN: f64 = 1e-12;

/// Cholesky factorization of a symmetric positive-definite matrix, with its
/// 1-norm reciprocal condition number.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    lower: Array2<f64>,
    rcond: f64,
}

impl SpdFactor {
    /// Factor a symmetric positive-definite matrix. Returns `None` when a
    /// pivot is non-positive or non-finite.
    pub fn new(a: &ArrayView2<f64>) -> Option<Self> {
        let n = a.nrows();
        if a.ncols() != n || n == 0 {
            return None;
        }
        let mut l = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l[[i, i]] = s.sqrt();
                } else {
                    l[[i, j]] = s / l[[j, j]];
                }
            }
        }
        let mut f = SpdFactor {
            lower: l,
            rcond: 0.0,
        };
        f.rcond = f.compute_rcond(a);
        Some(f)
    }

    /// 1-norm reciprocal condition number of the factored matrix.
    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn lower(&self) -> &Array2<f64> {
        &self.lower
    }

    /// Solve A x = b.
    pub fn solve_vec(&self, b: &ArrayView1<f64>) -> Array1<f64> {
        let n = self.lower.nrows();
        let mut x = b.to_owned();
        // forward: L y = b
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lower[[i, k]] * x[k];
            }
            x[i] = s / self.lower[[i, i]];
        }
        // backward: L' x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lower[[k, i]] * x[k];
            }
            x[i] = s / self.lower[[i, i]];
        }
        x
    }

    /// Solve A X = B column by column.
    pub fn solve_mat(&self, b: &ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros(b.raw_dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve_vec(&col));
        }
        out
    }

    fn compute_rcond(&self, a: &ArrayView2<f64>) -> f64 {
        let n = a.nrows();
        let norm_a = one_norm(a);
        if norm_a == 0.0 {
            return 0.0;
        }
        // ||A^{-1}||_1 exactly: max column-abs-sum of the inverse
        let mut norm_inv: f64 = 0.0;
        let mut e = Array1::<f64>::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = self.solve_vec(&e.view());
            let s: f64 = col.iter().map(|x| x.abs()).sum();
            norm_inv = norm_inv.max(s);
        }
        if !norm_inv.is_finite() || norm_inv == 0.0 {
            return 0.0;
        }
        1.0 / (norm_a * norm_inv)
    }
}

fn one_norm(a: &ArrayView2<f64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Factor a symmetric positive-definite Gram matrix, mapping failure and
/// ill-conditioning to [`Error::SingularGram`].
pub fn factor_gram(a: &ArrayView2<f64>) -> Result<SpdFactor> {
    let f = SpdFactor::new(a).ok_or(Error::SingularGram { rcond: 0.0 })?;
    if f.rcond() < RCOND_MIN {
        return Err(Error::SingularGram { rcond: f.rcond() });
    }
    Ok(f)
}

/// Solve the square system A x = b by LU with partial pivoting. Returns
/// `None` when a pivot is numerically zero. Used for the few non-symmetric
/// solves (e.g. I - A in long-run mean recovery).
pub fn solve_general(a: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Option<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return None;
    }
    let mut m = a.to_owned();
    let mut x = b.to_owned();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[[col, col]].abs();
        for row in col + 1..n {
            let v = m[[row, col]].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best <= f64::EPSILON * n as f64 || !best.is_finite() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap([col, k], [piv, k]);
            }
            x.swap(col, piv);
        }
        for row in col + 1..n {
            let factor = m[[row, col]] / m[[col, col]];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[[row, k]] -= factor * m[[col, k]];
            }
            x[row] -= factor * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= m[[i, k]] * x[k];
        }
        x[i] = s / m[[i, i]];
    }
    Some(x)
}

/// Frobenius norm.
pub fn fro_norm(a: &ArrayView2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative Frobenius distance ||a - b|| / max(||b||, floor).
pub fn rel_fro_err(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    let denom = fro_norm(b).max(1e-300);
    let diff = a - b;
    fro_norm(&diff.view()) / denom
}
