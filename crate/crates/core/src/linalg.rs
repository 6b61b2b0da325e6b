//! Small dense linear-algebra helpers.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Maximum entry of `|U†U - I|`.
pub fn unitarity_deviation(u: &Array2<Complex64>) -> f64 {
    let n = u.ncols();
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..u.nrows() {
                s += u[[j, a]].conj() * u[[j, b]];
            }
            if a == b {
                s -= 1.0;
            }
            worst = worst.max(s.norm());
        }
    }
    worst
}

pub fn adjoint(u: &Array2<Complex64>) -> Array2<Complex64> {
    u.t().mapv(|z| z.conj())
}

pub fn max_abs_diff_c(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Rank-revealing Cholesky factorization `P A Pᵀ = L Lᵀ` of a symmetric
/// positive-semidefinite matrix.
#[derive(Clone, Debug)]
pub struct PivotedCholesky {
    /// `perm[k]` is the original index placed at position `k`.
    pub perm: Vec<usize>,
    /// Lower-trapezoidal factor, `dim × rank`, in permuted order.
    pub factor: Array2<f64>,
    pub rank: usize,
}

impl PivotedCholesky {
    /// Factorizes `a`, stopping once the largest remaining diagonal falls
    /// below `rel_tol` times the largest initial diagonal.
    pub fn new(a: &Array2<f64>, rel_tol: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.ncols(),
            });
        }
        let mut work = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut l = Array2::<f64>::zeros((n, n));
        let scale = (0..n).map(|i| a[[i, i]]).fold(0.0, f64::max);
        let mut rank = 0;
        for k in 0..n {
            let (p, dmax) =
                (k..n)
                    .map(|i| (i, work[[i, i]]))
                    .fold(
                        (k, f64::NEG_INFINITY),
                        |acc, x| if x.1 > acc.1 { x } else { acc },
                    );
            if scale <= 0.0 || dmax <= rel_tol * scale {
                break;
            }
            if p != k {
                perm.swap(k, p);
                for c in 0..n {
                    work.swap([k, c], [p, c]);
                }
                for r in 0..n {
                    work.swap([r, k], [r, p]);
                }
                for c in 0..k {
                    l.swap([k, c], [p, c]);
                }
            }
            let pivot = work[[k, k]].sqrt();
            l[[k, k]] = pivot;
            for i in (k + 1)..n {
                l[[i, k]] = work[[i, k]] / pivot;
            }
            for i in (k + 1)..n {
                for j in (k + 1)..=i {
                    let v = work[[i, j]] - l[[i, k]] * l[[j, k]];
                    work[[i, j]] = v;
                    work[[j, i]] = v;
                }
            }
            rank += 1;
        }
        let factor = l.slice(ndarray::s![.., ..rank]).to_owned();
        Ok(Self { perm, factor, rank })
    }

    /// Evaluates `wᵀ A⁺ w`, failing when `w` has a component outside the
    /// numerical range of `A`.
    pub fn inverse_quadratic_form(&self, w: &[f64], range_tol: f64) -> Result<f64> {
        let n = self.perm.len();
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: w.len(),
            });
        }
        let r = self.rank;
        let pw: Array1<f64> = self.perm.iter().map(|&i| w[i]).collect();
        // forward substitution on the leading r×r block
        let mut y = vec![0.0; r];
        for i in 0..r {
            let mut s = pw[i];
            for j in 0..i {
                s -= self.factor[[i, j]] * y[j];
            }
            y[i] = s / self.factor[[i, i]];
        }
        // trailing rows must be reproduced by the same coefficients
        let wnorm = w
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        let mut residual = 0.0f64;
        for i in r..n {
            let mut s = pw[i];
            for j in 0..r {
                s -= self.factor[[i, j]] * y[j];
            }
            residual = residual.max(s.abs());
        }
        let residual = residual / wnorm;
        if residual > range_tol {
            return Err(Error::UnsupportedDirection {
                rank: r,
                dim: n,
                residual,
            });
        }
        if r == 0 {
            return Err(Error::UnsupportedDirection {
                rank: 0,
                dim: n,
                residual: 1.0,
            });
        }
        Ok(y.iter().map(|x| x * x).sum())
    }
}

/// `wᵀ A⁺ w` for a symmetric positive-semidefinite `a` with rank detection.
pub fn psd_inverse_quadratic_form(a: &Array2<f64>, w: &[f64]) -> Result<f64> {
    PivotedCholesky::new(a, 1e-13)?.inverse_quadratic_form(w, 1e-8)
}

pub fn hermitian_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}
