//! Factorizations behind the matrix type: LU for determinants and square
//! solves, SVD (via nalgebra) for ranks, truncations and least-norm solves.

use nalgebra::{DMatrix, DVector, SVD};

use crate::matrix::{DenseMatrix, MatrixError};

/// LU factorization with partial pivoting of a square matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

impl Lu {
    pub fn new(a: &DenseMatrix) -> Result<Self, MatrixError> {
        let (n, m) = a.shape();
        if n != m {
            return Err(MatrixError::NotSquare { rows: n, cols: m });
        }
        let mut lu = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for c in 0..n {
            let (piv, best) = (c..n)
                .map(|r| (r, lu[r * n + c].abs()))
                .fold((c, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == 0.0 {
                singular = true;
                continue;
            }
            if piv != c {
                for j in 0..n {
                    lu.swap(c * n + j, piv * n + j);
                }
                perm.swap(c, piv);
                sign = -sign;
            }
            let d = lu[c * n + c];
            for r in c + 1..n {
                let f = lu[r * n + c] / d;
                lu[r * n + c] = f;
                if f != 0.0 {
                    for j in c + 1..n {
                        lu[r * n + j] -= f * lu[c * n + j];
                    }
                }
            }
        }
        Ok(Self {
            n,
            lu,
            perm,
            sign,
            singular,
        })
    }

    pub fn determinant(&self) -> f64 {
        if self.singular {
            return 0.0;
        }
        (0..self.n).fold(self.sign, |acc, i| acc * self.lu[i * self.n + i])
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, MatrixError> {
        if self.singular {
            return Err(MatrixError::Singular);
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        Ok(x)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix, MatrixError> {
        if b.rows() != self.n {
            return Err(MatrixError::ShapeMismatch {
                op: "lu solve",
                left: (self.n, self.n),
                right: b.shape(),
            });
        }
        let cols = b
            .columns()
            .iter()
            .map(|c| self.solve(c))
            .collect::<Result<Vec<_>, _>>()?;
        DenseMatrix::from_columns(&cols)
    }
}

/// Thin SVD `A = U diag(s) V^T` with singular values sorted non-increasing.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// `n x r` left singular vectors, one per column.
    pub u: Vec<Vec<f64>>,
    pub s: Vec<f64>,
    /// `r` right singular vectors of length `m`.
    pub v: Vec<Vec<f64>>,
}

pub fn thin_svd(a: &DenseMatrix) -> ThinSvd {
    let svd = SVD::new(a.to_nalgebra(), true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    ThinSvd {
        u: order
            .iter()
            .map(|&i| u.column(i).iter().copied().collect())
            .collect(),
        s: order.iter().map(|&i| svd.singular_values[i]).collect(),
        v: order
            .iter()
            .map(|&i| vt.row(i).iter().copied().collect())
            .collect(),
    }
}

pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.to_nalgebra().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// The ℓ2-optimal rank-`k` factorization `U V` (with `U = U_k Σ_k` and
/// `V = V_k^T`) together with the Frobenius norm of the residual, i.e. the
/// root-sum-square of the trailing singular values.
pub fn best_rank_k(a: &DenseMatrix, k: usize) -> (DenseMatrix, DenseMatrix, f64) {
    let svd = thin_svd(a);
    let k = k.max(1);
    let r = svd.s.len();
    let tail = svd.s.iter().skip(k).map(|s| s * s).sum::<f64>().sqrt();
    let (n, m) = a.shape();
    let u = DenseMatrix::from_fn(
        n,
        k,
        |i, t| if t < r { svd.u[t][i] * svd.s[t] } else { 0.0 },
    );
    let v = DenseMatrix::from_fn(k, m, |t, j| if t < r { svd.v[t][j] } else { 0.0 });
    (u, v, tail)
}

/// Orthonormal columns spanning the range of `a`, keeping singular
/// directions above `tol` times the largest singular value.
pub fn orthonormal_basis(a: &DenseMatrix, tol: f64) -> Option<DenseMatrix> {
    let svd = thin_svd(a);
    let top = *svd.s.first()?;
    if top == 0.0 {
        return None;
    }
    let keep: Vec<&Vec<f64>> = svd
        .u
        .iter()
        .zip(&svd.s)
        .filter(|(_, &s)| s > tol * top)
        .map(|(u, _)| u)
        .collect();
    let n = a.rows();
    Some(DenseMatrix::from_fn(n, keep.len(), |i, t| keep[t][i]))
}

/// Minimum-norm least-squares solution of `A x ~ b` through the SVD,
/// discarding singular values below `rcond` times the largest. Returns the
/// solution and the numerical rank used.
pub fn least_squares_min_norm(a: &DMatrix<f64>, b: &[f64], rcond: f64) -> (Vec<f64>, usize) {
    let svd = SVD::new(a.clone(), true, true);
    let top = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    if top == 0.0 {
        return (vec![0.0; a.ncols()], 0);
    }
    let eps = rcond * top;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let rhs = DVector::from_column_slice(b);
    let x = svd
        .solve(&rhs, eps)
        .expect("SVD computed with both factors");
    (x.iter().copied().collect(), rank)
}

/// Moore-Penrose pseudo-inverse (`k x n` for an `n x k` input) and the
/// numerical rank at relative tolerance `rcond`.
pub fn pseudo_inverse(a: &DenseMatrix, rcond: f64) -> (DenseMatrix, usize) {
    let svd = thin_svd(a);
    let (n, k) = a.shape();
    let top = svd.s.first().copied().unwrap_or(0.0);
    let kept: Vec<usize> = (0..svd.s.len())
        .filter(|&t| top > 0.0 && svd.s[t] > rcond * top)
        .collect();
    let pinv = DenseMatrix::from_fn(k, n, |r, c| {
        kept.iter()
            .map(|&t| svd.v[t][r] * svd.u[t][c] / svd.s[t])
            .sum()
    });
    (pinv, kept.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solve_roundtrip() {
        let a =
            DenseMatrix::from_rows(&[[4.0, 3.0, 0.0], [6.0, 3.0, 1.0], [0.0, 2.0, 5.0]]).unwrap();
        let x = [1.0, -2.0, 0.5];
        let b = a.mul_vec(&x).unwrap();
        let got = Lu::new(&a).unwrap().solve(&b).unwrap();
        for (g, e) in got.iter().zip(x) {
            assert!((g - e).abs() < 1e-13);
        }
        let sing = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(
            Lu::new(&sing).unwrap().solve(&[1.0, 1.0]),
            Err(MatrixError::Singular)
        ));
    }

    #[test]
    fn truncation_residual() {
        let a =
            DenseMatrix::from_rows(&[[3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let (u, v, tail) = best_rank_k(&a, 1);
        assert!((tail - 5f64.sqrt()).abs() < 1e-12);
        let resid = a.sub(&u.matmul(&v).unwrap()).unwrap();
        assert!((resid.entrywise_norm(crate::PNorm::TWO) - tail).abs() < 1e-12);
    }

    #[test]
    fn min_norm_solution_for_rank_deficient_system() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (x, rank) = least_squares_min_norm(&a, &[2.0, 2.0], 1e-12);
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_of_tall_matrix() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]]).unwrap();
        let (p, rank) = pseudo_inverse(&a, 1e-12);
        assert_eq!(rank, 2);
        let expect = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 0.5, 0.0]]).unwrap();
        assert!(p.sub(&expect).unwrap().max_abs() < 1e-14);
    }
}
