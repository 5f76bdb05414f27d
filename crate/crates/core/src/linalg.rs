//! Dense and block-banded linear algebra used by the solvers.

use nalgebra::{DMatrix, DVector, Dyn, SMatrix, SVector, LU};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::policy;

/// Cheap reciprocal condition proxy from the LU diagonal.
pub fn lu_rcond(lu: &LU<f64, Dyn, Dyn>) -> f64 {
    let u = lu.u();
    let n = u.nrows().min(u.ncols());
    if n == 0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 0..n {
        let v = u[(i, i)].abs();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == 0.0 || !lo.is_finite() {
        0.0
    } else {
        lo / hi
    }
}

/// LU factorization of `[[A, t], [tᵀ, 0]]`, which inverts `A` on `ker tᵀ`
/// whenever `A` maps into `ker tᵀ` and is injective there.
#[derive(Debug, Clone)]
pub struct BorderedLu {
    lu: LU<f64, Dyn, Dyn>,
    n: usize,
    rcond: f64,
}

impl BorderedLu {
    pub fn new(a: &DMatrix<f64>, t: &DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        let mut b = DMatrix::<f64>::zeros(n + 1, n + 1);
        b.view_mut((0, 0), (n, n)).copy_from(a);
        for i in 0..n {
            b[(i, n)] = t[i];
            b[(n, i)] = t[i];
        }
        let lu = b.lu();
        let rcond = lu_rcond(&lu);
        if !(rcond > policy().singular_rcond) {
            return Err(Error::Singular { rcond });
        }
        Ok(Self { lu, n, rcond })
    }

    pub fn rcond(&self) -> f64 {
        self.rcond
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`, `tᵀx = 0` for a real right-hand side.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut rhs = DVector::<f64>::zeros(self.n + 1);
        rhs.rows_mut(0, self.n).copy_from(b);
        let x = self.lu.solve(&rhs).expect("factorization checked");
        x.rows(0, self.n).into_owned()
    }

    pub fn solve_complex(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let re = self.solve(&b.map(|z| z.re));
        let im = self.solve(&b.map(|z| z.im));
        re.zip_map(&im, Complex64::new)
    }

    /// Solves for every column of `b`.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut rhs = DMatrix::<f64>::zeros(self.n + 1, b.ncols());
        rhs.view_mut((0, 0), (self.n, b.ncols())).copy_from(b);
        let x = self.lu.solve(&rhs).expect("factorization checked");
        x.rows(0, self.n).into_owned()
    }

    /// Full inverse of the bordered matrix.
    pub fn bordered_inverse(&self) -> DMatrix<f64> {
        self.lu.try_inverse().expect("factorization checked")
    }
}

/// Orthonormal basis (as columns) of the complement of `t`.
pub fn complement_basis(t: &DVector<f64>) -> DMatrix<f64> {
    let n = t.len();
    let norm = t.norm();
    let mut v = t / norm;
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign;
    let vv = v.dot(&v);
    let mut h = DMatrix::<f64>::identity(n, n);
    h -= (&v * v.transpose()) * (2.0 / vv);
    h.columns(1, n - 1).into_owned()
}

pub fn real_times_complex(a: &DMatrix<f64>, x: &DVector<Complex64>) -> DVector<Complex64> {
    let re = a * x.map(|z| z.re);
    let im = a * x.map(|z| z.im);
    re.zip_map(&im, Complex64::new)
}

/// Block-tridiagonal matrix with `B × B` blocks.
///
/// Row block `k` reads `lower[k] x[k-1] + diag[k] x[k] + upper[k] x[k+1]`;
/// `lower[0]` and `upper[last]` are ignored.
#[derive(Debug, Clone)]
pub struct BlockTridiagonal<const B: usize> {
    pub lower: Vec<SMatrix<f64, B, B>>,
    pub diag: Vec<SMatrix<f64, B, B>>,
    pub upper: Vec<SMatrix<f64, B, B>>,
}

impl<const B: usize> BlockTridiagonal<B> {
    pub fn zeros(blocks: usize) -> Self {
        Self {
            lower: vec![SMatrix::zeros(); blocks],
            diag: vec![SMatrix::zeros(); blocks],
            upper: vec![SMatrix::zeros(); blocks],
        }
    }

    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &[SVector<f64, B>]) -> Vec<SVector<f64, B>> {
        let m = self.blocks();
        (0..m)
            .map(|k| {
                let mut y = self.diag[k] * x[k];
                if k > 0 {
                    y += self.lower[k] * x[k - 1];
                }
                if k + 1 < m {
                    y += self.upper[k] * x[k + 1];
                }
                y
            })
            .collect()
    }

    /// Block elimination from the last block down to block 0, then forward
    /// substitution. Partial pivoting happens inside each diagonal block.
    pub fn solve(&self, rhs: &[SVector<f64, B>]) -> Result<Vec<SVector<f64, B>>> {
        let m = self.blocks();
        if rhs.len() != m {
            return Err(Error::Shape(format!("rhs has {} blocks, matrix has {m}", rhs.len())));
        }
        if m == 0 {
            return Ok(Vec::new());
        }
        // After eliminating blocks above k, row block k reads
        // lower[k] x[k-1] + s[k] x[k] = r[k], and x[k] = s[k]⁻¹(r[k] − lower[k] x[k-1]).
        let mut s_inv_lower: Vec<SMatrix<f64, B, B>> = vec![SMatrix::zeros(); m];
        let mut s_inv_rhs: Vec<SVector<f64, B>> = vec![SVector::zeros(); m];
        let mut worst = f64::INFINITY;
        let mut s = self.diag[m - 1];
        let mut r = rhs[m - 1];
        for k in (0..m).rev() {
            let (inv, rc) = small_inverse(&s).ok_or(Error::Singular { rcond: 0.0 })?;
            worst = worst.min(rc);
            let sol_r = inv * r;
            s_inv_rhs[k] = sol_r;
            if k == 0 {
                break;
            }
            let sol_l = inv * self.lower[k];
            s_inv_lower[k] = sol_l;
            s = self.diag[k - 1] - self.upper[k - 1] * sol_l;
            r = rhs[k - 1] - self.upper[k - 1] * sol_r;
        }
        if !(worst > policy().singular_rcond) {
            return Err(Error::Singular { rcond: worst });
        }
        let mut x = vec![SVector::<f64, B>::zeros(); m];
        x[0] = s_inv_rhs[0];
        for k in 1..m {
            x[k] = s_inv_rhs[k] - s_inv_lower[k] * x[k - 1];
        }
        Ok(x)
    }
}

/// Gauss-Jordan inverse with partial pivoting and the pivot-ratio condition proxy.
fn small_inverse<const B: usize>(a: &SMatrix<f64, B, B>) -> Option<(SMatrix<f64, B, B>, f64)> {
    let mut m = *a;
    let mut inv = SMatrix::<f64, B, B>::identity();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for c in 0..B {
        let p = (c..B).max_by(|&i, &j| m[(i, c)].abs().total_cmp(&m[(j, c)].abs()))?;
        let piv = m[(p, c)];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        m.swap_rows(c, p);
        inv.swap_rows(c, p);
        lo = lo.min(piv.abs());
        hi = hi.max(piv.abs());
        for j in 0..B {
            m[(c, j)] /= piv;
            inv[(c, j)] /= piv;
        }
        for i in 0..B {
            if i != c {
                let f = m[(i, c)];
                if f != 0.0 {
                    for j in 0..B {
                        m[(i, j)] -= f * m[(c, j)];
                        inv[(i, j)] -= f * inv[(c, j)];
                    }
                }
            }
        }
    }
    Some((inv, lo / hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let t = DVector::from_vec(vec![1.0, 0.0, 1.0, 2.0]);
        let q = complement_basis(&t);
        assert_eq!(q.ncols(), 3);
        assert!((q.transpose() * &q - DMatrix::identity(3, 3)).amax() < 1e-14);
        assert!((q.transpose() * &t).amax() < 1e-14);
    }

    #[test]
    fn bordered_solve_inverts_on_complement() {
        // generator of a two-state chain; columns sum to zero
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 1.0, -2.0]);
        let t = DVector::from_vec(vec![1.0, 1.0]);
        let lu = BorderedLu::new(&a, &t).unwrap();
        let b = DVector::from_vec(vec![0.5, -0.5]);
        let x = lu.solve(&b);
        assert!((&a * &x - &b).amax() < 1e-14);
        assert!(t.dot(&x).abs() < 1e-14);
    }

    #[test]
    fn block_tridiagonal_matches_dense() {
        let m = 5;
        let mut bt = BlockTridiagonal::<2>::zeros(m);
        let mut dense = DMatrix::<f64>::zeros(2 * m, 2 * m);
        let mut seed = 0.37_f64;
        let mut next = || {
            seed = (seed * 7.13 + 0.61).fract();
            seed - 0.5
        };
        for k in 0..m {
            bt.diag[k] = Matrix2::new(4.0 + next(), next(), next(), 4.0 + next());
            if k > 0 {
                bt.lower[k] = Matrix2::new(next(), next(), next(), next());
            }
            if k + 1 < m {
                bt.upper[k] = Matrix2::new(next(), next(), next(), next());
            }
        }
        for k in 0..m {
            dense.view_mut((2 * k, 2 * k), (2, 2)).copy_from(&bt.diag[k]);
            if k > 0 {
                dense.view_mut((2 * k, 2 * k - 2), (2, 2)).copy_from(&bt.lower[k]);
            }
            if k + 1 < m {
                dense.view_mut((2 * k, 2 * k + 2), (2, 2)).copy_from(&bt.upper[k]);
            }
        }
        let rhs: Vec<Vector2<f64>> = (0..m).map(|k| Vector2::new(k as f64, 1.0 - k as f64)).collect();
        let x = bt.solve(&rhs).unwrap();
        let flat_rhs = DVector::from_iterator(2 * m, rhs.iter().flat_map(|v| [v[0], v[1]]));
        let expect = dense.lu().solve(&flat_rhs).unwrap();
        for k in 0..m {
            assert!((x[k][0] - expect[2 * k]).abs() < 1e-13);
            assert!((x[k][1] - expect[2 * k + 1]).abs() < 1e-13);
        }
        let back = bt.mul_vec(&x);
        for k in 0..m {
            assert!((back[k] - rhs[k]).amax() < 1e-12);
        }
    }
}
