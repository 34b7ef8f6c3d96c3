//! Dense LDLᵀ for the regularized quasi-definite KKT matrix
//! `[H + δI, Aᵀ; A, -δI]`. Quasi-definite matrices factor without pivoting.

use crate::numeric::DenseMatrix;

pub struct Ldl {
    n: usize,
    /// Unit lower factor, row-major, diagonal unused.
    l: Vec<f64>,
    d: Vec<f64>,
}

impl Ldl {
    /// Strict factorization: returns `None` on a zero, non-finite or
    /// wrong-signed pivot. The first `num_positive` pivots must be positive,
    /// the rest negative.
    #[cfg(test)]
    pub fn factor(k: &DenseMatrix, num_positive: usize) -> Option<Ldl> {
        Self::factor_with(k, num_positive, None)
    }

    /// Like [`Ldl::factor`], but with dynamic regularization `(eps, delta)`:
    /// a pivot whose signed value is at most `eps` is replaced by `±delta`.
    /// Only non-finite pivots fail.
    pub fn factor_with(k: &DenseMatrix, num_positive: usize, dynamic: Option<(f64, f64)>) -> Option<Ldl> {
        let n = k.rows();
        let mut l = k.as_slice().to_vec();
        let mut d = vec![0.0; n];
        // Row-oriented: for row i, compute L[i][j] for j < i, then d[i].
        let mut tmp = vec![0.0; n];
        for i in 0..n {
            for j in 0..i {
                // tmp[j] = L[i][j]·d[j] = K[i][j] - Σ_{k<j} L[i][k]·d[k]·L[j][k]
                let (row_i, row_j) = (i * n, j * n);
                let mut s = l[row_i + j];
                for kk in 0..j {
                    s -= tmp[kk] * l[row_j + kk];
                }
                tmp[j] = s;
            }
            let mut di = l[i * n + i];
            for j in 0..i {
                let lij = tmp[j] / d[j];
                l[i * n + j] = lij;
                di -= lij * tmp[j];
            }
            let sign = if i < num_positive { 1.0 } else { -1.0 };
            if !di.is_finite() {
                return None;
            }
            if sign * di <= 0.0 || dynamic.is_some_and(|(eps, _)| sign * di <= eps) {
                match dynamic {
                    Some((_, delta)) => di = sign * delta,
                    None => return None,
                }
            }
            d[i] = di;
        }
        Some(Ldl { n, l, d })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
            b[i] -= s;
        }
        for (bi, di) in b.iter_mut().zip(&self.d) {
            *bi /= di;
        }
        for i in (0..n).rev() {
            let bi = b[i];
            if bi != 0.0 {
                for j in 0..i {
                    b[j] -= self.l[i * n + j] * bi;
                }
            }
        }
    }
}
