use super::ConicError;
use crate::numeric::DenseMatrix;

/// Symmetry tolerance accepted by [`cholesky_lower`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Lower-triangular `L` with `Q + ridge·I = L Lᵀ` and positive diagonal.
pub fn cholesky_lower(q: &DenseMatrix, ridge: f64) -> Result<DenseMatrix, ConicError> {
    if !q.is_square() {
        return Err(ConicError::ShapeMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            q.rows(),
            q.cols()
        )));
    }
    let asym = q.asymmetry();
    if asym > SYMMETRY_TOL || !q.is_finite() {
        return Err(ConicError::NotSymmetric(asym));
    }
    let n = q.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = q[(j, j)] + ridge;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(ConicError::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = q[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L z = b` for lower-triangular `L`.
pub fn forward_substitute(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    z
}
