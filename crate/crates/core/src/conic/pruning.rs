//! The sparse pruning program.
//!
//! ```text
//!     minimize    alpha·t + (alpha·q_lin + (1 - alpha)·c_div)ᵀx + lambda·u
//!     subject to  (1 + t, 2Lᵀx, 1 - t) ∈ Q^{M+2}     (t ≥ xᵀLLᵀx)
//!                 (u_abs_i, x_i)       ∈ Q^2          (|x_i| ≤ u_abs_i)
//!                 Σ u_abs_i - u = 0
//!                 t, u ≥ 0
//! ```
//!
//! with `LLᵀ` the Cholesky factorization of the surrogate's (ridged) Gram matrix.
//! The cone `(1 + t, 2Lᵀx, 1 - t)` holds iff `(1+t)² ≥ 4xᵀLLᵀx + (1-t)²`,
//! i.e. `t ≥ xᵀLLᵀx`, given `1 + t ≥ 0`.

use super::{cholesky_lower, ConeKind, ConeProgram, ConicError, ProgramBuilder};
use crate::loss::QuadraticSurrogate;
use std::ops::Range;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PruningOptions {
    /// Restrict the weights to the probability simplex (`x ≥ 0`, `Σx = 1`).
    pub simplex: bool,
}

/// Where each block of the pruning program lives in the variable vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruningVarMap {
    pub weights: Range<usize>,
    pub epigraph: usize,
    pub abs_bounds: Range<usize>,
    pub l1_bound: usize,
    /// `(1 + t, 2Lᵀx, 1 - t)`, tied to `x` and `t` by equality rows.
    pub cone_aux: Range<usize>,
    /// Nonnegative copies of the weights (simplex mode only).
    pub weight_copies: Option<Range<usize>>,
}

impl PruningVarMap {
    pub fn extract_weights(&self, x: &[f64]) -> Vec<f64> {
        x[self.weights.clone()].to_vec()
    }
}

pub fn build_pruning_socp(
    s: &QuadraticSurrogate,
    alpha: f64,
    lambda: f64,
) -> Result<(ConeProgram, PruningVarMap), ConicError> {
    build_pruning_socp_with(s, alpha, lambda, PruningOptions::default())
}

pub fn build_pruning_socp_with(
    s: &QuadraticSurrogate,
    alpha: f64,
    lambda: f64,
    options: PruningOptions,
) -> Result<(ConeProgram, PruningVarMap), ConicError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ConicError::InvalidParameter(format!(
            "alpha = {alpha} is outside [0, 1]"
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(ConicError::InvalidParameter(format!(
            "lambda = {lambda} must be finite and nonnegative"
        )));
    }
    let m = s.num_models();
    if s.q.rows() != m || s.q.cols() != m || s.c_div.len() != m {
        return Err(ConicError::ShapeMismatch(format!(
            "surrogate pieces disagree: Q is {}x{}, q_lin {}, c_div {}",
            s.q.rows(),
            s.q.cols(),
            m,
            s.c_div.len()
        )));
    }
    // The surrogate's Q already carries its ridge.
    let l = cholesky_lower(&s.q, 0.0)?;

    let mut b = ProgramBuilder::new();
    let weights = b.add_vars(m);
    let epigraph = b.add_vars(1).start;
    let abs_bounds = b.add_vars(m);
    let l1_bound = b.add_vars(1).start;
    let cone_aux = b.add_vars(m + 2);

    let linear = s.combined_linear(alpha);
    for (i, &ci) in weights.clone().zip(&linear) {
        b.set_cost(i, ci);
    }
    b.set_cost(epigraph, alpha);
    b.set_cost(l1_bound, lambda);

    let head = cone_aux.start;
    let tail_end = cone_aux.end - 1;
    b.add_eq(&[(head, 1.0), (epigraph, -1.0)], 1.0);
    // (Lᵀx)_r = Σ_{k ≥ r} L[k][r] x_k, so that ‖Lᵀx‖² = xᵀQx.
    for r in 0..m {
        let mut terms = vec![(head + 1 + r, 1.0)];
        for k in r..m {
            terms.push((weights.start + k, -2.0 * l[(k, r)]));
        }
        b.add_eq(&terms, 0.0);
    }
    b.add_eq(&[(tail_end, 1.0), (epigraph, 1.0)], 1.0);

    let mut l1_terms: Vec<(usize, f64)> = abs_bounds.clone().map(|v| (v, 1.0)).collect();
    l1_terms.push((l1_bound, -1.0));
    b.add_eq(&l1_terms, 0.0);

    b.add_cone(ConeKind::Quadratic, cone_aux.clone().collect());
    for (u, x) in abs_bounds.clone().zip(weights.clone()) {
        b.add_cone(ConeKind::Quadratic, vec![u, x]);
    }
    b.add_cone(ConeKind::NonnegOrthant, vec![epigraph, l1_bound]);

    let weight_copies = if options.simplex {
        let copies = b.add_vars(m);
        for (c, x) in copies.clone().zip(weights.clone()) {
            b.add_eq(&[(c, 1.0), (x, -1.0)], 0.0);
        }
        let sum: Vec<(usize, f64)> = copies.clone().map(|c| (c, 1.0)).collect();
        b.add_eq(&sum, 1.0);
        b.add_cone(ConeKind::NonnegOrthant, copies.clone().collect());
        Some(copies)
    } else {
        None
    };

    let program = b.build()?;
    Ok((
        program,
        PruningVarMap {
            weights,
            epigraph,
            abs_bounds,
            l1_bound,
            cone_aux,
            weight_copies,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::cone_violation;
    use crate::numeric::DenseMatrix;

    pub(crate) fn surrogate_from(q: DenseMatrix, lin: Vec<f64>) -> QuadraticSurrogate {
        let m = lin.len();
        QuadraticSurrogate {
            q,
            q_lin: lin,
            c_div: vec![0.0; m],
            constant: 0.0,
            ridge: 0.0,
        }
    }

    #[test]
    fn structure_for_two_models() {
        let s = surrogate_from(DenseMatrix::identity(2), vec![-2.0, 0.0]);
        let (p, map) = build_pruning_socp(&s, 1.0, 0.0).unwrap();
        assert_eq!(p.num_vars, 2 + 1 + 2 + 1 + 4);
        let quads: Vec<usize> = p
            .cones
            .iter()
            .filter(|c| c.kind == ConeKind::Quadratic)
            .map(|c| c.dim())
            .collect();
        assert_eq!(quads.len(), 3);
        assert_eq!(quads.iter().filter(|&&d| d == 4).count(), 1);
        assert_eq!(quads.iter().filter(|&&d| d == 2).count(), 2);
        assert_eq!(map.weights, 0..2);
        assert_eq!(p.num_rows(), 2 + 3);
    }

    #[test]
    fn zero_point_is_on_the_boundary() {
        let s = surrogate_from(DenseMatrix::identity(3), vec![0.0; 3]);
        let (p, map) = build_pruning_socp(&s, 0.5, 0.1).unwrap();
        let mut x = vec![0.0; p.num_vars];
        let aux = map.cone_aux.clone();
        x[aux.start] = 1.0;
        x[aux.end - 1] = 1.0;
        assert_eq!(p.eq_a.mul_vec(&x), p.eq_b);
        let cone = &p.cones[0];
        let v = cone.gather(&x);
        assert_eq!(v, vec![1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(cone_violation(cone.kind, &v), 0.0);
    }

    #[test]
    fn simplex_mode_adds_copies() {
        let s = surrogate_from(DenseMatrix::identity(2), vec![0.0; 2]);
        let (p, map) = build_pruning_socp_with(&s, 0.5, 0.1, PruningOptions { simplex: true }).unwrap();
        let copies = map.weight_copies.unwrap();
        assert_eq!(copies.len(), 2);
        assert_eq!(p.num_rows(), 2 + 3 + 2 + 1);
    }

    #[test]
    fn bad_parameters() {
        let s = surrogate_from(DenseMatrix::identity(1), vec![0.0]);
        assert!(build_pruning_socp(&s, 1.5, 0.0).is_err());
        assert!(build_pruning_socp(&s, 0.5, -1.0).is_err());
        let bad = surrogate_from(
            DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap(),
            vec![0.0; 2],
        );
        assert!(matches!(
            build_pruning_socp(&bad, 0.5, 0.0),
            Err(ConicError::NotPositiveDefinite { .. })
        ));
    }
}
