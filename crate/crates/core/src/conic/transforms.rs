//! Reformulations of convex quadratic objects as second-order cone constraints.

use super::{cholesky_lower, forward_substitute, ConeKind, ConeProgram, ConicError, ProgramBuilder};
use crate::numeric::{dot, norm2, DenseMatrix};
use std::ops::Range;

/// A QP `min xᵀQx + aᵀx + β  s.t.  A x = b (, x ≥ 0)` rewritten as
/// `min u₀  s.t.  Lᵀx - ū = -½L⁻¹a,  A x = b,  (u₀, ū) ∈ Q^{n+1}`,
/// where `Q = LLᵀ`. Since `‖Lᵀx + ½L⁻¹a‖² = xᵀQx + aᵀx + ¼aᵀQ⁻¹a`, the QP value
/// at the optimum is `u₀² + shift` with `shift = β - ¼aᵀQ⁻¹a`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSocp {
    pub program: ConeProgram,
    pub shift: f64,
    pub x_vars: Range<usize>,
    pub u0: usize,
    pub u_bar: Range<usize>,
}

impl QpSocp {
    /// QP objective recovered from the cone head value.
    pub fn qp_value(&self, u0: f64) -> f64 {
        u0 * u0 + self.shift
    }

    pub fn extract_x(&self, x: &[f64]) -> Vec<f64> {
        x[self.x_vars.clone()].to_vec()
    }
}

pub fn qp_to_socp(
    q: &DenseMatrix,
    a: &[f64],
    beta: f64,
    a_eq: &DenseMatrix,
    b_eq: &[f64],
    nonneg: bool,
) -> Result<QpSocp, ConicError> {
    let n = q.rows();
    if a.len() != n || (a_eq.rows() > 0 && a_eq.cols() != n) || a_eq.rows() != b_eq.len() {
        return Err(ConicError::ShapeMismatch(format!(
            "Q is {}x{}, a has {}, A is {}x{}, b has {}",
            q.rows(),
            q.cols(),
            a.len(),
            a_eq.rows(),
            a_eq.cols(),
            b_eq.len()
        )));
    }
    let l = cholesky_lower(q, 0.0)?;
    let half_linv_a: Vec<f64> = forward_substitute(&l, a).into_iter().map(|v| 0.5 * v).collect();
    let shift = beta - dot(&half_linv_a, &half_linv_a);

    let mut b = ProgramBuilder::new();
    let x_vars = b.add_vars(n);
    let u0 = b.add_vars(1).start;
    let u_bar = b.add_vars(n);
    b.set_cost(u0, 1.0);

    // (Lᵀx)_r = Σ_k L[k][r] x_k for k ≥ r.
    for r in 0..n {
        let mut terms: Vec<(usize, f64)> = (r..n).map(|k| (x_vars.start + k, l[(k, r)])).collect();
        terms.push((u_bar.start + r, -1.0));
        b.add_eq(&terms, -half_linv_a[r]);
    }
    for (row, &rhs) in b_eq.iter().enumerate() {
        let terms: Vec<(usize, f64)> = (0..n).map(|k| (x_vars.start + k, a_eq[(row, k)])).collect();
        b.add_eq(&terms, rhs);
    }

    let mut cone = vec![u0];
    cone.extend(u_bar.clone());
    b.add_cone(ConeKind::Quadratic, cone);
    if nonneg {
        b.add_cone(ConeKind::NonnegOrthant, x_vars.clone().collect());
    } else {
        b.mark_free(x_vars.clone());
    }

    Ok(QpSocp {
        program: b.build()?,
        shift,
        x_vars,
        u0,
        u_bar,
    })
}

/// The cone `F x + g ∈ Q^{k+2}` equivalent to `xᵀBᵀBx + aᵀx + β ≤ 0`:
/// head `u₀ = (1 - aᵀx - β)/2`, tail `ū = (Bx, (aᵀx + β + 1)/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCone {
    pub matrix: DenseMatrix,
    pub offset: Vec<f64>,
}

impl AffineCone {
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .mul_vec(x)
            .into_iter()
            .zip(&self.offset)
            .map(|(v, g)| v + g)
            .collect()
    }

    /// `‖ū‖ ≤ u₀ + tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let v = self.evaluate(x);
        norm2(&v[1..]) <= v[0] + tol
    }
}

pub fn quad_constraint_to_cone(b: &DenseMatrix, a: &[f64], beta: f64) -> Result<AffineCone, ConicError> {
    let (k, n) = (b.rows(), b.cols());
    if a.len() != n {
        return Err(ConicError::ShapeMismatch(format!(
            "B has {n} columns but a has {} entries",
            a.len()
        )));
    }
    let mut rows = Vec::with_capacity(k + 2);
    rows.push(a.iter().map(|v| -0.5 * v).collect::<Vec<_>>());
    rows.extend(b.to_rows());
    rows.push(a.iter().map(|v| 0.5 * v).collect());
    let mut offset = vec![0.0; k + 2];
    offset[0] = 0.5 * (1.0 - beta);
    offset[k + 1] = 0.5 * (beta + 1.0);
    let matrix = DenseMatrix::from_row_major(k + 2, n, rows.concat())
        .ok_or_else(|| ConicError::ShapeMismatch("ragged affine rows".into()))?;
    Ok(AffineCone { matrix, offset })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_ball() -> AffineCone {
        quad_constraint_to_cone(&DenseMatrix::identity(2), &[0.0, 0.0], -1.0).unwrap()
    }

    #[test]
    fn unit_ball_interior() {
        let c = unit_ball();
        let v = c.evaluate(&[0.0, 0.0]);
        assert_eq!(v, vec![1.0, 0.0, 0.0, 0.0]);
        assert!(c.contains(&[0.0, 0.0], 0.0));
    }

    #[test]
    fn unit_ball_boundary() {
        let c = unit_ball();
        let x = [0.6, 0.8];
        let v = c.evaluate(&x);
        assert!((norm2(&v[1..]) - v[0]).abs() < 1e-12);
        assert!(c.contains(&x, 1e-12));
    }

    #[test]
    fn unit_ball_exterior() {
        assert!(!unit_ball().contains(&[2.0, 0.0], 1e-9));
    }

    #[test]
    fn membership_matches_quadratic_sign() {
        let b = DenseMatrix::from_rows(&[vec![1.0, 0.5, 0.0], vec![0.0, 2.0, -1.0]]).unwrap();
        let a = [0.3, -0.2, 1.0];
        let beta = -2.0;
        let c = quad_constraint_to_cone(&b, &a, beta).unwrap();
        let mut rng = crate::rng::seeded_rng(4);
        for _ in 0..500 {
            let x: Vec<f64> = (0..3).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
            let bx = b.mul_vec(&x);
            let qv = dot(&bx, &bx) + dot(&a, &x) + beta;
            if qv.abs() > 1e-9 {
                assert_eq!(c.contains(&x, 0.0), qv <= 0.0);
            }
        }
    }

    #[test]
    fn shape_checked() {
        assert!(matches!(
            quad_constraint_to_cone(&DenseMatrix::identity(2), &[1.0], 0.0),
            Err(ConicError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn shift_formula() {
        // Q = 2I, a = (2, 4): ¼aᵀQ⁻¹a = ¼·(4 + 16)/2 = 2.5
        let q = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let p = qp_to_socp(&q, &[2.0, 4.0], 1.0, &DenseMatrix::zeros(0, 2), &[], false).unwrap();
        assert!((p.shift - (1.0 - 2.5)).abs() < 1e-14);
        assert_eq!(p.program.num_vars, 5);
    }

    fn solve_qp(p: &QpSocp) -> (f64, Vec<f64>) {
        let sol = crate::solver::solve(&p.program, &crate::solver::SolverSettings::default()).unwrap();
        assert_eq!(sol.status, crate::SolveStatus::Optimal);
        (p.qp_value(sol.x[p.u0]), p.extract_x(&sol.x))
    }

    #[test]
    fn pinned_point_recovers_squared_norm() {
        let a_eq = DenseMatrix::identity(2);
        let p = qp_to_socp(&DenseMatrix::identity(2), &[0.0, 0.0], 0.0, &a_eq, &[3.0, 4.0], false).unwrap();
        assert_eq!(p.shift, 0.0);
        let (value, x) = solve_qp(&p);
        assert!((value - 25.0).abs() < 1e-7, "{value}");
        assert!((x[0] - 3.0).abs() < 1e-9 && (x[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn nonnegative_minimum_at_origin() {
        let p = qp_to_socp(
            &DenseMatrix::identity(3),
            &[0.0; 3],
            0.0,
            &DenseMatrix::zeros(0, 3),
            &[],
            true,
        )
        .unwrap();
        let (value, x) = solve_qp(&p);
        assert!(value.abs() < 1e-7 && norm2(&x) < 1e-6, "{value} {x:?}");
    }

    #[test]
    fn two_variable_qp_matches_kkt() {
        let mut rng = crate::rng::seeded_rng(11);
        for _ in 0..20 {
            let g: Vec<f64> = (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
            // Q = GGᵀ + 0.5I
            let q = DenseMatrix::from_rows(&[
                vec![g[0] * g[0] + g[1] * g[1] + 0.5, g[0] * g[2] + g[1] * g[3]],
                vec![g[0] * g[2] + g[1] * g[3], g[2] * g[2] + g[3] * g[3] + 0.5],
            ])
            .unwrap();
            let a = [rng.uniform_range(-2.0, 2.0), rng.uniform_range(-2.0, 2.0)];
            let (e, rhs) = (
                [rng.uniform_range(0.5, 1.5), rng.uniform_range(-1.0, 1.0)],
                rng.uniform_range(-1.0, 1.0),
            );
            // [2Q eᵀ; e 0] (x, ν) = (-a, rhs)
            let k = nalgebra::Matrix3::new(
                2.0 * q[(0, 0)],
                2.0 * q[(0, 1)],
                e[0],
                2.0 * q[(1, 0)],
                2.0 * q[(1, 1)],
                e[1],
                e[0],
                e[1],
                0.0,
            );
            let kkt = k.lu().solve(&nalgebra::Vector3::new(-a[0], -a[1], rhs)).unwrap();
            let a_eq = DenseMatrix::from_rows(&[e.to_vec()]).unwrap();
            let p = qp_to_socp(&q, &a, 0.25, &a_eq, &[rhs], false).unwrap();
            let (value, x) = solve_qp(&p);
            assert!(
                (x[0] - kkt[0]).abs() < 1e-6 && (x[1] - kkt[1]).abs() < 1e-6,
                "{x:?} vs {kkt:?}"
            );
            let direct = q.quad_form(&[kkt[0], kkt[1]]) + a[0] * kkt[0] + a[1] * kkt[1] + 0.25;
            assert!((value - direct).abs() < 1e-6);
        }
    }
}
