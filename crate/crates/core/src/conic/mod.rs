//! Cone-program data model and builders.
//!
//! A [`ConeProgram`] is
//!
//! ```text
//!     minimize    cᵀx
//!     subject to  A x = b
//!                 x[idx_k] ∈ K_k   for every cone k
//!                 x[free]  free
//! ```
//!
//! where each `K_k` is a nonnegative orthant, a second-order cone
//! `{(t, u) : ‖u‖₂ ≤ t}` or a rotated cone `{(a, b, u) : 2ab ≥ ‖u‖², a, b ≥ 0}`.
//! Every variable belongs to exactly one cone or to the free set.

mod cholesky;
mod pruning;
pub mod text;
mod transforms;

pub use cholesky::{cholesky_lower, forward_substitute};
pub use pruning::{build_pruning_socp, build_pruning_socp_with, PruningOptions, PruningVarMap};
pub use transforms::{qp_to_socp, quad_constraint_to_cone, AffineCone, QpSocp};

use crate::numeric::norm2;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConicError {
    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("matrix is not symmetric (max deviation {0})")]
    NotSymmetric(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    NonnegOrthant,
    Quadratic,
    RotatedQuadratic,
}

impl ConeKind {
    pub fn min_dim(self) -> usize {
        match self {
            ConeKind::NonnegOrthant | ConeKind::Quadratic => 1,
            ConeKind::RotatedQuadratic => 3,
        }
    }
}

/// A cone membership over program variables, listed in cone order
/// (for quadratic cones the first listed variable is the head).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub kind: ConeKind,
    pub var_indices: Vec<usize>,
}

impl Cone {
    pub fn new(kind: ConeKind, var_indices: Vec<usize>) -> Self {
        Self { kind, var_indices }
    }

    pub fn dim(&self) -> usize {
        self.var_indices.len()
    }

    /// Gathers this cone's coordinates out of a full variable vector.
    pub fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.var_indices.iter().map(|&i| x[i]).collect()
    }
}

/// How far `v` lies outside the cone (0 when inside).
pub fn cone_violation(kind: ConeKind, v: &[f64]) -> f64 {
    match kind {
        ConeKind::NonnegOrthant => v.iter().fold(0.0_f64, |m, &x| m.max(-x)),
        ConeKind::Quadratic => (norm2(&v[1..]) - v[0]).max(0.0),
        ConeKind::RotatedQuadratic => {
            let (a, b) = (v[0], v[1]);
            let head = (a + b) / std::f64::consts::SQRT_2;
            let mut tail = Vec::with_capacity(v.len() - 1);
            tail.push((a - b) / std::f64::consts::SQRT_2);
            tail.extend_from_slice(&v[2..]);
            (norm2(&tail) - head).max(0.0)
        }
    }
}

/// Sparse matrix in coordinate form. Duplicate entries are summed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for &(r, c, v) in &self.entries {
            out[r] += v * x[c];
        }
        out
    }

    pub fn transpose_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for &(r, c, v) in &self.entries {
            out[c] += v * y[r];
        }
        out
    }

    pub fn to_dense(&self) -> crate::numeric::DenseMatrix {
        let mut d = crate::numeric::DenseMatrix::zeros(self.rows, self.cols);
        for &(r, c, v) in &self.entries {
            d[(r, c)] += v;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub eq_a: SparseMatrix,
    pub eq_b: Vec<f64>,
    pub cones: Vec<Cone>,
    pub free_vars: Vec<usize>,
}

impl ConeProgram {
    pub fn num_rows(&self) -> usize {
        self.eq_b.len()
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), ConicError> {
        let malformed = |m: String| Err(ConicError::Malformed(m));
        if self.objective.len() != self.num_vars {
            return malformed(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.num_vars
            ));
        }
        if self.eq_a.cols != self.num_vars || self.eq_a.rows != self.eq_b.len() {
            return malformed(format!(
                "equality matrix is {}x{}, expected {}x{}",
                self.eq_a.rows,
                self.eq_a.cols,
                self.eq_b.len(),
                self.num_vars
            ));
        }
        for &(r, c, v) in &self.eq_a.entries {
            if r >= self.eq_a.rows || c >= self.num_vars {
                return malformed(format!("equality entry ({r}, {c}) out of range"));
            }
            if !v.is_finite() {
                return malformed(format!("equality entry ({r}, {c}) is not finite"));
            }
        }
        if let Some(i) = self.objective.iter().chain(&self.eq_b).position(|v| !v.is_finite()) {
            return malformed(format!("non-finite data at position {i}"));
        }
        let mut owner = vec![false; self.num_vars];
        let mut claim = |i: usize, what: &str| -> Result<(), ConicError> {
            if i >= self.num_vars {
                return Err(ConicError::Malformed(format!(
                    "{what} refers to variable {i} out of range"
                )));
            }
            if std::mem::replace(&mut owner[i], true) {
                return Err(ConicError::Malformed(format!(
                    "variable {i} appears in more than one cone"
                )));
            }
            Ok(())
        };
        for (k, cone) in self.cones.iter().enumerate() {
            if cone.dim() < cone.kind.min_dim() {
                return malformed(format!(
                    "cone {k} ({:?}) has dimension {}, minimum is {}",
                    cone.kind,
                    cone.dim(),
                    cone.kind.min_dim()
                ));
            }
            for &i in &cone.var_indices {
                claim(i, "cone")?;
            }
        }
        for &i in &self.free_vars {
            claim(i, "free list")?;
        }
        if let Some(i) = owner.iter().position(|&o| !o) {
            return malformed(format!("variable {i} is in no cone and not free"));
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        crate::numeric::dot(&self.objective, x)
    }
}

/// Incremental construction of a [`ConeProgram`].
#[derive(Debug, Default, Clone)]
pub struct ProgramBuilder {
    objective: Vec<f64>,
    eq_entries: Vec<(usize, usize, f64)>,
    eq_b: Vec<f64>,
    cones: Vec<Cone>,
    free: Vec<usize>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Appends `count` variables with zero cost.
    pub fn add_vars(&mut self, count: usize) -> Range<usize> {
        let start = self.objective.len();
        self.objective.resize(start + count, 0.0);
        start..start + count
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    /// Adds the row `Σ coeff·x[var] = rhs`; returns the row index.
    pub fn add_eq(&mut self, terms: &[(usize, f64)], rhs: f64) -> usize {
        let row = self.eq_b.len();
        for &(var, coeff) in terms {
            if coeff != 0.0 {
                self.eq_entries.push((row, var, coeff));
            }
        }
        self.eq_b.push(rhs);
        row
    }

    pub fn add_cone(&mut self, kind: ConeKind, vars: Vec<usize>) -> Cone {
        let cone = Cone::new(kind, vars);
        self.cones.push(cone.clone());
        cone
    }

    pub fn mark_free(&mut self, vars: impl IntoIterator<Item = usize>) {
        self.free.extend(vars);
    }

    /// Introduces auxiliary variables `v = F x + g` and constrains `v` to a quadratic cone.
    pub fn add_affine_cone(&mut self, x_vars: &[usize], cone: &AffineCone) -> Result<Cone, ConicError> {
        if cone.matrix.cols() != x_vars.len() {
            return Err(ConicError::ShapeMismatch(format!(
                "affine cone acts on {} variables, {} given",
                cone.matrix.cols(),
                x_vars.len()
            )));
        }
        let aux = self.add_vars(cone.matrix.rows());
        for (r, v) in aux.clone().enumerate() {
            let mut terms = vec![(v, 1.0)];
            terms.extend(x_vars.iter().zip(cone.matrix.row(r)).map(|(&x, &f)| (x, -f)));
            self.add_eq(&terms, cone.offset[r]);
        }
        Ok(self.add_cone(ConeKind::Quadratic, aux.collect()))
    }

    pub fn build(self) -> Result<ConeProgram, ConicError> {
        let n = self.objective.len();
        let program = ConeProgram {
            num_vars: n,
            objective: self.objective,
            eq_a: SparseMatrix {
                rows: self.eq_b.len(),
                cols: n,
                entries: self.eq_entries,
            },
            eq_b: self.eq_b,
            cones: self.cones,
            free_vars: self.free,
        };
        program.validate()?;
        Ok(program)
    }
}

/// Outcome of a conic solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIters,
    Numerical,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::Numerical => "numerical",
        };
        f.write_str(s)
    }
}

/// Primal point, equality duals `y` and cone duals `s`, with `c - Aᵀy = s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violation_measures() {
        assert_eq!(cone_violation(ConeKind::NonnegOrthant, &[1.0, -0.5]), 0.5);
        assert_eq!(cone_violation(ConeKind::Quadratic, &[5.0, 3.0, 4.0]), 0.0);
        assert!((cone_violation(ConeKind::Quadratic, &[4.0, 3.0, 4.0]) - 1.0).abs() < 1e-15);
        // 2·1·2 = 4 ≥ 2² on the boundary.
        assert!(cone_violation(ConeKind::RotatedQuadratic, &[1.0, 2.0, 2.0]) < 1e-12);
        assert!(cone_violation(ConeKind::RotatedQuadratic, &[1.0, 2.0, 3.0]) > 0.0);
        assert!(cone_violation(ConeKind::RotatedQuadratic, &[-1.0, -2.0, 0.0]) > 0.0);
    }

    #[test]
    fn validation_catches_structure_errors() {
        let mut b = ProgramBuilder::new();
        let v = b.add_vars(3);
        b.add_cone(ConeKind::Quadratic, v.clone().collect());
        assert!(b.clone().build().is_ok());

        let mut dup = b.clone();
        dup.mark_free([0]);
        assert!(matches!(dup.build(), Err(ConicError::Malformed(_))));

        let mut orphan = b.clone();
        orphan.add_vars(1);
        assert!(matches!(orphan.build(), Err(ConicError::Malformed(_))));

        let mut small = ProgramBuilder::new();
        let r = small.add_vars(2);
        small.add_cone(ConeKind::RotatedQuadratic, r.collect());
        assert!(matches!(small.build(), Err(ConicError::Malformed(_))));
    }

    #[test]
    fn affine_cone_rows() {
        let mut b = ProgramBuilder::new();
        let x = b.add_vars(2);
        b.mark_free(x.clone());
        let c = quad_constraint_to_cone(&crate::numeric::DenseMatrix::identity(2), &[0.0, 0.0], -1.0).unwrap();
        let cone = b.add_affine_cone(&x.collect::<Vec<_>>(), &c).unwrap();
        assert_eq!(cone.dim(), 4);
        let p = b.build().unwrap();
        assert_eq!(p.num_rows(), 4);
        assert_eq!(p.num_vars, 6);
    }
}
