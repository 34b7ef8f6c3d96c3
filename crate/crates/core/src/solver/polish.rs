//! Newton refinement of a converged iterate on the unscaled optimality
//! conditions `Ax = b`, `Aᵀy + z = c`, `x ∘ z = 0`.
//!
//! Interior-point iterates approach a boundary solution inside a neighbourhood
//! of the central path that lets a second-order cone pair sit O(√μ) out of
//! alignment, so the primal error can be far larger than the gap suggests. At
//! a strictly complementary, nondegenerate solution the Jacobian of these
//! conditions is nonsingular and a few full Newton steps converge
//! quadratically. A step is kept only if it lowers the residual merit, so a
//! degenerate or ill-posed program simply keeps the interior-point answer.

use super::cones::{jordan_product, BlockKind};
use super::{Internal, Iterate};
use crate::numeric::norm2;
use nalgebra::{DMatrix, DVector};

const MAX_STEPS: usize = 4;

pub(super) fn polish(prob: &Internal, start: &Iterate) -> Iterate {
    let mut best = start.clone();
    let mut best_merit = merit(prob, &best);
    for _ in 0..MAX_STEPS {
        if best_merit == 0.0 {
            break;
        }
        let Some(mut cand) = newton_step(prob, &best) else {
            break;
        };
        project(prob, &mut cand);
        let m = merit(prob, &cand);
        if !(m < best_merit) {
            break;
        }
        best = cand;
        best_merit = m;
    }
    best
}

fn merit(prob: &Internal, it: &Iterate) -> f64 {
    let m = prob.measure(it);
    m.pres.max(m.dres).max(m.rel_comp)
}

/// Full Newton step on the optimality conditions.
fn newton_step(prob: &Internal, it: &Iterate) -> Option<Iterate> {
    let (n, m, p) = (prob.n, prob.m, prob.a.rows());
    let size = n + p + m;
    let meas = prob.measure(it);
    let mut jac = DMatrix::<f64>::zeros(size, size);
    let mut rhs = DVector::<f64>::zeros(size);

    // A Δx = -(Ax - b)
    for r in 0..p {
        for j in 0..n {
            jac[(r, j)] = prob.a[(r, j)];
        }
        rhs[r] = -meas.rp[r];
    }
    // Aᵀ Δy + Δz = c - Aᵀy - z
    for j in 0..n {
        let row = p + j;
        for r in 0..p {
            jac[(row, n + r)] = prob.a[(r, j)];
        }
        if j < m {
            jac[(row, n + p + j)] = 1.0;
        }
        rhs[row] = meas.rd[j];
    }
    // z ∘ Δx + x ∘ Δz = -x ∘ z
    let mut xz = vec![0.0; m];
    for blk in &prob.blocks {
        let r = blk.range();
        jordan_product(blk.kind, &it.x[r.clone()], &it.z[r.clone()], &mut xz[r.clone()]);
        let row = n + p;
        let zcol = n + p;
        match blk.kind {
            BlockKind::Orthant => {
                for k in r.clone() {
                    jac[(row + k, k)] = it.z[k];
                    jac[(row + k, zcol + k)] = it.x[k];
                }
            }
            BlockKind::Soc => {
                let s = blk.start;
                for k in r.clone() {
                    // first row of the arrow matrix is the vector itself
                    jac[(row + s, k)] = it.z[k];
                    jac[(row + s, zcol + k)] = it.x[k];
                }
                for k in s + 1..s + blk.dim {
                    jac[(row + k, s)] = it.z[k];
                    jac[(row + k, k)] = it.z[s];
                    jac[(row + k, zcol + s)] = it.x[k];
                    jac[(row + k, zcol + k)] = it.x[s];
                }
            }
        }
        for k in r {
            rhs[row + k] = -xz[k];
        }
    }

    let step = jac.lu().solve(&rhs)?;
    if !step.iter().all(|v| v.is_finite()) {
        return None;
    }
    let mut next = it.clone();
    for (j, x) in next.x.iter_mut().enumerate() {
        *x += step[j];
    }
    for (r, y) in next.y.iter_mut().enumerate() {
        *y += step[n + r];
    }
    for (k, z) in next.z.iter_mut().enumerate() {
        *z += step[n + p + k];
    }
    Some(next)
}

/// Moves each cone component of `x` and `z` onto the cone if a step left it.
fn project(prob: &Internal, it: &mut Iterate) {
    for blk in &prob.blocks {
        for v in [&mut it.x[blk.range()], &mut it.z[blk.range()]] {
            match blk.kind {
                BlockKind::Orthant => v.iter_mut().for_each(|e| *e = e.max(0.0)),
                BlockKind::Soc => {
                    let t = norm2(&v[1..]);
                    if v[0] < t {
                        v[0] = t;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::conic::text::parse_program;
    use crate::solver::{solve, SolverSettings};
    use crate::SolveStatus;

    /// min t + cᵀw with (1 + t, 2w, 1 - t) in a 7-dimensional cone, i.e.
    /// min ‖w‖² + cᵀw, whose minimizer is -c/2 with the cone pair on the boundary.
    #[test]
    fn boundary_solution_recovered_to_working_precision() {
        let c = [
            -1.0548286189423117,
            1.553526086479037,
            1.047317588165452,
            -0.04995942873985637,
            0.6597725161994101,
        ];
        let mut text = String::from("coneprog 1\nvars 13\nrows 7\nobj 5 1\n");
        for (i, ci) in c.iter().enumerate() {
            text += &format!("obj {i} {ci}\n");
        }
        text += "a 0 6 1\na 0 5 -1\nb 0 1\na 1 12 1\na 1 5 1\nb 1 1\n";
        for r in 0..5 {
            text += &format!("a {} {} 1\na {} {r} -2\n", 2 + r, 7 + r, 2 + r);
        }
        text += "cone quad 7 6 7 8 9 10 11 12\nfree 0 1 2 3 4 5\nend\n";
        let p = parse_program(&text).unwrap();
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        for (i, ci) in c.iter().enumerate() {
            assert!((sol.x[i] + ci / 2.0).abs() < 1e-10, "w{i} = {}", sol.x[i]);
        }
    }
}
