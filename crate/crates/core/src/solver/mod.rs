//! Primal-dual interior-point solver for [`ConeProgram`]s.
//!
//! The program `min cᵀx s.t. Ax = b, x_K ∈ K, x_F free` is solved with its
//! dual `max bᵀy s.t. c - Aᵀy = s, s_K ∈ K*, s_F = 0`, following the central
//! path with Nesterov–Todd scaling and Mehrotra's predictor-corrector. Each
//! Newton system is reduced to the quasi-definite matrix
//! `[W⁻² + δI, Aᵀ; A, -δI]`, factored densely and refined against the
//! unregularized system. A converged iterate is finished with a few Newton
//! steps on the unscaled optimality conditions, which removes the O(√gap)
//! primal error that boundary solutions otherwise keep.
//!
//! Rotated cones are mapped onto standard second-order cones by the
//! orthogonal involution `(a, b, u) ↦ ((a+b)/√2, (a-b)/√2, u)`.

mod cones;
mod kkt;
mod polish;

use crate::conic::{cone_violation, ConeKind, ConeProgram, ConicSolution, SolveStatus};
use crate::numeric::{dot, norm_inf, DenseMatrix};
use cones::{jordan_divide, jordan_product, max_step, Block, BlockKind, Scaling};
use kkt::Ldl;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("malformed program: {0}")]
    MalformedProgram(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol_gap: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iters: usize,
    pub step_fraction: f64,
    /// Static regularization on both diagonal blocks of the KKT matrix.
    pub regularization: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_gap: 1e-8,
            tol_primal: 1e-8,
            tol_dual: 1e-8,
            max_iters: 100,
            step_fraction: 0.99,
            regularization: 1e-9,
        }
    }
}

impl SolverSettings {
    pub fn with_tolerance(tol: f64) -> Self {
        Self {
            tol_gap: tol,
            tol_primal: tol,
            tol_dual: tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(self.tol_gap) && positive(self.tol_primal) && positive(self.tol_dual)) {
            return Err(SolverError::InvalidSettings("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(SolverError::InvalidSettings("max_iters must be at least 1".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(SolverError::InvalidSettings("step_fraction must be in (0, 1)".into()));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(SolverError::InvalidSettings(
                "regularization must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

// Dynamic pivot regularization (threshold, replacement).
const DYNAMIC_REG: (f64, f64) = (1e-13, 2e-7);
const REFINE_STEPS: usize = 3;
const MIN_STEP: f64 = 1e-10;
const STALL_WINDOW: usize = 10;
const STALL_PROGRESS: f64 = 1e-3;
const STALL_CERT_TOL: f64 = 1e-4;

/// Solves `p`. Solver outcomes (infeasible, unbounded, iteration limit, numerical
/// trouble) are reported through [`ConicSolution::status`]; only structurally
/// invalid input is an error.
pub fn solve(p: &ConeProgram, settings: &SolverSettings) -> Result<ConicSolution, SolverError> {
    solve_impl(p, settings, None)
}

/// [`solve`] that also writes one trace record per iteration:
/// `iter=<k> pobj=<..> dobj=<..> gap=<..> comp=<..> pres=<..> dres=<..> step=<..> sigma=<..>`.
pub fn solve_traced(
    p: &ConeProgram,
    settings: &SolverSettings,
    trace: &mut dyn Write,
) -> Result<ConicSolution, SolverError> {
    solve_impl(p, settings, Some(trace))
}

/// Program in solver ordering: cone variables first (block by block), then free ones.
struct Internal {
    n: usize,
    m: usize,
    blocks: Vec<Block>,
    a: DenseMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    /// internal variable → original variable
    perm: Vec<usize>,
    /// internal index pairs mixed by the rotated-cone involution
    rotated: Vec<(usize, usize)>,
    /// internal row → original row
    rows: Vec<usize>,
}

fn rotate_pair(v: &mut [f64], (i, j): (usize, usize)) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = (v[i], v[j]);
    v[i] = s * (a + b);
    v[j] = s * (a - b);
}

fn internalize(p: &ConeProgram) -> Result<Result<Internal, SolveStatus>, SolverError> {
    p.validate().map_err(|e| SolverError::MalformedProgram(e.to_string()))?;
    let n = p.num_vars;
    let mut perm = Vec::with_capacity(n);
    let mut blocks = Vec::with_capacity(p.cones.len());
    let mut rotated = Vec::new();
    for cone in &p.cones {
        let start = perm.len();
        perm.extend_from_slice(&cone.var_indices);
        match cone.kind {
            ConeKind::NonnegOrthant => blocks.push(Block {
                kind: BlockKind::Orthant,
                start,
                dim: cone.dim(),
            }),
            ConeKind::Quadratic => blocks.push(Block {
                kind: BlockKind::Soc,
                start,
                dim: cone.dim(),
            }),
            ConeKind::RotatedQuadratic => {
                rotated.push((start, start + 1));
                blocks.push(Block {
                    kind: BlockKind::Soc,
                    start,
                    dim: cone.dim(),
                });
            }
        }
    }
    let m = perm.len();
    perm.extend_from_slice(&p.free_vars);
    let mut pos = vec![0; n];
    for (j, &orig) in perm.iter().enumerate() {
        pos[orig] = j;
    }

    // Drop empty rows; a nonzero right-hand side on one is infeasible outright.
    let dense = p.eq_a.to_dense();
    let mut rows = Vec::new();
    for r in 0..p.num_rows() {
        if dense.row(r).iter().any(|&v| v != 0.0) {
            rows.push(r);
        } else if p.eq_b[r] != 0.0 {
            return Ok(Err(SolveStatus::Infeasible));
        }
    }
    let mut a = DenseMatrix::zeros(rows.len(), n);
    for (ri, &r) in rows.iter().enumerate() {
        for (orig, &v) in dense.row(r).iter().enumerate() {
            a[(ri, pos[orig])] = v;
        }
    }
    let mut c: Vec<f64> = perm.iter().map(|&o| p.objective[o]).collect();
    let b: Vec<f64> = rows.iter().map(|&r| p.eq_b[r]).collect();
    for &pair in &rotated {
        rotate_pair(&mut c, pair);
        for ri in 0..rows.len() {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let (x, y) = (a[(ri, pair.0)], a[(ri, pair.1)]);
            a[(ri, pair.0)] = s * (x + y);
            a[(ri, pair.1)] = s * (x - y);
        }
    }
    Ok(Ok(Internal {
        n,
        m,
        blocks,
        a,
        b,
        c,
        perm,
        rotated,
        rows,
    }))
}

#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

#[derive(Clone)]
struct Measures {
    pobj: f64,
    dobj: f64,
    gap: f64,
    /// `xᵀz / (1 + |pobj|)`, the reported gap.
    rel_gap: f64,
    /// Largest Jordan-product entry of `x∘z`, scaled like `rel_gap`.
    rel_comp: f64,
    pres: f64,
    dres: f64,
    rp: Vec<f64>,
    rd: Vec<f64>,
}

impl Internal {
    fn measure(&self, it: &Iterate) -> Measures {
        let mut rp = self.a.mul_vec(&it.x);
        for (r, b) in rp.iter_mut().zip(&self.b) {
            *r -= b;
        }
        let aty = self.a.transpose().mul_vec(&it.y);
        let mut rd: Vec<f64> = self.c.iter().zip(&aty).map(|(c, v)| c - v).collect();
        for (r, z) in rd.iter_mut().zip(&it.z) {
            *r -= z;
        }
        let pobj = dot(&self.c, &it.x);
        let dobj = dot(&self.b, &it.y);
        let gap = dot(&it.x[..self.m], &it.z);
        // xᵀz alone lets a cone pair sit O(√gap) off alignment on the boundary;
        // the Jordan product's vector part measures that linearly.
        let mut xz = vec![0.0; self.m];
        for blk in &self.blocks {
            let r = blk.range();
            jordan_product(blk.kind, &it.x[r.clone()], &it.z[r.clone()], &mut xz[r]);
        }
        let comp = gap.max(norm_inf(&xz));
        Measures {
            pobj,
            dobj,
            gap,
            rel_gap: gap / (1.0 + pobj.abs()),
            rel_comp: comp / (1.0 + pobj.abs()),
            pres: norm_inf(&rp) / (1.0 + norm_inf(&self.b)),
            dres: norm_inf(&rd) / (1.0 + norm_inf(&self.c)),
            rp,
            rd,
        }
    }

    fn degree(&self) -> f64 {
        self.blocks.iter().map(Block::degree).sum::<usize>() as f64
    }

    fn max_step(&self, u: &[f64], d: &[f64]) -> f64 {
        self.blocks.iter().fold(f64::INFINITY, |a, blk| {
            a.min(max_step(blk.kind, &u[blk.range()], &d[blk.range()], a))
        })
    }

    /// Farkas-style certificates: `(primal infeasibility ratio, dual infeasibility ratio)`.
    fn certificate_ratios(&self, it: &Iterate) -> (f64, f64) {
        let by = dot(&self.b, &it.y);
        let primal = if by > 0.0 {
            let mut v = self.a.transpose().mul_vec(&it.y);
            for (vi, z) in v.iter_mut().zip(&it.z) {
                *vi += z;
            }
            norm_inf(&v) / by
        } else {
            f64::INFINITY
        };
        let cx = dot(&self.c, &it.x);
        let dual = if cx < 0.0 {
            norm_inf(&self.a.mul_vec(&it.x)) / (-cx)
        } else {
            f64::INFINITY
        };
        (primal, dual)
    }
}

/// One factored Newton system.
struct Newton<'a> {
    prob: &'a Internal,
    scalings: &'a [Scaling],
    lambda: &'a [f64],
    kreg: DenseMatrix,
    ldl: Ldl,
    delta: f64,
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
}

impl<'a> Newton<'a> {
    fn new(prob: &'a Internal, scalings: &'a [Scaling], lambda: &'a [f64], delta: f64) -> Option<Self> {
        let (n, p) = (prob.n, prob.a.rows());
        let mut kreg = DenseMatrix::zeros(n + p, n + p);
        for (blk, sc) in prob.blocks.iter().zip(scalings) {
            sc.add_inv_square(&mut kreg, blk.start);
        }
        for i in 0..n {
            kreg[(i, i)] += delta;
        }
        for r in 0..p {
            for j in 0..n {
                let v = prob.a[(r, j)];
                kreg[(n + r, j)] = v;
                kreg[(j, n + r)] = v;
            }
            kreg[(n + r, n + r)] = -delta;
        }
        let ldl = Ldl::factor_with(&kreg, n, Some(DYNAMIC_REG))?;
        Some(Self {
            prob,
            scalings,
            lambda,
            kreg,
            ldl,
            delta,
        })
    }

    /// Unregularized KKT product.
    fn apply_k0(&self, v: &[f64]) -> Vec<f64> {
        let n = self.prob.n;
        let mut out = self.kreg.mul_vec(v);
        for (i, o) in out.iter_mut().enumerate() {
            *o -= if i < n { self.delta * v[i] } else { -self.delta * v[i] };
        }
        out
    }

    fn solve_refined(&self, rhs: &[f64]) -> Vec<f64> {
        let mut sol = rhs.to_vec();
        self.ldl.solve_in_place(&mut sol);
        let residual = |sol: &[f64]| -> Vec<f64> {
            let k = self.apply_k0(sol);
            rhs.iter().zip(&k).map(|(r, v)| r - v).collect()
        };
        let mut res = residual(&sol);
        let mut res_norm = norm_inf(&res);
        for _ in 0..REFINE_STEPS {
            if res_norm == 0.0 {
                break;
            }
            let mut corr = res.clone();
            self.ldl.solve_in_place(&mut corr);
            let cand: Vec<f64> = sol.iter().zip(&corr).map(|(s, c)| s + c).collect();
            let cand_res = residual(&cand);
            let cand_norm = norm_inf(&cand_res);
            if !(cand_norm < res_norm) {
                break;
            }
            sol = cand;
            res = cand_res;
            res_norm = cand_norm;
        }
        sol
    }

    /// Direction for the complementarity target `λ ∘ (W⁻¹Δx + WΔz) = d`.
    fn direction(&self, meas: &Measures, d: &[f64]) -> Direction {
        let prob = self.prob;
        let (n, m) = (prob.n, prob.m);
        // u = λ ⋄ d, g = W⁻¹u
        let mut u = vec![0.0; m];
        let mut g = vec![0.0; m];
        for (blk, sc) in prob.blocks.iter().zip(self.scalings) {
            let r = blk.range();
            jordan_divide(blk.kind, &self.lambda[r.clone()], &d[r.clone()], &mut u[r.clone()]);
            sc.apply_inv(&u[r.clone()], &mut g[r]);
        }
        let mut rhs = Vec::with_capacity(n + prob.a.rows());
        rhs.extend(meas.rd.iter().map(|v| -v));
        for (r, gi) in rhs.iter_mut().zip(&g) {
            *r += gi;
        }
        rhs.extend(meas.rp.iter().map(|v| -v));
        let sol = self.solve_refined(&rhs);
        let dx = sol[..n].to_vec();
        let dy: Vec<f64> = sol[n..].iter().map(|v| -v).collect();
        // Δz = W⁻¹(u - W⁻¹Δx)
        let mut dz = vec![0.0; m];
        let mut tmp = vec![0.0; m];
        for (blk, sc) in prob.blocks.iter().zip(self.scalings) {
            let r = blk.range();
            sc.apply_inv(&dx[r.clone()], &mut tmp[r.clone()]);
            for k in r.clone() {
                tmp[k] = u[k] - tmp[k];
            }
            let t = tmp[r.clone()].to_vec();
            sc.apply_inv(&t, &mut dz[r]);
        }
        Direction { dx, dy, dz }
    }
}

fn solve_impl(
    p: &ConeProgram,
    settings: &SolverSettings,
    mut trace: Option<&mut dyn Write>,
) -> Result<ConicSolution, SolverError> {
    settings.validate()?;
    let prob = match internalize(p)? {
        Ok(prob) => prob,
        Err(status) => {
            return Ok(ConicSolution {
                x: vec![0.0; p.num_vars],
                y: vec![0.0; p.num_rows()],
                s: vec![0.0; p.num_vars],
                status,
                iterations: 0,
                objective: 0.0,
                gap: f64::INFINITY,
                primal_residual: f64::INFINITY,
                dual_residual: f64::INFINITY,
            })
        }
    };
    let (n, m) = (prob.n, prob.m);
    let nu = prob.degree();

    let mut it = Iterate {
        x: vec![0.0; n],
        y: vec![0.0; prob.a.rows()],
        z: vec![0.0; m],
    };
    // Identity elements scaled to the data; free variables start at zero.
    let x_scale = 1.0 + norm_inf(&prob.b);
    let z_scale = 1.0 + norm_inf(&prob.c);
    for blk in &prob.blocks {
        blk.set_identity(&mut it.x, x_scale);
        blk.set_identity(&mut it.z, z_scale);
    }

    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;
    let mut history: Vec<f64> = Vec::new();
    let (mut last_step, mut last_sigma) = (0.0, 0.0);
    let mut meas = prob.measure(&it);

    for iter in 0..=settings.max_iters {
        iterations = iter;
        meas = prob.measure(&it);
        if let Some(w) = trace.as_deref_mut() {
            let _ = writeln!(
                w,
                "iter={iter} pobj={:.9e} dobj={:.9e} gap={:.3e} comp={:.3e} pres={:.3e} dres={:.3e} step={:.3e} sigma={:.3e}",
                meas.pobj, meas.dobj, meas.gap, meas.rel_comp, meas.pres, meas.dres, last_step, last_sigma
            );
        }
        if ![meas.pobj, meas.dobj, meas.gap, meas.pres, meas.dres]
            .iter()
            .all(|v| v.is_finite())
        {
            status = SolveStatus::Numerical;
            break;
        }
        if meas.pres <= settings.tol_primal && meas.dres <= settings.tol_dual && meas.rel_gap <= settings.tol_gap {
            status = SolveStatus::Optimal;
            break;
        }
        let (cert_p, cert_d) = prob.certificate_ratios(&it);
        if cert_p <= settings.tol_primal {
            status = SolveStatus::Infeasible;
            break;
        }
        if cert_d <= settings.tol_dual {
            status = SolveStatus::Unbounded;
            break;
        }
        let merit = meas.pres.max(meas.dres).max(meas.rel_gap);
        history.push(merit);
        if history.len() > STALL_WINDOW {
            let past = history[history.len() - 1 - STALL_WINDOW];
            if merit > (1.0 - STALL_PROGRESS) * past {
                if cert_p <= STALL_CERT_TOL {
                    status = SolveStatus::Infeasible;
                    break;
                }
                if cert_d <= STALL_CERT_TOL {
                    status = SolveStatus::Unbounded;
                    break;
                }
            }
        }
        if iter == settings.max_iters {
            break;
        }

        let scalings: Option<Vec<Scaling>> = prob
            .blocks
            .iter()
            .map(|blk| Scaling::compute(blk.kind, &it.x[blk.range()], &it.z[blk.range()]))
            .collect();
        let Some(scalings) = scalings else {
            status = SolveStatus::Numerical;
            break;
        };
        let mut lambda = vec![0.0; m];
        for (blk, sc) in prob.blocks.iter().zip(&scalings) {
            sc.apply(&it.z[blk.range()], &mut lambda[blk.range()]);
        }
        let Some(newton) = Newton::new(&prob, &scalings, &lambda, settings.regularization) else {
            status = SolveStatus::Numerical;
            break;
        };

        // Predictor.
        let mut lam_sq = vec![0.0; m];
        for blk in &prob.blocks {
            let r = blk.range();
            jordan_product(blk.kind, &lambda[r.clone()], &lambda[r.clone()], &mut lam_sq[r]);
        }
        let d_aff: Vec<f64> = lam_sq.iter().map(|v| -v).collect();
        let aff = newton.direction(&meas, &d_aff);
        let step_aff = prob
            .max_step(&it.x[..m], &aff.dx[..m])
            .min(prob.max_step(&it.z, &aff.dz))
            .min(1.0);
        let mu = meas.gap / nu;
        let mu_aff = {
            let xa: Vec<f64> = (0..m).map(|k| it.x[k] + step_aff * aff.dx[k]).collect();
            let za: Vec<f64> = (0..m).map(|k| it.z[k] + step_aff * aff.dz[k]).collect();
            dot(&xa, &za) / nu
        };
        let sigma = if mu > 0.0 {
            (mu_aff / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        // Corrector: d = -λ∘λ - (W⁻¹Δx_a)∘(WΔz_a) + σμe.
        let mut d = d_aff;
        let mut sdx = vec![0.0; m];
        let mut sdz = vec![0.0; m];
        let mut prod = vec![0.0; m];
        let mut e = vec![0.0; m];
        for (blk, sc) in prob.blocks.iter().zip(&scalings) {
            let r = blk.range();
            sc.apply_inv(&aff.dx[r.clone()], &mut sdx[r.clone()]);
            sc.apply(&aff.dz[r.clone()], &mut sdz[r.clone()]);
            jordan_product(blk.kind, &sdx[r.clone()], &sdz[r.clone()], &mut prod[r.clone()]);
            blk.set_identity(&mut e, 1.0);
        }
        for k in 0..m {
            d[k] += -prod[k] + sigma * mu * e[k];
        }
        let dir = newton.direction(&meas, &d);
        let step_max = prob
            .max_step(&it.x[..m], &dir.dx[..m])
            .min(prob.max_step(&it.z, &dir.dz));
        let step = (settings.step_fraction * step_max).min(1.0);
        if !(step > MIN_STEP) {
            status = SolveStatus::Numerical;
            break;
        }
        for (x, d) in it.x.iter_mut().zip(&dir.dx) {
            *x += step * d;
        }
        for (y, d) in it.y.iter_mut().zip(&dir.dy) {
            *y += step * d;
        }
        for (z, d) in it.z.iter_mut().zip(&dir.dz) {
            *z += step * d;
        }
        last_step = step;
        last_sigma = sigma;
    }

    if status == SolveStatus::Optimal {
        it = polish::polish(&prob, &it);
        meas = prob.measure(&it);
    }
    Ok(externalize(&prob, p, &it, &meas, status, iterations))
}

fn externalize(
    prob: &Internal,
    p: &ConeProgram,
    it: &Iterate,
    meas: &Measures,
    status: SolveStatus,
    iterations: usize,
) -> ConicSolution {
    let mut xi = it.x.clone();
    let mut si = it.z.clone();
    si.resize(prob.n, 0.0);
    for &pair in &prob.rotated {
        rotate_pair(&mut xi, pair);
        rotate_pair(&mut si, pair);
    }
    let mut x = vec![0.0; p.num_vars];
    let mut s = vec![0.0; p.num_vars];
    for (j, &orig) in prob.perm.iter().enumerate() {
        x[orig] = xi[j];
        s[orig] = si[j];
    }
    let mut y = vec![0.0; p.num_rows()];
    for (ri, &r) in prob.rows.iter().enumerate() {
        y[r] = it.y[ri];
    }
    ConicSolution {
        objective: p.objective_value(&x),
        x,
        y,
        s,
        status,
        iterations,
        gap: meas.rel_gap,
        primal_residual: meas.pres,
        dual_residual: meas.dres,
    }
}

/// Residuals recomputed from a solution and the original program data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `max(|cᵀx - bᵀy|, |xᵀs|)`.
    pub gap: f64,
    /// `max(‖Ax - b‖∞, cone violation of x)`.
    pub primal: f64,
    /// `max(‖c - Aᵀy - s‖∞, cone violation of s, ‖s_free‖∞)`.
    pub dual: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.gap.max(self.primal).max(self.dual)
    }
}

/// Recomputes gap and residuals of `sol` against `p`, independently of the solver.
pub fn kkt_residuals(p: &ConeProgram, sol: &ConicSolution) -> Result<KktResiduals, SolverError> {
    let n = p.num_vars;
    if sol.x.len() != n || sol.s.len() != n || sol.y.len() != p.num_rows() || p.objective.len() != n {
        return Err(SolverError::ShapeMismatch(format!(
            "solution sizes (x {}, y {}, s {}) do not match program ({} vars, {} rows)",
            sol.x.len(),
            sol.y.len(),
            sol.s.len(),
            n,
            p.num_rows()
        )));
    }
    let ax = p.eq_a.mul_vec(&sol.x);
    let mut primal = ax.iter().zip(&p.eq_b).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let aty = p.eq_a.transpose_mul_vec(&sol.y);
    let mut dual = (0..n).fold(0.0_f64, |m, i| m.max((p.objective[i] - aty[i] - sol.s[i]).abs()));
    for cone in &p.cones {
        primal = primal.max(cone_violation(cone.kind, &cone.gather(&sol.x)));
        dual = dual.max(cone_violation(cone.kind, &cone.gather(&sol.s)));
    }
    for &i in &p.free_vars {
        dual = dual.max(sol.s[i].abs());
    }
    let duality = (dot(&p.objective, &sol.x) - dot(&p.eq_b, &sol.y)).abs();
    let comp = dot(&sol.x, &sol.s).abs();
    Ok(KktResiduals {
        gap: duality.max(comp),
        primal,
        dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ProgramBuilder;

    fn optimal(p: &ConeProgram) -> ConicSolution {
        let sol = solve(p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "{sol:?}");
        sol
    }

    #[test]
    fn orthant_lp_corner() {
        let mut b = ProgramBuilder::new();
        let x = b.add_vars(1).start;
        b.set_cost(x, 1.0);
        b.add_cone(ConeKind::NonnegOrthant, vec![x]);
        let p = b.build().unwrap();
        let sol = optimal(&p);
        assert!(sol.x[0].abs() < 1e-7);
        assert!(sol.objective.abs() < 1e-7);
    }

    /// min t s.t. (t, v) ∈ Q³, v = x - a.
    fn norm_program(pin_x: bool) -> ConeProgram {
        let mut b = ProgramBuilder::new();
        let t = b.add_vars(1).start;
        let v = b.add_vars(2);
        let x = b.add_vars(2);
        b.set_cost(t, 1.0);
        let a = [3.0, 4.0];
        for k in 0..2 {
            b.add_eq(&[(v.start + k, 1.0), (x.start + k, -1.0)], -a[k]);
            if pin_x {
                b.add_eq(&[(x.start + k, 1.0)], 0.0);
            }
        }
        b.add_cone(ConeKind::Quadratic, vec![t, v.start, v.start + 1]);
        b.mark_free(x);
        b.build().unwrap()
    }

    #[test]
    fn euclidean_norm_free() {
        let sol = optimal(&norm_program(false));
        assert!(sol.x[0].abs() < 1e-6);
        assert!((sol.x[3] - 3.0).abs() < 1e-6 && (sol.x[4] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn euclidean_norm_pinned() {
        let sol = optimal(&norm_program(true));
        assert!((sol.x[0] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn rotated_cone_bound() {
        // min a + b s.t. (a, b, 2) ∈ K_r  → 2ab ≥ 4, a = b = √2.
        let mut b = ProgramBuilder::new();
        let v = b.add_vars(3);
        b.set_cost(0, 1.0);
        b.set_cost(1, 1.0);
        b.add_eq(&[(2, 1.0)], 2.0);
        b.add_cone(ConeKind::RotatedQuadratic, v.collect());
        let p = b.build().unwrap();
        let sol = optimal(&p);
        assert!((sol.x[0] - 2f64.sqrt()).abs() < 1e-6);
        assert!((sol.x[1] - 2f64.sqrt()).abs() < 1e-6);
        let r = kkt_residuals(&p, &sol).unwrap();
        assert!(r.max() < 1e-6, "{r:?}");
    }

    #[test]
    fn infeasible_detected() {
        let mut b = ProgramBuilder::new();
        let x = b.add_vars(1).start;
        b.add_eq(&[(x, 1.0)], -1.0);
        b.add_cone(ConeKind::NonnegOrthant, vec![x]);
        let sol = solve(&b.build().unwrap(), &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        // min -x, x ≥ 0
        let mut b = ProgramBuilder::new();
        let x = b.add_vars(1).start;
        b.set_cost(x, -1.0);
        b.add_cone(ConeKind::NonnegOrthant, vec![x]);
        let sol = solve(&b.build().unwrap(), &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn empty_row_with_nonzero_rhs_is_infeasible() {
        let mut b = ProgramBuilder::new();
        let x = b.add_vars(1).start;
        b.add_eq(&[], 1.0);
        b.add_cone(ConeKind::NonnegOrthant, vec![x]);
        let sol = solve(&b.build().unwrap(), &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn malformed_program_rejected() {
        let mut p = norm_program(false);
        p.free_vars.push(0);
        assert!(matches!(
            solve(&p, &SolverSettings::default()),
            Err(SolverError::MalformedProgram(_))
        ));
    }

    #[test]
    fn iteration_limit_reported() {
        let settings = SolverSettings {
            max_iters: 2,
            ..SolverSettings::default()
        };
        let sol = solve(&norm_program(true), &settings).unwrap();
        assert_eq!(sol.status, SolveStatus::MaxIters);
        assert_eq!(sol.iterations, 2);
    }

    #[test]
    fn trace_emits_one_line_per_iteration() {
        let mut buf = Vec::new();
        let sol = solve_traced(&norm_program(true), &SolverSettings::default(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), sol.iterations + 1);
        assert!(text.lines().all(|l| l.starts_with("iter=") && l.contains(" gap=")));
    }

    #[test]
    fn residuals_of_exact_orthant_optimum() {
        let mut b = ProgramBuilder::new();
        let x = b.add_vars(1).start;
        b.set_cost(x, 1.0);
        b.add_cone(ConeKind::NonnegOrthant, vec![x]);
        let p = b.build().unwrap();
        let exact = ConicSolution {
            x: vec![0.0],
            y: vec![],
            s: vec![1.0],
            status: SolveStatus::Optimal,
            iterations: 0,
            objective: 0.0,
            gap: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
        };
        let r = kkt_residuals(&p, &exact).unwrap();
        assert!(r.gap <= 1e-12 && r.primal <= 1e-12 && r.dual <= 1e-12);
    }

    #[test]
    fn residuals_respond_to_perturbation() {
        let p = norm_program(true);
        let mut sol = optimal(&p);
        // x[3] enters row "x_0 = 0" with unit coefficient.
        sol.x[3] += 1e-3;
        let r = kkt_residuals(&p, &sol).unwrap();
        assert!(r.primal >= 9e-4);
        sol.y.pop();
        assert!(matches!(kkt_residuals(&p, &sol), Err(SolverError::ShapeMismatch(_))));
    }

    #[test]
    fn settings_validated() {
        let bad = SolverSettings {
            step_fraction: 1.0,
            ..SolverSettings::default()
        };
        assert!(solve(&norm_program(false), &bad).is_err());
    }

    #[test]
    fn deterministic() {
        let p = norm_program(false);
        let a = solve(&p, &SolverSettings::default()).unwrap();
        let b = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(a, b);
    }
}
