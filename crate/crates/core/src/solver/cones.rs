//! Jordan-algebra operations and Nesterov–Todd scalings for the orthant and
//! the second-order cone.
//!
//! For a primal/dual pair `(x, z)` in the interior, the scaling `W` is
//! symmetric positive definite with `W z = W⁻¹ x = λ`.

use crate::numeric::{dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Orthant,
    Soc,
}

/// A contiguous slice of the internal cone vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub kind: BlockKind,
    pub start: usize,
    pub dim: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.dim
    }

    /// Barrier degree contribution.
    pub fn degree(&self) -> usize {
        match self.kind {
            BlockKind::Orthant => self.dim,
            BlockKind::Soc => 1,
        }
    }

    /// Writes the identity element into `v`, scaled.
    pub fn set_identity(&self, v: &mut [f64], scale: f64) {
        let r = &mut v[self.range()];
        match self.kind {
            BlockKind::Orthant => r.iter_mut().for_each(|e| *e = scale),
            BlockKind::Soc => {
                r.iter_mut().for_each(|e| *e = 0.0);
                r[0] = scale;
            }
        }
    }
}

/// `xᵀJx` for the Lorentz metric `J = diag(1, -I)`.
#[inline]
fn soc_det(v: &[f64]) -> f64 {
    let t = norm2(&v[1..]);
    (v[0] - t) * (v[0] + t)
}

/// Jordan product `u ∘ v`.
pub fn jordan_product(kind: BlockKind, u: &[f64], v: &[f64], out: &mut [f64]) {
    match kind {
        BlockKind::Orthant => {
            for ((o, a), b) in out.iter_mut().zip(u).zip(v) {
                *o = a * b;
            }
        }
        BlockKind::Soc => {
            out[0] = dot(u, v);
            for k in 1..u.len() {
                out[k] = u[0] * v[k] + v[0] * u[k];
            }
        }
    }
}

/// Solves `λ ∘ u = d` for `u`.
pub fn jordan_divide(kind: BlockKind, lambda: &[f64], d: &[f64], out: &mut [f64]) {
    match kind {
        BlockKind::Orthant => {
            for ((o, l), b) in out.iter_mut().zip(lambda).zip(d) {
                *o = b / l;
            }
        }
        BlockKind::Soc => {
            let rho = soc_det(lambda);
            let l0 = lambda[0];
            let u0 = (l0 * d[0] - dot(&lambda[1..], &d[1..])) / rho;
            out[0] = u0;
            for k in 1..lambda.len() {
                out[k] = (d[k] - u0 * lambda[k]) / l0;
            }
        }
    }
}

/// Largest `α ≥ 0` (capped at `cap`) with `u + α d` in the cone, for interior `u`.
pub fn max_step(kind: BlockKind, u: &[f64], d: &[f64], cap: f64) -> f64 {
    match kind {
        BlockKind::Orthant => {
            let mut a = cap;
            for (&ui, &di) in u.iter().zip(d) {
                if di < 0.0 {
                    a = a.min(-ui / di);
                }
            }
            a
        }
        BlockKind::Soc => {
            // (u0 + α d0)² - ‖u1 + α d1‖² = qa α² + qb α + qc, with u0 + α d0 ≥ 0.
            let qa = soc_det(d);
            let qb = 2.0 * (u[0] * d[0] - dot(&u[1..], &d[1..]));
            let qc = soc_det(u).max(0.0);
            let mut a = cap;
            if d[0] < 0.0 {
                a = a.min(-u[0] / d[0]);
            }
            let scale = qa.abs().max(qb.abs()).max(qc.abs());
            if scale == 0.0 {
                return a;
            }
            if qa.abs() <= 1e-14 * scale {
                if qb < 0.0 {
                    a = a.min(-qc / qb);
                }
                return a.max(0.0);
            }
            let disc = qb * qb - 4.0 * qa * qc;
            if disc < 0.0 {
                return a.max(0.0);
            }
            let sq = disc.sqrt();
            let q = -0.5 * (qb + qb.signum() * sq);
            let mut roots = [f64::INFINITY; 2];
            if q != 0.0 {
                roots[0] = q / qa;
                roots[1] = qc / q;
            } else {
                roots[0] = 0.0;
            }
            for r in roots {
                if r > 0.0 {
                    a = a.min(r);
                }
            }
            a.max(0.0)
        }
    }
}

/// Nesterov–Todd scaling of one block.
#[derive(Debug, Clone)]
pub enum Scaling {
    /// `W = diag(w)`.
    Orthant { w: Vec<f64> },
    /// `W = η W̄`, `W̄ = [w̄₀, w̄₁ᵀ; w̄₁, I + w̄₁w̄₁ᵀ/(1 + w̄₀)]`.
    Soc { eta: f64, wbar: Vec<f64> },
}

impl Scaling {
    /// Returns `None` if either point has left the interior.
    pub fn compute(kind: BlockKind, x: &[f64], z: &[f64]) -> Option<Scaling> {
        match kind {
            BlockKind::Orthant => {
                let w = x
                    .iter()
                    .zip(z)
                    .map(|(&a, &b)| if a > 0.0 && b > 0.0 { Some((a / b).sqrt()) } else { None })
                    .collect::<Option<Vec<f64>>>()?;
                Some(Scaling::Orthant { w })
            }
            BlockKind::Soc => {
                let xd = soc_det(x);
                let zd = soc_det(z);
                if !(xd > 0.0 && zd > 0.0 && x[0] > 0.0 && z[0] > 0.0) {
                    return None;
                }
                let (xn, zn) = (xd.sqrt(), zd.sqrt());
                let xb: Vec<f64> = x.iter().map(|v| v / xn).collect();
                let zb: Vec<f64> = z.iter().map(|v| v / zn).collect();
                let gamma = ((1.0 + dot(&xb, &zb)) / 2.0).sqrt();
                let mut wbar = Vec::with_capacity(x.len());
                wbar.push((xb[0] + zb[0]) / (2.0 * gamma));
                for k in 1..x.len() {
                    wbar.push((xb[k] - zb[k]) / (2.0 * gamma));
                }
                // Renormalize so that w̄ᵀJw̄ = 1 exactly: w̄₀ = sqrt(1 + ‖w̄₁‖²).
                wbar[0] = (1.0 + dot(&wbar[1..], &wbar[1..])).sqrt();
                let eta = (xd / zd).sqrt().sqrt();
                Some(Scaling::Soc { eta, wbar })
            }
        }
    }

    /// `out = W v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Orthant { w } => {
                for ((o, wi), vi) in out.iter_mut().zip(w).zip(v) {
                    *o = wi * vi;
                }
            }
            Scaling::Soc { eta, wbar } => soc_apply(*eta, wbar, v, out, false),
        }
    }

    /// `out = W⁻¹ v`.
    pub fn apply_inv(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Orthant { w } => {
                for ((o, wi), vi) in out.iter_mut().zip(w).zip(v) {
                    *o = vi / wi;
                }
            }
            Scaling::Soc { eta, wbar } => soc_apply(1.0 / eta, wbar, v, out, true),
        }
    }

    /// Adds `W⁻²` (the block of `H`) into the dense matrix `k` at `(offset, offset)`.
    pub fn add_inv_square(&self, k: &mut crate::numeric::DenseMatrix, offset: usize) {
        match self {
            Scaling::Orthant { w } => {
                for (i, wi) in w.iter().enumerate() {
                    k[(offset + i, offset + i)] += 1.0 / (wi * wi);
                }
            }
            Scaling::Soc { eta, wbar } => {
                // W⁻² = (2 ŵŵᵀ - J)/η² with ŵ = J w̄.
                let s = 1.0 / (eta * eta);
                let n = wbar.len();
                let hat = |i: usize| if i == 0 { wbar[0] } else { -wbar[i] };
                for i in 0..n {
                    for j in 0..n {
                        let mut v = 2.0 * hat(i) * hat(j);
                        if i == j {
                            v += if i == 0 { -1.0 } else { 1.0 };
                        }
                        k[(offset + i, offset + j)] += s * v;
                    }
                }
            }
        }
    }
}

/// `out = scale · W̄ v` (or `scale · W̄⁻¹ v` when `inverse`, using `W̄⁻¹ = J W̄ J`).
fn soc_apply(scale: f64, wbar: &[f64], v: &[f64], out: &mut [f64], inverse: bool) {
    let sign = if inverse { -1.0 } else { 1.0 };
    let w0 = wbar[0];
    let w1 = &wbar[1..];
    let v1 = &v[1..];
    let w1v1 = dot(w1, v1);
    out[0] = scale * (w0 * v[0] + sign * w1v1);
    let coef = sign * v[0] + w1v1 / (1.0 + w0);
    for k in 1..v.len() {
        out[k] = scale * (v[k] + coef * wbar[k]);
    }
}
