//! Observable evolution under the adjoint equation
//! `dQ/dt = -i[H, Q] + sum alpha (L^dag L Q + Q L^dag L - 2 L^dag Q L)`.
//!
//! Integrating this equation entry by entry in a truncated Fock basis is
//! ill-posed: for Hermitian `L` the dissipative part is `+alpha [L,[L,Q]]`,
//! which amplifies high-level coherences at rates up to `alpha (Delta l)^2`
//! and overflows within a unit of time. When `H` and every `L` are at most
//! quadratic in `x, p`, the span of `{1, x, p, K1, K2, K3}` is invariant, so
//! observables in that span are evolved exactly through their six real
//! coordinates. The 6x6 generator is read off the model by applying the
//! adjoint map to each basis element on a small top-left block and fitting
//! the result away from the block edge; a poor fit means the model leaves the
//! quadratic algebra and is reported as such.

use nalgebra::{Matrix6, Vector6};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::operators::{check_dim, BasisConfig, FockOperator, Generators};
use crate::rk4;

use super::evolve::StageOps;
use super::{Dissipator, LindbladModel};

/// Block size used to probe the generator.
const PROBE_DIM: usize = 24;
/// Levels next to the block edge excluded from the fit.
const PROBE_MARGIN: usize = 8;
/// Relative max-norm fit residual above which closure is rejected.
const FIT_TOL: f64 = 1e-9;

/// `[1, x, p, K1, K2, K3]` at one dimension.
#[derive(Debug, Clone)]
pub struct QuadraticBasis {
    ops: [FockOperator; 6],
    region: usize,
    gram: Matrix6<f64>,
}

impl QuadraticBasis {
    /// Basis at `cfg.dim`, fitted on levels `0..region`.
    pub fn new(cfg: &BasisConfig, region: usize) -> Result<Self> {
        let g = Generators::new(cfg)?;
        let ops = [FockOperator::identity(cfg.dim), g.x, g.p, g.k1, g.k2, g.k3];
        let region = region.min(cfg.dim);
        let mut gram = Matrix6::zeros();
        for i in 0..6 {
            for j in 0..6 {
                gram[(i, j)] = inner(ops[i].matrix(), ops[j].matrix(), region);
            }
        }
        Ok(QuadraticBasis { ops, region, gram })
    }

    pub fn ops(&self) -> &[FockOperator; 6] {
        &self.ops
    }

    /// Least-squares real coordinates of `target` on the fit region and the
    /// max-norm residual there.
    pub fn fit(&self, target: &CMatrix) -> Result<([f64; 6], f64)> {
        check_dim(self.ops[0].dim(), target.nrows())?;
        let mut rhs = Vector6::zeros();
        for i in 0..6 {
            rhs[i] = inner(self.ops[i].matrix(), target, self.region);
        }
        let c = self
            .gram
            .cholesky()
            .ok_or_else(|| Error::config("quadratic basis is degenerate on the fit region"))?
            .solve(&rhs);
        let coords = [c[0], c[1], c[2], c[3], c[4], c[5]];
        let resid = linalg::interior_max_abs(&(target - self.combine(&coords).matrix()), self.region);
        Ok((coords, resid))
    }

    /// Like [`fit`](Self::fit) but rejects targets outside the span.
    pub fn decompose(&self, target: &CMatrix) -> Result<[f64; 6]> {
        let (c, resid) = self.fit(target)?;
        let scale = 1.0 + linalg::interior_max_abs(target, self.region);
        if resid > FIT_TOL * scale {
            return Err(Error::OutsideQuadraticAlgebra { residual: resid });
        }
        Ok(c)
    }

    pub fn combine(&self, c: &[f64; 6]) -> FockOperator {
        let n = self.ops[0].dim();
        let mut m = CMatrix::zeros(n, n);
        for (ci, op) in c.iter().zip(&self.ops) {
            if *ci != 0.0 {
                m += op.matrix().scale(*ci);
            }
        }
        FockOperator::from_matrix(m)
    }
}

/// `Re sum conj(a_ij) b_ij` over the top-left `k x k` block.
fn inner(a: &CMatrix, b: &CMatrix, k: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..k {
        for i in 0..k {
            acc += (a[(i, j)].conj() * b[(i, j)]).re;
        }
    }
    acc
}

fn block(op: &FockOperator, m: usize) -> FockOperator {
    FockOperator::from_matrix(op.matrix().view((0, 0), (m, m)).into_owned())
}

/// Probes the adjoint generator of a model restricted to the quadratic span.
pub struct QuadraticGenerator<'a> {
    model: &'a dyn LindbladModel,
    probe: QuadraticBasis,
    dim: usize,
}

impl<'a> QuadraticGenerator<'a> {
    pub fn new(model: &'a dyn LindbladModel) -> Result<Self> {
        let cfg = *model.basis();
        let dim = cfg.dim.min(PROBE_DIM);
        let probe_cfg = BasisConfig { dim, ..cfg };
        let probe = QuadraticBasis::new(&probe_cfg, dim.saturating_sub(PROBE_MARGIN).max(2))?;
        Ok(QuadraticGenerator { model, probe, dim })
    }

    /// `G` with `d c/dt = G c` for `Q = sum c_j B_j`.
    pub fn matrix_at(&self, t: f64) -> Result<Matrix6<f64>> {
        let h = block(&self.model.hamiltonian_at(t)?, self.dim);
        let diss = self
            .model
            .dissipators_at(t)?
            .into_iter()
            .map(|d| Dissipator { alpha: d.alpha, op: block(&d.op, self.dim) })
            .collect();
        let ops = StageOps::from_parts(h, diss, t)?;
        let mut g = Matrix6::zeros();
        for (j, b) in self.probe.ops().iter().enumerate() {
            let r = ops.adjoint(b.matrix());
            let col = self.probe.decompose(&r)?;
            for i in 0..6 {
                g[(i, j)] = col[i];
            }
        }
        Ok(g)
    }
}

/// Coordinates and reconstructed operators at the recorded times.
#[derive(Debug, Clone)]
pub struct AdjointTrajectory {
    pub times: Vec<f64>,
    pub coordinates: Vec<[f64; 6]>,
    pub operators: Vec<FockOperator>,
}

/// Evolves `q0` (which must lie in the span of `1, x, p, K1, K2, K3` on the
/// interior levels) with fixed-step RK4 on its coordinates, recording every
/// `record_every` steps and at the final time.
pub fn evolve_adjoint_observable(
    model: &dyn LindbladModel,
    q0: &FockOperator,
    t_max: f64,
    h: f64,
    record_every: usize,
) -> Result<AdjointTrajectory> {
    if !(h > 0.0 && t_max > 0.0) || record_every == 0 {
        return Err(Error::config("need h > 0, t_max > 0 and record_every >= 1"));
    }
    if !q0.is_hermitian() {
        return Err(Error::NotHermitian { deviation: q0.hermiticity_deviation() });
    }
    let cfg = *model.basis();
    check_dim(cfg.dim, q0.dim())?;
    let basis = QuadraticBasis::new(&cfg, cfg.interior_dim())?;
    let mut c = basis.decompose(q0.matrix())?;
    let gen = QuadraticGenerator::new(model)?;

    let n = rk4::step_count(t_max, h);
    let h = t_max / n as f64;
    let mut out = AdjointTrajectory { times: vec![0.0], coordinates: vec![c], operators: vec![basis.combine(&c)] };
    let mut cache: Vec<(f64, Matrix6<f64>)> = Vec::with_capacity(3);
    for k in 0..n {
        let t = k as f64 * h;
        c = rk4::step(t, &c, h, |s, y: &[f64; 6]| {
            let g = match cache.iter().find(|(u, _)| *u == s) {
                Some((_, g)) => *g,
                None => {
                    let g = gen.matrix_at(s)?;
                    if cache.len() == 3 {
                        cache.remove(0);
                    }
                    cache.push((s, g));
                    g
                }
            };
            let v = g * Vector6::from_column_slice(y);
            Ok([v[0], v[1], v[2], v[3], v[4], v[5]])
        })?;
        if !c.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: t + h });
        }
        if (k + 1) % record_every == 0 || k + 1 == n {
            out.times.push((k + 1) as f64 * h);
            out.coordinates.push(c);
            out.operators.push(basis.combine(&c));
        }
    }
    Ok(out)
}
