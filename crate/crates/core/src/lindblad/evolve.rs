//! Density-matrix evolution under a [`LindbladModel`].

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, I};
use crate::operators::{
    check_dim, BasisConfig, DensityMatrix, FockOperator, DENSITY_HERMITIAN_TOL, DENSITY_PSD_TOL, DENSITY_TRACE_TOL,
};
use crate::rk4;

use super::{Dissipator, LindbladModel};

/// Hard positivity floor; values between this and the density tolerance only
/// mark the run as failed.
pub const POSITIVITY_ABORT: f64 = -1e-6;

/// Entries below this magnitude are set to zero after each step. Far-tail
/// coherences otherwise decay into the subnormal range, where floating-point
/// arithmetic is two orders of magnitude slower; the change to any expectation
/// is below `dim^2` times this floor.
pub const UNDERFLOW_FLOOR: f64 = 1e-200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDiagnostics {
    pub trace: f64,
    pub herm_dev: f64,
    pub min_eig: f64,
    pub tail_pop: f64,
}

impl StateDiagnostics {
    /// The first tolerance this sample violates.
    pub fn violation(&self) -> Option<String> {
        if (self.trace - 1.0).abs() > DENSITY_TRACE_TOL {
            Some(format!("trace drift {:e}", self.trace - 1.0))
        } else if self.herm_dev > DENSITY_HERMITIAN_TOL {
            Some(format!("hermiticity deviation {:e}", self.herm_dev))
        } else if self.min_eig < DENSITY_PSD_TOL {
            Some(format!("min eigenvalue {:e}", self.min_eig))
        } else {
            None
        }
    }
}

/// `(trace, herm_dev, min_eig, tail_pop)` of a density matrix.
pub fn state_diagnostics(rho: &DensityMatrix, cfg: &BasisConfig) -> Result<StateDiagnostics> {
    check_dim(cfg.dim, rho.dim())?;
    Ok(matrix_diagnostics(rho.matrix(), cfg))
}

fn matrix_diagnostics(m: &CMatrix, cfg: &BasisConfig) -> StateDiagnostics {
    let n = m.nrows();
    let tail = cfg.tail_levels();
    StateDiagnostics {
        trace: linalg::trace(m).re,
        herm_dev: linalg::hermiticity_deviation(m),
        min_eig: linalg::hermitian_eigenvalues(m)[0],
        tail_pop: (n - tail..n).map(|k| m[(k, k)].re).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub t_max: f64,
    pub h: f64,
    pub record_every: usize,
    /// Replace the state by its Hermitian part after every step.
    pub resymmetrize: bool,
}

impl EvolveOptions {
    pub fn new(t_max: f64, h: f64, record_every: usize) -> Self {
        EvolveOptions { t_max, h, record_every, resymmetrize: false }
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.t_max > 0.0) || self.record_every == 0 {
            return Err(Error::config(format!(
                "need h > 0, t_max > 0 and record_every >= 1 (got {}, {}, {})",
                self.h, self.t_max, self.record_every
            )));
        }
        Ok(())
    }
}

/// Recorded states with per-sample diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub diagnostics: Vec<StateDiagnostics>,
    /// First recorded time at which a density tolerance was violated.
    pub first_violation: Option<(f64, String)>,
    /// The step actually used (`t_max` divided by the step count).
    pub step: f64,
}

impl Trajectory {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }

    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory has at least one sample")
    }
}

struct Channel {
    alpha: f64,
    l: FockOperator,
    ld: FockOperator,
    ldl: FockOperator,
}

/// Operators of a model frozen at one time.
pub(crate) struct StageOps {
    h: FockOperator,
    channels: Vec<Channel>,
}

impl StageOps {
    pub(crate) fn at(model: &dyn LindbladModel, t: f64) -> Result<Self> {
        Self::from_parts(model.hamiltonian_at(t)?, model.dissipators_at(t)?, t)
    }

    pub(crate) fn from_parts(h: FockOperator, dissipators: Vec<Dissipator>, t: f64) -> Result<Self> {
        let mut channels = Vec::new();
        for d in dissipators {
            if d.alpha < 0.0 {
                return Err(Error::NegativeFriction { t, value: d.alpha });
            }
            let ld = d.op.adjoint();
            let ldl = ld.product(&d.op);
            channels.push(Channel { alpha: d.alpha, l: d.op, ld, ldl });
        }
        Ok(StageOps { h, channels })
    }

    /// `-i[H, rho] - sum alpha (L^dag L rho + rho L^dag L - 2 L rho L^dag)`
    pub(crate) fn forward(&self, rho: &CMatrix) -> CMatrix {
        let mut out = self.h.commutator(rho) * (-I);
        for c in &self.channels {
            if c.l.is_hermitian() {
                let inner = c.l.commutator(rho);
                out -= c.l.commutator(&inner).scale(c.alpha);
            } else {
                let lrl = c.ld.mul_right(&c.l.mul_left(rho));
                out -= (c.ldl.mul_left(rho) + c.ldl.mul_right(rho) - lrl.scale(2.0)).scale(c.alpha);
            }
        }
        out
    }

    /// [`Self::forward`] for an exactly Hermitian `rho`, using `[A, rho] = A rho - (A rho)^dag`
    /// for Hermitian `A` and `[L, X] = L X + (L X)^dag` for anti-Hermitian `X`.
    /// The result is exactly Hermitian, so the property is kept along RK4 stages.
    pub(crate) fn forward_hermitian(&self, rho: &CMatrix) -> CMatrix {
        let a = self.h.mul_left(rho);
        let mut out = (&a - a.adjoint()) * (-I);
        for c in &self.channels {
            if c.l.is_hermitian() {
                let lr = c.l.mul_left(rho);
                let x = &lr - lr.adjoint();
                let lx = c.l.mul_left(&x);
                out -= (&lx + lx.adjoint()).scale(c.alpha);
            } else {
                let lrl = c.ld.mul_right(&c.l.mul_left(rho));
                out -= (c.ldl.mul_left(rho) + c.ldl.mul_right(rho) - lrl.scale(2.0)).scale(c.alpha);
            }
        }
        out
    }

    /// `-i[H, Q] + sum alpha (L^dag L Q + Q L^dag L - 2 L^dag Q L)`
    pub(crate) fn adjoint(&self, q: &CMatrix) -> CMatrix {
        let mut out = self.h.commutator(q) * (-I);
        for c in &self.channels {
            if c.l.is_hermitian() {
                let inner = c.l.commutator(q);
                out += c.l.commutator(&inner).scale(c.alpha);
            } else {
                let lql = c.l.mul_right(&c.ld.mul_left(q));
                out += (c.ldl.mul_left(q) + c.ldl.mul_right(q) - lql.scale(2.0)).scale(c.alpha);
            }
        }
        out
    }

    /// `sum alpha (L^dag L Q + Q L^dag L - 2 L^dag Q L)` alone.
    pub(crate) fn dissipative_adjoint(&self, q: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(q.nrows(), q.ncols());
        for c in &self.channels {
            let lql = c.l.mul_right(&c.ld.mul_left(q));
            out += (c.ldl.mul_left(q) + c.ldl.mul_right(q) - lql.scale(2.0)).scale(c.alpha);
        }
        out
    }

    pub(crate) fn hamiltonian(&self) -> &FockOperator {
        &self.h
    }
}

/// Memoizes stage operators; an RK4 step evaluates `t + h/2` twice and the
/// next step starts where this one ended.
pub(crate) struct StageCache<'a> {
    model: &'a dyn LindbladModel,
    entries: Vec<(f64, Rc<StageOps>)>,
}

impl<'a> StageCache<'a> {
    pub(crate) fn new(model: &'a dyn LindbladModel) -> Self {
        StageCache { model, entries: Vec::with_capacity(3) }
    }

    pub(crate) fn get(&mut self, t: f64) -> Result<Rc<StageOps>> {
        if let Some((_, ops)) = self.entries.iter().find(|(s, _)| *s == t) {
            return Ok(Rc::clone(ops));
        }
        let ops = Rc::new(StageOps::at(self.model, t)?);
        if self.entries.len() == 3 {
            self.entries.remove(0);
        }
        self.entries.push((t, Rc::clone(&ops)));
        Ok(ops)
    }
}

/// Right-hand side of the master equation at `t`.
pub fn lindblad_rhs(model: &dyn LindbladModel, t: f64, rho: &CMatrix) -> Result<CMatrix> {
    Ok(StageOps::at(model, t)?.forward(rho))
}

/// Right-hand side of the adjoint (observable) equation at `t`.
pub fn adjoint_rhs(model: &dyn LindbladModel, t: f64, q: &CMatrix) -> Result<CMatrix> {
    Ok(StageOps::at(model, t)?.adjoint(q))
}

pub fn evolve_density(
    model: &dyn LindbladModel,
    rho0: &DensityMatrix,
    t_max: f64,
    h: f64,
    record_every: usize,
) -> Result<Trajectory> {
    evolve_density_with(model, rho0, &EvolveOptions::new(t_max, h, record_every))
}

/// Fixed-step RK4 on the master equation, no renormalization. Diagnostics are
/// taken every `record_every` steps and at the final time.
pub fn evolve_density_with(model: &dyn LindbladModel, rho0: &DensityMatrix, opts: &EvolveOptions) -> Result<Trajectory> {
    opts.validate()?;
    let cfg = *model.basis();
    check_dim(cfg.dim, rho0.dim())?;
    let n = rk4::step_count(opts.t_max, opts.h);
    let h = opts.t_max / n as f64;

    let mut traj =
        Trajectory { times: Vec::new(), states: Vec::new(), diagnostics: Vec::new(), first_violation: None, step: h };
    let mut rho = rho0.matrix().clone();
    record(&mut traj, 0.0, &rho, &cfg)?;

    // Hermitian inputs stay exactly Hermitian under the fast right-hand side.
    let exact = linalg::hermiticity_deviation(&rho) == 0.0;
    let mut cache = StageCache::new(model);
    for k in 0..n {
        let t = k as f64 * h;
        rho = rk4::step(t, &rho, h, |s, y: &CMatrix| {
            let ops = cache.get(s)?;
            Ok(if exact { ops.forward_hermitian(y) } else { ops.forward(y) })
        })?;
        if !rk4::OdeState::is_finite(&rho) {
            return Err(Error::NonFinite { t: t + h });
        }
        if opts.resymmetrize {
            rho = linalg::hermitian_part(&rho);
        }
        flush_tiny(&mut rho);
        if (k + 1) % opts.record_every == 0 || k + 1 == n {
            record(&mut traj, (k + 1) as f64 * h, &rho, &cfg)?;
        }
    }
    Ok(traj)
}

fn flush_tiny(m: &mut CMatrix) {
    for z in m.iter_mut() {
        if z.re.abs() < UNDERFLOW_FLOOR {
            z.re = 0.0;
        }
        if z.im.abs() < UNDERFLOW_FLOOR {
            z.im = 0.0;
        }
    }
}

fn record(traj: &mut Trajectory, t: f64, rho: &CMatrix, cfg: &BasisConfig) -> Result<()> {
    let d = matrix_diagnostics(rho, cfg);
    if d.tail_pop > cfg.tail_threshold {
        return Err(Error::TruncationLeak { t, tail: d.tail_pop, threshold: cfg.tail_threshold });
    }
    if d.min_eig < POSITIVITY_ABORT {
        return Err(Error::PositivityLoss { t, min_eig: d.min_eig });
    }
    if traj.first_violation.is_none() {
        if let Some(msg) = d.violation() {
            traj.first_violation = Some((t, msg));
        }
    }
    traj.times.push(t);
    traj.states.push(DensityMatrix::from_unchecked(rho.clone()));
    traj.diagnostics.push(d);
    Ok(())
}

/// `tr[Q rho]` for every recorded state (real part).
pub fn expectation_track(traj: &Trajectory, q: &FockOperator) -> Result<Vec<f64>> {
    traj.states
        .iter()
        .map(|s| {
            check_dim(q.dim(), s.dim())?;
            Ok(linalg::trace_of_product(q.matrix(), s.matrix()).re)
        })
        .collect()
}
