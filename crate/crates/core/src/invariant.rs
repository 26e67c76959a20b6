//! Closed-form invariants and the checks that define them: operator-equation
//! residuals, conserved expectations, instantaneous spectra, eigenvalue drift
//! and the coupled constraint equations of the damped construction.

use std::io::Write;

use crate::algebra::Su11;
use crate::auxiliary::{fmt_sig, ErmakovSolution};
use crate::error::{Error, Result};
use crate::lindblad::evolve::{expectation_track, StageOps};
use crate::lindblad::{Branch, Dissipator, LindbladCoefficients, LindbladModel, Trajectory};
use crate::linalg::{self, CMatrix, I};
use crate::operators::{check_dim, FockOperator, Generators};
use crate::schedule::Schedule;

/// Default central-difference half-step for time derivatives of closed forms.
pub const DEFAULT_TIME_STEP: f64 = 1e-4;
/// Default bound on the change of a paired eigenvalue between samples.
pub const DEFAULT_CONTINUITY_BOUND: f64 = 0.1;
/// Minimum spacing for an eigenvalue to count as simple.
pub const DEFAULT_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantKind {
    /// `rho^2 K1 + (rho'^2 + rho^-2) K2 - rho rho' K3` from the damped auxiliary solution.
    Weak,
    /// `((rho p - rho' x)^2 + x^2/rho^2)/2` from an undamped auxiliary solution.
    LewisRiesenfeld,
    /// `eps p - eps' x` from a classical mode.
    Linear,
}

#[derive(Debug, Clone)]
pub struct InvariantSpec {
    kind: InvariantKind,
    source: ErmakovSolution,
}

impl InvariantSpec {
    pub fn weak(sol: &ErmakovSolution) -> Self {
        InvariantSpec { kind: InvariantKind::Weak, source: sol.clone() }
    }

    pub fn lewis_riesenfeld(sol0: &ErmakovSolution) -> Self {
        InvariantSpec { kind: InvariantKind::LewisRiesenfeld, source: sol0.clone() }
    }

    pub fn linear(mode: &ErmakovSolution) -> Self {
        InvariantSpec { kind: InvariantKind::Linear, source: mode.clone() }
    }

    pub fn kind(&self) -> InvariantKind {
        self.kind
    }

    pub fn source(&self) -> &ErmakovSolution {
        &self.source
    }

    /// Strong invariants are checked against the unitary equation.
    pub fn is_strong(&self) -> bool {
        self.kind != InvariantKind::Weak
    }

    pub fn operator_at(&self, g: &Generators, t: f64) -> Result<FockOperator> {
        match self.kind {
            InvariantKind::Weak => weak_invariant_at(&self.source, &g.k1, &g.k2, &g.k3, t),
            InvariantKind::LewisRiesenfeld => lr_invariant_at(&self.source, &g.x, &g.p, t),
            InvariantKind::Linear => linear_invariant_at(&self.source, &g.x, &g.p, t),
        }
    }
}

/// Generator coordinates of the quadratic invariant; the discriminant is 1.
pub fn weak_invariant_su11(rho: f64, rhodot: f64) -> Su11 {
    Su11::new(rho * rho, rhodot * rhodot + 1.0 / (rho * rho), -rho * rhodot)
}

pub fn weak_invariant_at(
    sol: &ErmakovSolution,
    k1: &FockOperator,
    k2: &FockOperator,
    k3: &FockOperator,
    t: f64,
) -> Result<FockOperator> {
    check_dim(k1.dim(), k2.dim())?;
    check_dim(k1.dim(), k3.dim())?;
    let (r, rd, _) = sol.eval(t)?;
    let c = weak_invariant_su11(r, rd);
    FockOperator::combination(&[(c.k1, k1), (c.k2, k2), (c.k3, k3)])
}

/// Built from products of `x` and `p` rather than from the generators.
pub fn lr_invariant_at(sol0: &ErmakovSolution, x: &FockOperator, p: &FockOperator, t: f64) -> Result<FockOperator> {
    check_dim(x.dim(), p.dim())?;
    let (r, rd, _) = sol0.eval(t)?;
    let a = p.matrix().scale(r) - x.matrix().scale(rd);
    let m = (&a * &a + (x.matrix() * x.matrix()).scale(1.0 / (r * r))).scale(0.5);
    Ok(FockOperator::from_matrix(linalg::hermitian_part(&m)))
}

pub fn linear_invariant_at(mode: &ErmakovSolution, x: &FockOperator, p: &FockOperator, t: f64) -> Result<FockOperator> {
    check_dim(x.dim(), p.dim())?;
    let (e, ed, _) = mode.eval(t)?;
    if e == 0.0 && ed == 0.0 {
        return Err(Error::config(format!("linear invariant is the zero operator at t = {t} (eps = eps' = 0)")));
    }
    FockOperator::combination(&[(e, p), (-ed, x)])
}

/// Interior max-norm of `i dI/dt - [H, I] - i sum alpha (L^dag L I + I L^dag L - 2 L^dag I L)`
/// (weak) or of `i dI/dt - [H, I]` (strong); `dI/dt` by central differences
/// with half-step `h_t`.
pub fn invariant_residual(
    inv: &InvariantSpec,
    g: &Generators,
    model: &dyn LindbladModel,
    t: f64,
    h_t: f64,
) -> Result<f64> {
    if !(h_t > 0.0) {
        return Err(Error::config("time step for the residual must be positive"));
    }
    let ops = StageOps::at(model, t)?;
    let i_mid = inv.operator_at(g, t)?;
    let di = (inv.operator_at(g, t + h_t)?.into_matrix() - inv.operator_at(g, t - h_t)?.into_matrix())
        .scale(0.5 / h_t);
    let mut r = di * I - ops.hamiltonian().commutator(i_mid.matrix());
    if !inv.is_strong() {
        r -= ops.dissipative_adjoint(i_mid.matrix()) * I;
    }
    Ok(linalg::interior_max_abs(&r, model.basis().interior_dim()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `|v(t) - v(0)| / |v(0)|`
    pub rel_drift: Vec<f64>,
    pub max_rel_drift: f64,
}

impl ExpectationSeries {
    pub fn from_values(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::config("expectation series needs matching, non-empty grids"));
        }
        let v0 = values[0];
        let scale = if v0.abs() > 0.0 { v0.abs() } else { 1.0 };
        let rel_drift: Vec<f64> = values.iter().map(|v| (v - v0).abs() / scale).collect();
        let max_rel_drift = rel_drift.iter().fold(0.0_f64, |m, d| m.max(*d));
        Ok(ExpectationSeries { times, values, rel_drift, max_rel_drift })
    }

    pub fn write_csv(&self, mut w: impl Write, digits: usize) -> Result<()> {
        writeln!(w, "t,expect_I,rel_drift")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{}",
                fmt_sig(self.times[i], digits),
                fmt_sig(self.values[i], digits),
                fmt_sig(self.rel_drift[i], digits)
            )?;
        }
        Ok(())
    }
}

/// `tr[I(t) rho(t)]` along a density trajectory.
pub fn expectation_series(traj: &Trajectory, inv: &InvariantSpec, g: &Generators) -> Result<ExpectationSeries> {
    let mut values = Vec::with_capacity(traj.times.len());
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let op = inv.operator_at(g, *t)?;
        check_dim(op.dim(), s.dim())?;
        values.push(linalg::trace_of_product(op.matrix(), s.matrix()).re);
    }
    ExpectationSeries::from_values(traj.times.clone(), values)
}

/// `tr[Q_k rho_k]` for observables recorded on the same grid as the trajectory.
pub fn paired_expectations(traj: &Trajectory, times: &[f64], ops: &[FockOperator]) -> Result<ExpectationSeries> {
    if times.len() != traj.times.len() || ops.len() != times.len() {
        return Err(Error::config("observable and state grids differ in length"));
    }
    if times.iter().zip(&traj.times).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs())) {
        return Err(Error::config("observable and state grids differ"));
    }
    let values = ops
        .iter()
        .zip(&traj.states)
        .map(|(q, s)| linalg::trace_of_product(q.matrix(), s.matrix()).re)
        .collect();
    ExpectationSeries::from_values(traj.times.clone(), values)
}

/// Expectations of a fixed operator along a trajectory.
pub fn fixed_expectations(traj: &Trajectory, q: &FockOperator) -> Result<ExpectationSeries> {
    ExpectationSeries::from_values(traj.times.clone(), expectation_track(traj, q)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSeries {
    pub times: Vec<f64>,
    /// Lowest `m` eigenvalues per time, ascending.
    pub values: Vec<Vec<f64>>,
    /// Times at which some paired eigenvalue moved more than the continuity bound.
    pub pairing_flags: Vec<f64>,
}

impl SpectrumSeries {
    /// Largest `|lambda_n(t) - (n + 1/2)|` over every sample.
    pub fn max_deviation_from_ladder(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter().enumerate().map(|(n, l)| (l - (n as f64 + 0.5)).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest `|lambda_n(t) - lambda_n(t_0)|`.
    pub fn max_variation(&self) -> f64 {
        let first = &self.values[0];
        self.values
            .iter()
            .flat_map(|v| v.iter().zip(first).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, mut w: impl Write, digits: usize) -> Result<()> {
        let m = self.values.first().map_or(0, Vec::len);
        let header: Vec<String> = std::iter::once("t".to_string()).chain((0..m).map(|n| format!("lambda_{n}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for (t, v) in self.times.iter().zip(&self.values) {
            let row: Vec<String> = std::iter::once(fmt_sig(*t, digits)).chain(v.iter().map(|l| fmt_sig(*l, digits))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Lowest `m` eigenvalues of the closed-form invariant at each time.
pub fn spectrum_series(inv: &InvariantSpec, g: &Generators, times: &[f64], m: usize) -> Result<SpectrumSeries> {
    let ops = times.iter().map(|&t| inv.operator_at(g, t)).collect::<Result<Vec<_>>>()?;
    operator_spectrum_series(&ops, times, m)
}

/// Lowest `m` eigenvalues of each operator, paired by sorted order.
pub fn operator_spectrum_series(ops: &[FockOperator], times: &[f64], m: usize) -> Result<SpectrumSeries> {
    if ops.len() != times.len() || ops.is_empty() {
        return Err(Error::config("spectrum series needs one operator per time"));
    }
    let dim = ops[0].dim();
    if m == 0 || 3 * m > dim {
        return Err(Error::config(format!("requested {m} eigenvalues; at most dim/3 = {} are interior", dim / 3)));
    }
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(ops.len());
    let mut pairing_flags = Vec::new();
    for (op, t) in ops.iter().zip(times) {
        if !op.is_hermitian() {
            return Err(Error::NotHermitian { deviation: op.hermiticity_deviation() });
        }
        let low: Vec<f64> = op.eigenvalues().into_iter().take(m).collect();
        if let Some(prev) = values.last() {
            if prev.iter().zip(&low).any(|(a, b)| (a - b).abs() > DEFAULT_CONTINUITY_BOUND) {
                pairing_flags.push(*t);
            }
        }
        values.push(low);
    }
    Ok(SpectrumSeries { times: times.to_vec(), values, pairing_flags })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenDrift {
    pub index: usize,
    pub lambda: f64,
    /// `sum 2 alpha (lambda <L^dag L> - <L^dag J L>)`
    pub drift: f64,
}

/// Predicted `d lambda_n / dt` for the lowest `m` eigenpairs of `j` that are
/// simple (gap at least `DEFAULT_GAP`) and confined to levels below
/// `interior_dim` (tail weight under 1e-10).
pub fn drift_rhs(j: &FockOperator, dissipators: &[Dissipator], m: usize, interior_dim: usize) -> Result<Vec<EigenDrift>> {
    if !j.is_hermitian() {
        return Err(Error::NotHermitian { deviation: j.hermiticity_deviation() });
    }
    let (vals, vecs) = linalg::hermitian_eigen(j.matrix());
    let mut out = Vec::new();
    for n in 0..m.min(vals.len()) {
        let below = n == 0 || vals[n] - vals[n - 1] >= DEFAULT_GAP;
        let above = n + 1 == vals.len() || vals[n + 1] - vals[n] >= DEFAULT_GAP;
        let tail: f64 = vecs[n].iter().skip(interior_dim).map(|z| z.norm_sqr()).sum();
        if !(below && above) || tail > 1e-10 {
            continue;
        }
        let mut drift = 0.0;
        for d in dissipators {
            check_dim(j.dim(), d.op.dim())?;
            let lv = d.op.matrix() * &vecs[n];
            let norm = lv.norm_squared();
            let jl = linalg::quadratic_form(j.matrix(), &lv).re;
            drift += 2.0 * d.alpha * (vals[n] * norm - jl);
        }
        out.push(EigenDrift { index: n, lambda: vals[n], drift });
    }
    if out.is_empty() {
        return Err(Error::DegenerateSpectrum);
    }
    Ok(out)
}

/// Left-hand sides of the three coupled conditions on `(rho, alpha, a2, a3)`
/// with `rho''` taken from the anti-damped auxiliary equation.
pub fn constraint_residuals(
    sol: &ErmakovSolution,
    coeffs: &LindbladCoefficients,
    kappa: &Schedule,
    omega: &Schedule,
    t: f64,
) -> Result<[f64; 3]> {
    constraint_residuals_for(Branch::AntiDamped, sol, coeffs, kappa, omega, t)
}

/// As [`constraint_residuals`], with `rho''` from the auxiliary equation of `branch`.
pub fn constraint_residuals_for(
    branch: Branch,
    sol: &ErmakovSolution,
    coeffs: &LindbladCoefficients,
    kappa: &Schedule,
    omega: &Schedule,
    t: f64,
) -> Result<[f64; 3]> {
    let (r, rd, _) = sol.eval(t)?;
    let k = kappa.value(t)?;
    let w = omega.value(t)?;
    let k_aux = match branch {
        Branch::AntiDamped => k,
        Branch::Commuting => 0.0,
    };
    let rdd = k_aux * rd - w * w * r + r.powi(-3);
    let LindbladCoefficients { alpha, a2, a3, .. } = *coeffs;
    let ermakov = rdd + w * w * r - r.powi(-3);
    let q = rd * rd + 1.0 / (r * r);
    let c26 = k * r * r - alpha * (a3 * a3 * r * r + 2.0 * a3 * r * rd + q);
    let c27 = rd * ermakov + (alpha * (a2 * a2 * r * r + 2.0 * a2 * a3 * r * rd + a3 * a3 * q) - k * q);
    let c28 = r * ermakov - alpha * (a2 * a3 * r * r + 2.0 * a2 * r * rd + a3 * q);
    Ok([c26, c27, c28])
}

/// Max-norm of `A - B` on the interior block.
pub fn interior_distance(a: &FockOperator, b: &FockOperator, interior_dim: usize) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let d: CMatrix = a.matrix() - b.matrix();
    Ok(linalg::interior_max_abs(&d, interior_dim))
}
