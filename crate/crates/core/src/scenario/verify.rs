//! The check battery run by `verify`.

use std::fmt;
use std::time::Instant;

use crate::auxiliary::{self, adiabatic_tracking_error};
use crate::error::{Error, Result};
use crate::invariant::{drift_rhs, operator_spectrum_series};
use crate::lindblad::{evolve_adjoint_observable, LindbladModel};
use crate::operators::{check_su11_relations, FockOperator};
use crate::schedule::Schedule;

use super::pipeline::{self, max_constraint_residual, max_invariant_residual_of, Prepared, Simulation};
use super::{Scenario, ScheduleConfig};

pub const SU11_TOL: f64 = 1e-11;
pub const AUX_RESIDUAL_TOL: f64 = 1e-8;
pub const CONSTRAINT_TOL: f64 = 1e-9;
pub const DRIFT_TOL: f64 = 1e-8;
pub const DRIFT_FD_TOL: f64 = 1e-4;
pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const BACKEND_TOL: f64 = 1e-5;
/// Window over which the two backends are compared.
pub const BACKEND_WINDOW: f64 = 10.0;
pub const ADIABATIC_RATIO: (f64, f64) = (6.0, 10.0);
/// Time at which the drift formula is compared with finite differences.
pub const DRIFT_PROBE_TIME: f64 = 1.0;
const DRIFT_PROBE_STEP: f64 = 1e-3;
const DRIFT_PROBE_OFFSET: usize = 5;
/// Number of record times at which the drift of the invariant is evaluated.
const DRIFT_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Reported but not gating.
    Warn,
    /// Not applicable to this scenario.
    Skipped,
}

impl CheckStatus {
    pub fn label(self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Warn => "WARN",
            CheckStatus::Skipped => "SKIP",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub id: &'static str,
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub status: CheckStatus,
    pub detail: String,
}

impl CheckResult {
    /// Passes when `measured <= threshold`.
    fn at_most(id: &'static str, name: &str, measured: f64, threshold: f64) -> Self {
        let status = if measured <= threshold { CheckStatus::Pass } else { CheckStatus::Fail };
        CheckResult { id, name: name.into(), measured, threshold, status, detail: String::new() }
    }

    fn skipped(id: &'static str, name: &str, why: &str) -> Self {
        CheckResult {
            id,
            name: name.into(),
            measured: f64::NAN,
            threshold: f64::NAN,
            status: CheckStatus::Skipped,
            detail: why.into(),
        }
    }

    fn errored(id: &'static str, name: &str, e: &Error) -> Self {
        CheckResult {
            id,
            name: name.into(),
            measured: f64::NAN,
            threshold: f64::NAN,
            status: CheckStatus::Fail,
            detail: e.to_string(),
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<4} {:<4} {:<28} measured={:<12.4e} threshold={:.1e}",
            self.status.label(),
            self.id,
            self.name,
            self.measured,
            self.threshold
        )?;
        if !self.detail.is_empty() {
            write!(f, "  ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub checks: Vec<CheckResult>,
    /// True iff no check failed; warnings and skips do not gate.
    pub overall: bool,
    /// Seconds.
    pub wall_time: f64,
}

impl RunReport {
    pub fn from_checks(checks: Vec<CheckResult>, wall_time: f64) -> Self {
        let overall = checks.iter().all(CheckResult::passed);
        RunReport { checks, overall, wall_time }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        write!(f, "overall: {}", if self.overall { "PASS" } else { "FAIL" })
    }
}

/// Prepares, simulates and checks. Configuration and numerical errors from the
/// pipeline are returned as errors; failures inside individual checks are
/// reported as failed checks.
pub fn verify_scenario(s: &Scenario) -> Result<RunReport> {
    let start = Instant::now();
    let p = pipeline::prepare(s)?;
    let sim = pipeline::simulate(&p)?;
    let checks = verify_prepared(&p, &sim)?;
    Ok(RunReport::from_checks(checks, start.elapsed().as_secs_f64()))
}

fn guarded(id: &'static str, name: &str, r: Result<CheckResult>) -> CheckResult {
    r.unwrap_or_else(|e| CheckResult::errored(id, name, &e))
}

pub fn verify_prepared(p: &Prepared, sim: &Simulation) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let tol = &p.scenario.tolerances;
    let g = &p.generators;
    let interior = p.resolved.basis.interior_dim();
    let fock = sim.trajectory.as_ref();

    let r = check_su11_relations(&g.k1, &g.k2, &g.k3, interior)?;
    out.push(CheckResult::at_most("C1", "su11_relations", r.iter().fold(0.0, |m, v| m.max(*v)), SU11_TOL));

    out.push(guarded(
        "C2",
        "auxiliary_residual",
        auxiliary::max_auxiliary_residual(&p.solution, p.omega(), &p.auxiliary_kappa)
            .map(|m| CheckResult::at_most("C2", "auxiliary_residual", m, AUX_RESIDUAL_TOL)),
    ));

    out.push(guarded(
        "C3",
        "constraint_residuals",
        max_constraint_residual(p, pipeline::CONSTRAINT_SAMPLES)
            .map(|m| CheckResult::at_most("C3", "constraint_residuals", m, CONSTRAINT_TOL)),
    ));

    let c4_name = if p.invariant.is_strong() { "strong_invariant_residual" } else { "weak_invariant_residual" };
    out.push(guarded(
        "C4",
        c4_name,
        max_invariant_residual_of(p, &p.model, pipeline::RESIDUAL_SAMPLES)
            .map(|m| CheckResult::at_most("C4", c4_name, m, tol.residual)),
    ));

    out.push(CheckResult::at_most("C5", "invariant_conservation", sim.expectation.max_rel_drift, tol.conservation));

    if fock.is_some() {
        let dev = sim.spectrum.max_deviation_from_ladder();
        out.push(
            CheckResult::at_most("C6", "spectrum_ladder", dev, tol.spectrum)
                .with_detail(format!("{} levels", p.spectrum_levels())),
        );
        if !p.dissipative() {
            out.push(CheckResult::at_most("C6", "spectrum_constancy", sim.spectrum.max_variation(), tol.spectrum));
        }
        if !sim.spectrum.pairing_flags.is_empty() {
            out.push(CheckResult {
                id: "C6",
                name: "spectrum_pairing".into(),
                measured: sim.spectrum.pairing_flags.len() as f64,
                threshold: 0.0,
                status: CheckStatus::Warn,
                detail: format!("first flagged at t = {}", sim.spectrum.pairing_flags[0]),
            });
        }
    } else {
        out.push(CheckResult::skipped("C6", "spectrum_ladder", "operator-level backend"));
    }

    if fock.is_none() {
        out.push(CheckResult::skipped("C7", "invariant_drift", "operator-level backend"));
    } else if !p.dissipative() {
        out.push(CheckResult::skipped("C7", "invariant_drift", "no dissipator"));
    } else {
        out.push(guarded("C7", "invariant_drift", invariant_drift(p, &sim.times)));
    }

    match fock {
        Some(traj) => {
            let worst = |f: fn(&crate::lindblad::StateDiagnostics) -> f64| {
                traj.diagnostics.iter().map(f).fold(0.0_f64, f64::max)
            };
            let trace = worst(|d| (d.trace - 1.0).abs());
            let herm = worst(|d| d.herm_dev);
            let neg = traj.diagnostics.iter().map(|d| -d.min_eig).fold(f64::NEG_INFINITY, f64::max);
            let tail = worst(|d| d.tail_pop);
            out.push(CheckResult::at_most("C8", "trace_drift", trace, TRACE_TOL));
            out.push(CheckResult::at_most("C8", "hermiticity", herm, HERMITICITY_TOL));
            out.push(CheckResult::at_most("C8", "positivity", neg.max(0.0), tol.positivity));
            out.push(CheckResult::at_most("C8", "tail_population", tail, p.resolved.basis.tail_threshold));
        }
        None => out.push(CheckResult::skipped("C8", "state_diagnostics", "no density matrix")),
    }

    match (fock, &sim.su11_moments) {
        (Some(_), Some(m)) => {
            let rows = sim.moment_rows(g)?;
            let mut worst = 0.0_f64;
            for (i, t) in sim.times.iter().enumerate() {
                if *t > BACKEND_WINDOW + 1e-9 {
                    break;
                }
                let r = &rows[i];
                let d = [
                    r.k1 - m.values[i][0],
                    r.k2 - m.values[i][1],
                    r.k3 - m.values[i][2],
                    r.mean_x - sim.first_moments.mean_x[i],
                    r.mean_p - sim.first_moments.mean_p[i],
                ];
                worst = d.iter().fold(worst, |a, v| a.max(v.abs()));
            }
            out.push(CheckResult::at_most("C9", "backend_agreement", worst, BACKEND_TOL));
        }
        _ => out.push(CheckResult::skipped("C9", "backend_agreement", "needs backend = both")),
    }

    let f = &p.resolved.frequency;
    out.push(CheckResult::at_most("C10", "friction_nonnegative", (-f.min_kappa).max(0.0), 0.0));
    let min_omega2 = f.modulated_sq.iter().copied().fold(f64::INFINITY, f64::min);
    let mut c10 = CheckResult::at_most("C10", "modulated_frequency_sq", -min_omega2, 0.0);
    c10.detail = format!("min Omega^2 = {min_omega2:.6e}");
    if let Some(t) = f.first_modulated_negative {
        c10.status = CheckStatus::Warn;
        c10.detail = format!("Omega^2 < 0 first at t = {t}, min {min_omega2:.6e}");
    }
    out.push(c10);

    match &p.scenario.adiabatic {
        Some(_) => out.push(guarded("C11", "adiabatic_scaling", adiabatic_scaling(p))),
        None => out.push(CheckResult::skipped("C11", "adiabatic_scaling", "no [adiabatic] section")),
    }
    Ok(out)
}

/// Largest predicted eigenvalue drift of the closed-form invariant.
fn invariant_drift(p: &Prepared, times: &[f64]) -> Result<CheckResult> {
    let m = p.spectrum_levels();
    let interior = p.resolved.basis.interior_dim();
    let stride = (times.len() / DRIFT_SAMPLES).max(1);
    let mut worst = 0.0_f64;
    for &t in times.iter().step_by(stride) {
        let j = p.invariant.operator_at(&p.generators, t)?;
        let ds = p.model.dissipators_at(t)?;
        for d in drift_rhs(&j, &ds, m, interior)? {
            worst = worst.max(d.drift.abs());
        }
    }
    Ok(CheckResult::at_most("C7", "invariant_drift", worst, DRIFT_TOL))
}

/// `K2` evolved by the observable equation: predicted eigenvalue drift at
/// `DRIFT_PROBE_TIME` against centered differences of its spectrum.
///
/// Only eigenpairs confined to the interior levels enter; when none is, the
/// check fails and the detail reports the discriminant of the evolved form
/// (negative means an indefinite quadratic form with no discrete spectrum).
pub fn drift_vs_finite_difference(p: &Prepared) -> Result<CheckResult> {
    const NAME: &str = "drift_vs_finite_difference";
    let t0 = DRIFT_PROBE_TIME;
    let span = t0 + DRIFT_PROBE_OFFSET as f64 * DRIFT_PROBE_STEP;
    if span > p.t_max() {
        return Ok(CheckResult::skipped("C7", NAME, "run shorter than the probe time"));
    }
    let adj = evolve_adjoint_observable(&p.model, &p.generators.k2, span, DRIFT_PROBE_STEP, 1)?;
    let n = adj.times.len() - 1;
    let (i0, lo, hi) = (n - DRIFT_PROBE_OFFSET, n - 2 * DRIFT_PROBE_OFFSET, n);
    let m = p.spectrum_levels();
    let interior = p.resolved.basis.interior_dim();
    let c = adj.coordinates[i0];
    let disc = c[3] * c[4] - c[5] * c[5];
    let predicted = match drift_rhs(&adj.operators[i0], &p.model.dissipators_at(adj.times[i0])?, m, interior) {
        Ok(d) => d,
        Err(Error::DegenerateSpectrum) => {
            return Ok(CheckResult {
                id: "C7",
                name: NAME.into(),
                measured: f64::NAN,
                threshold: DRIFT_FD_TOL,
                status: CheckStatus::Fail,
                detail: format!(
                    "no eigenpair of the evolved K2 is confined to the interior at t = {}; discriminant {disc:.3e}",
                    adj.times[i0]
                ),
            })
        }
        Err(e) => return Err(e),
    };
    let ops: Vec<FockOperator> = vec![adj.operators[lo].clone(), adj.operators[hi].clone()];
    let spec = operator_spectrum_series(&ops, &[adj.times[lo], adj.times[hi]], m)?;
    let dt = adj.times[hi] - adj.times[lo];
    let mut worst = 0.0_f64;
    for d in &predicted {
        let fd = (spec.values[1][d.index] - spec.values[0][d.index]) / dt;
        worst = worst.max((fd - d.drift).abs());
    }
    Ok(CheckResult::at_most("C7", NAME, worst, DRIFT_FD_TOL)
        .with_detail(format!("{} eigenpairs at t = {}, discriminant {disc:.3e}", predicted.len(), adj.times[i0])))
}

/// Error ratio of the slow-variation series at rates `epsilon` and `epsilon/2`.
fn adiabatic_scaling(p: &Prepared) -> Result<CheckResult> {
    let a = p.scenario.adiabatic.as_ref().ok_or_else(|| Error::config("no adiabatic section"))?;
    let ScheduleConfig::Sinusoid { c0, amplitude, phase, .. } = p.scenario.omega else {
        return Err(Error::config("adiabatic scaling needs a sinusoidal omega"));
    };
    let error_at = |eps: f64| -> Result<f64> {
        let omega = Schedule::sinusoid(c0, amplitude, eps, phase);
        let period = std::f64::consts::TAU / eps;
        adiabatic_tracking_error(&omega, p.kappa(), period, a.settle_periods * period, a.step_h)
    };
    let coarse = error_at(a.epsilon)?;
    let fine = error_at(0.5 * a.epsilon)?;
    let ratio = coarse / fine;
    let (lo, hi) = ADIABATIC_RATIO;
    let status = if (lo..=hi).contains(&ratio) { CheckStatus::Pass } else { CheckStatus::Fail };
    Ok(CheckResult {
        id: "C11",
        name: "adiabatic_scaling".into(),
        measured: ratio,
        threshold: hi,
        status,
        detail: format!("errors {coarse:.3e} / {fine:.3e}, ratio must lie in [{lo}, {hi}]"),
    })
}
