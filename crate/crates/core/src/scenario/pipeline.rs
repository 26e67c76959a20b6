//! Schedules, auxiliary solve, model assembly, evolution and CSV export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::algebra::Su11;
use crate::auxiliary::{self, fmt_sig, ErmakovSolution};
use crate::error::{Error, Result};
use crate::invariant::{
    self, constraint_residuals_for, expectation_series, invariant_residual, weak_invariant_su11, ExpectationSeries,
    InvariantSpec, SpectrumSeries,
};
use crate::lindblad::{
    assemble_model, evolve_density, evolve_first_moments, evolve_su11_moments, Branch, FirstMomentSeries,
    LindbladModel, MomentVector, OscillatorModel, StateDiagnostics, Su11MomentSeries, Trajectory,
};
use crate::operators::{build_state, DensityMatrix, Generators, StateSpec};
use crate::schedule::Schedule;

use super::{Backend, Resolved, Scenario};

/// Number of sample times for the constraint identities.
pub const CONSTRAINT_SAMPLES: usize = 100;
/// Number of sample times for the operator-equation residual.
pub const RESIDUAL_SAMPLES: usize = 20;

/// Everything a run needs before time stepping starts.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub resolved: Resolved,
    pub generators: Generators,
    /// Solution of the auxiliary equation of the chosen branch.
    pub solution: ErmakovSolution,
    /// Friction that entered the auxiliary equation.
    pub auxiliary_kappa: Schedule,
    pub model: OscillatorModel,
    pub invariant: InvariantSpec,
    pub rho0: DensityMatrix,
    pub moments0: MomentVector,
}

impl Prepared {
    pub fn omega(&self) -> &Schedule {
        &self.resolved.omega
    }

    pub fn kappa(&self) -> &Schedule {
        &self.resolved.kappa
    }

    pub fn branch(&self) -> Branch {
        self.scenario.auxiliary.branch
    }

    pub fn t_max(&self) -> f64 {
        self.scenario.run.t_max
    }

    pub fn dissipative(&self) -> bool {
        !self.resolved.kappa.is_identically_zero()
    }

    /// Lowest eigenvalues reported in the spectrum output (11 at dim 60).
    pub fn spectrum_levels(&self) -> usize {
        (self.resolved.basis.dim / 6 + 1).min(self.resolved.basis.dim / 3)
    }

    /// Generator coordinates of the invariant at `t`.
    pub fn invariant_su11(&self, t: f64) -> Result<Su11> {
        let (r, rd, _) = self.solution.eval(t)?;
        Ok(weak_invariant_su11(r, rd))
    }
}

pub fn prepare(s: &Scenario) -> Result<Prepared> {
    let resolved = s.resolve()?;
    let generators = Generators::new(&resolved.basis)?;
    let branch = s.auxiliary.branch;
    let auxiliary_kappa = branch.auxiliary_kappa(&resolved.kappa);
    let solution =
        auxiliary::solve_auxiliary(&resolved.omega, &auxiliary_kappa, resolved.init, s.run.t_max, s.run.step_h)?;
    let model = assemble_model(&resolved.omega, &resolved.kappa, &solution, &generators, branch)?;
    let invariant = if resolved.kappa.is_identically_zero() {
        InvariantSpec::lewis_riesenfeld(&solution)
    } else {
        InvariantSpec::weak(&solution)
    };
    let rho0 = match resolved.state {
        StateSpec::InvariantGround => {
            let i0 = invariant.operator_at(&generators, 0.0)?;
            build_state(&resolved.state, &resolved.basis, Some(&i0))?
        }
        ref spec => build_state(spec, &resolved.basis, None)?,
    };
    let moments0 = MomentVector::from_state(&rho0, &generators)?;
    Ok(Prepared {
        scenario: s.clone(),
        resolved,
        generators,
        solution,
        auxiliary_kappa,
        model,
        invariant,
        rho0,
        moments0,
    })
}

/// Results of the time stepping on the recording grid.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub times: Vec<f64>,
    /// Density-matrix trajectory (Fock backend).
    pub trajectory: Option<Trajectory>,
    /// Closed moment system (moment backend), on `times`.
    pub su11_moments: Option<Su11MomentSeries>,
    /// First moments from the closed two-variable system, on `times`.
    pub first_moments: FirstMomentSeries,
    /// `<I(t)>` from the Fock backend when available, else from the moments.
    pub expectation: ExpectationSeries,
    pub spectrum: SpectrumSeries,
}

impl Simulation {
    /// One row per recorded time: `<x>, <p>, <K1>, <K2>, <K3>`.
    pub fn moment_rows(&self, g: &Generators) -> Result<Vec<MomentVector>> {
        if let Some(traj) = &self.trajectory {
            return traj.states.iter().map(|s| MomentVector::from_state(s, g)).collect();
        }
        let m = self.su11_moments.as_ref().ok_or_else(|| Error::config("no backend produced moments"))?;
        Ok((0..self.times.len())
            .map(|i| MomentVector {
                mean_x: self.first_moments.mean_x[i],
                mean_p: self.first_moments.mean_p[i],
                k1: m.values[i][0],
                k2: m.values[i][1],
                k3: m.values[i][2],
            })
            .collect())
    }

    pub fn final_mean_x(&self) -> f64 {
        self.first_moments.mean_x.last().copied().unwrap_or(f64::NAN)
    }
}

/// Keeps the samples at every `stride`-th index and the last one.
fn subsample(series: &FirstMomentSeries, stride: usize) -> FirstMomentSeries {
    let n = series.times.len();
    let keep: Vec<usize> = (0..n).filter(|i| i % stride == 0 || *i + 1 == n).collect();
    FirstMomentSeries {
        times: keep.iter().map(|&i| series.times[i]).collect(),
        mean_x: keep.iter().map(|&i| series.mean_x[i]).collect(),
        mean_p: keep.iter().map(|&i| series.mean_p[i]).collect(),
        step: series.step * stride as f64,
    }
}

pub fn simulate(p: &Prepared) -> Result<Simulation> {
    let run = &p.scenario.run;
    let first = evolve_first_moments(
        p.omega(),
        p.kappa(),
        (p.moments0.mean_x, p.moments0.mean_p),
        run.t_max,
        run.step_h,
    )?;
    let first_moments = subsample(&first, run.record_every);

    let trajectory = if run.backend.uses_fock() {
        Some(evolve_density(&p.model, &p.rho0, run.t_max, run.step_h, run.record_every)?)
    } else {
        None
    };
    let su11_moments = if run.backend.uses_moments() {
        Some(evolve_su11_moments(&p.model, p.moments0.su11(), run.t_max, run.step_h, run.record_every)?)
    } else {
        None
    };

    let times = first_moments.times.clone();
    let expectation = match (&trajectory, &su11_moments) {
        (Some(traj), _) => expectation_series(traj, &p.invariant, &p.generators)?,
        (None, Some(m)) => {
            let values =
                m.times.iter().zip(&m.values).map(|(t, v)| Ok(p.invariant_su11(*t)?.dot(*v))).collect::<Result<_>>()?;
            ExpectationSeries::from_values(m.times.clone(), values)?
        }
        (None, None) => return Err(Error::config("no backend selected")),
    };
    let spectrum = invariant::spectrum_series(&p.invariant, &p.generators, &times, p.spectrum_levels())?;
    Ok(Simulation { times, trajectory, su11_moments, first_moments, expectation, spectrum })
}

/// Scalar summary used by `run`, `sweep` and the report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub max_invariant_drift: f64,
    pub max_aux_residual: f64,
    pub max_constraint_residual: f64,
    pub max_invariant_residual: f64,
    pub final_mean_x: f64,
    pub max_alpha: f64,
}

/// `n` times spread evenly over the open interval `(0, t_max)`.
pub fn interior_samples(t_max: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| t_max * (i as f64 + 0.5) / n as f64).collect()
}

pub fn max_constraint_residual(p: &Prepared, samples: usize) -> Result<f64> {
    let mut worst = 0.0_f64;
    for t in interior_samples(p.t_max(), samples) {
        let c = p.model.coefficients_at(t)?;
        let r = constraint_residuals_for(p.branch(), &p.solution, &c, p.kappa(), p.omega(), t)?;
        worst = r.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    Ok(worst)
}

pub fn max_invariant_residual_of(p: &Prepared, model: &dyn LindbladModel, samples: usize) -> Result<f64> {
    let h_t = invariant::DEFAULT_TIME_STEP;
    let mut worst = 0.0_f64;
    for t in interior_samples(p.t_max(), samples) {
        worst = worst.max(invariant_residual(&p.invariant, &p.generators, model, t, h_t)?);
    }
    Ok(worst)
}

pub fn max_alpha(p: &Prepared, times: &[f64]) -> Result<f64> {
    let mut worst = 0.0_f64;
    for &t in times {
        worst = worst.max(p.model.su11_at(t)?.2);
    }
    Ok(worst)
}

pub fn metrics(p: &Prepared, sim: &Simulation) -> Result<Metrics> {
    Ok(Metrics {
        max_invariant_drift: sim.expectation.max_rel_drift,
        max_aux_residual: auxiliary::max_auxiliary_residual(&p.solution, p.omega(), &p.auxiliary_kappa)?,
        max_constraint_residual: max_constraint_residual(p, CONSTRAINT_SAMPLES)?,
        max_invariant_residual: max_invariant_residual_of(p, &p.model, RESIDUAL_SAMPLES)?,
        final_mean_x: sim.final_mean_x(),
        max_alpha: max_alpha(p, &sim.times)?,
    })
}

pub const TRAJECTORY_HEADER: &str = "t,mean_x,mean_p,k1,k2,k3,trace,herm_dev,min_eig,tail_pop";

pub fn write_trajectory_csv(p: &Prepared, sim: &Simulation, mut w: impl Write) -> Result<()> {
    let digits = p.scenario.outputs.csv_precision;
    let rows = sim.moment_rows(&p.generators)?;
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    // The moment backend carries no density matrix; its diagnostics are NaN.
    let blank = StateDiagnostics { trace: f64::NAN, herm_dev: f64::NAN, min_eig: f64::NAN, tail_pop: f64::NAN };
    for (i, (t, m)) in sim.times.iter().zip(&rows).enumerate() {
        let d = sim.trajectory.as_ref().map_or(blank, |traj| traj.diagnostics[i]);
        let cells = [*t, m.mean_x, m.mean_p, m.k1, m.k2, m.k3, d.trace, d.herm_dev, d.min_eig, d.tail_pop];
        let line: Vec<String> = cells.iter().map(|v| fmt_sig(*v, digits)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub records: usize,
    pub metrics: Metrics,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Writes `trajectory.csv`, `ermakov.csv`, `invariant.csv` and `spectrum.csv`.
pub fn write_outputs(p: &Prepared, sim: &Simulation, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let digits = p.scenario.outputs.csv_precision;
    let names = ["trajectory.csv", "ermakov.csv", "invariant.csv", "spectrum.csv"];
    let paths: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();

    let mut w = create(&paths[0])?;
    write_trajectory_csv(p, sim, &mut w)?;
    w.flush()?;
    let mut w = create(&paths[1])?;
    p.solution.write_csv(&mut w, &sim.times, digits)?;
    w.flush()?;
    let mut w = create(&paths[2])?;
    sim.expectation.write_csv(&mut w, digits)?;
    w.flush()?;
    let mut w = create(&paths[3])?;
    sim.spectrum.write_csv(&mut w, digits)?;
    w.flush()?;
    Ok(paths)
}

/// Full pipeline; `out` overrides `outputs.directory`.
pub fn run_scenario(s: &Scenario, out: Option<&Path>) -> Result<RunSummary> {
    let dir = match (out, &s.outputs.directory) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => s.base_dir.join(d),
        (None, None) => return Err(Error::config("no output directory: pass --out or set outputs.directory")),
    };
    let p = prepare(s)?;
    let sim = simulate(&p)?;
    let files = write_outputs(&p, &sim, &dir)?;
    Ok(RunSummary { output_dir: dir, files, records: sim.times.len(), metrics: metrics(&p, &sim)? })
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Fock => "fock",
            Backend::Moments => "moments",
            Backend::Both => "both",
        }
    }
}
