//! Declarative scenarios: a TOML file describing the basis, the coefficient
//! schedules, the auxiliary initial data, the initial state, the run
//! parameters, tolerances and output settings.

pub mod pipeline;
pub mod sweep;
pub mod verify;

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::auxiliary::{self, Anchor, ErmakovInit};
use crate::error::{Error, Result};
use crate::lindblad::Branch;
use crate::linalg::C64;
use crate::operators::{BasisConfig, StateSpec};
use crate::schedule::{self, Schedule};

pub use pipeline::{prepare, run_scenario, simulate, Prepared, RunSummary, Simulation};
pub use sweep::{parse_values, sweep, sweep_file, with_parameter, write_sweep_csv, SweepRow};
pub use verify::{verify_prepared, verify_scenario, CheckResult, CheckStatus, RunReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub basis: BasisSection,
    pub omega: ScheduleConfig,
    #[serde(default = "ScheduleConfig::zero")]
    pub kappa: ScheduleConfig,
    #[serde(default)]
    pub auxiliary: AuxiliarySection,
    #[serde(default)]
    pub state: StateConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adiabatic: Option<AdiabaticSection>,
    /// Directory against which relative table paths resolve.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    pub dim: usize,
    /// Defaults to omega(0).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_ref: Option<f64>,
    pub tail_fraction: f64,
    pub tail_threshold: f64,
}

impl Default for BasisSection {
    fn default() -> Self {
        BasisSection { dim: 60, omega_ref: None, tail_fraction: 0.1, tail_threshold: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    Constant {
        value: f64,
    },
    Linear {
        c0: f64,
        c1: f64,
    },
    Sinusoid {
        c0: f64,
        amplitude: f64,
        nu: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Either inline `points = [[t, v], ...]` or `file = "table.csv"` (header `t,value`).
    Table {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<[f64; 2]>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
    },
}

impl ScheduleConfig {
    fn zero() -> Self {
        ScheduleConfig::Constant { value: 0.0 }
    }

    pub fn build(&self, base_dir: &Path) -> Result<Schedule> {
        match self {
            ScheduleConfig::Constant { value } => Ok(Schedule::constant(*value)),
            ScheduleConfig::Linear { c0, c1 } => Ok(Schedule::linear(*c0, *c1)),
            ScheduleConfig::Sinusoid { c0, amplitude, nu, phase } => Ok(Schedule::sinusoid(*c0, *amplitude, *nu, *phase)),
            ScheduleConfig::Table { points: Some(pts), file: None } => {
                let pairs: Vec<(f64, f64)> = pts.iter().map(|p| (p[0], p[1])).collect();
                Schedule::table(&pairs)
            }
            ScheduleConfig::Table { points: None, file: Some(f) } => Schedule::from_csv(&base_dir.join(f)),
            ScheduleConfig::Table { .. } => Err(Error::config("a table schedule needs exactly one of `points` or `file`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuxiliarySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhodot0: Option<f64>,
    pub use_adiabatic_init: bool,
    pub branch: Branch,
}

impl Default for AuxiliarySection {
    fn default() -> Self {
        AuxiliarySection { rho0: None, rhodot0: None, use_adiabatic_init: true, branch: Branch::AntiDamped }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    Coherent {
        beta_re: f64,
        #[serde(default)]
        beta_im: f64,
    },
    Fock {
        n: usize,
    },
    Thermal {
        mean_occupation: f64,
    },
    InvariantGround,
}

impl Default for StateConfig {
    fn default() -> Self {
        StateConfig::Coherent { beta_re: FRAC_1_SQRT_2, beta_im: 0.0 }
    }
}

impl StateConfig {
    pub fn spec(&self) -> StateSpec {
        match *self {
            StateConfig::Coherent { beta_re, beta_im } => StateSpec::Coherent { beta: C64::new(beta_re, beta_im) },
            StateConfig::Fock { n } => StateSpec::Fock { n },
            StateConfig::Thermal { mean_occupation } => StateSpec::Thermal { mean_occupation },
            StateConfig::InvariantGround => StateSpec::InvariantGround,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Fock,
    Moments,
    Both,
}

impl Backend {
    pub fn uses_fock(self) -> bool {
        self != Backend::Moments
    }

    pub fn uses_moments(self) -> bool {
        self != Backend::Fock
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t_max: f64,
    pub step_h: f64,
    pub record_every: usize,
    pub backend: Backend,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { t_max: 20.0, step_h: 1e-3, record_every: 100, backend: Backend::Both }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Max relative drift of the invariant expectation.
    pub conservation: f64,
    /// Interior max-norm of the invariant operator-equation residual.
    pub residual: f64,
    /// Lower bound on the smallest density-matrix eigenvalue (as a magnitude).
    pub positivity: f64,
    /// Max distance of the invariant spectrum from `n + 1/2`.
    pub spectrum: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { conservation: 1e-5, residual: 1e-6, positivity: 1e-8, spectrum: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    /// Significant digits in CSV output.
    pub csv_precision: usize,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { directory: None, csv_precision: 12 }
    }
}

/// Declares the slow rate of a sinusoidal frequency for the adiabatic check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdiabaticSection {
    /// Replaces `omega.nu`; the check compares `epsilon` with `epsilon / 2`.
    pub epsilon: f64,
    /// Slow periods of backward settling before the measured period.
    #[serde(default = "default_settle_periods")]
    pub settle_periods: f64,
    #[serde(default = "default_adiabatic_step")]
    pub step_h: f64,
}

fn default_settle_periods() -> f64 {
    6.0
}

fn default_adiabatic_step() -> f64 {
    1e-2
}

const SCHEDULE_KEYS: &[&str] = &["schedule", "value", "c0", "c1", "amplitude", "nu", "phase", "points", "file"];

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("basis", &["dim", "omega_ref", "tail_fraction", "tail_threshold"]),
    ("omega", SCHEDULE_KEYS),
    ("kappa", SCHEDULE_KEYS),
    ("auxiliary", &["rho0", "rhodot0", "use_adiabatic_init", "branch"]),
    ("state", &["kind", "beta_re", "beta_im", "n", "mean_occupation"]),
    ("run", &["t_max", "step_h", "record_every", "backend"]),
    ("tolerances", &["conservation", "residual", "positivity", "spectrum"]),
    ("outputs", &["directory", "csv_precision"]),
    ("adiabatic", &["epsilon", "settle_periods", "step_h"]),
];

fn check_known_keys(root: &toml::Table) -> Result<()> {
    for (section, value) in root {
        let Some((_, keys)) = KNOWN_KEYS.iter().find(|(s, _)| s == section) else {
            return Err(Error::Validation { path: section.clone(), message: "unknown key".into() });
        };
        let Some(table) = value.as_table() else {
            return Err(Error::Validation { path: section.clone(), message: "expected a table".into() });
        };
        if let Some(k) = table.keys().find(|k| !keys.contains(&k.as_str())) {
            return Err(Error::Validation { path: format!("{section}.{k}"), message: "unknown key".into() });
        }
    }
    Ok(())
}

fn validation(path: &str, message: impl Into<String>) -> Error {
    Error::Validation { path: path.into(), message: message.into() }
}

/// Parses and validates a scenario held in memory; relative table paths resolve
/// against `base_dir`.
pub fn parse_scenario(text: &str, base_dir: &Path) -> Result<Scenario> {
    let root: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    scenario_from_table(root, base_dir)
}

pub(crate) fn scenario_from_table(root: toml::Table, base_dir: &Path) -> Result<Scenario> {
    check_known_keys(&root)?;
    let mut s: Scenario = serde_path_to_error::deserialize(toml::Value::Table(root)).map_err(|e| {
        let path = e.path().to_string();
        Error::Validation { path, message: e.into_inner().to_string() }
    })?;
    s.base_dir = base_dir.to_path_buf();
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario(&text, &base)
}

/// Schedules, basis, state and auxiliary data resolved from a scenario.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub omega: Schedule,
    pub kappa: Schedule,
    pub basis: BasisConfig,
    pub state: StateSpec,
    pub init: ErmakovInit,
    pub frequency: schedule::FrequencyReport,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let omega = self.omega.build(&self.base_dir).map_err(|e| validation("omega", e.to_string()))?;
        let kappa = self.kappa.build(&self.base_dir).map_err(|e| validation("kappa", e.to_string()))?;
        let run = &self.run;
        if !(run.t_max > 0.0 && run.t_max.is_finite()) {
            return Err(validation("run.t_max", "must be positive"));
        }
        if !(run.step_h > 0.0 && run.step_h < run.t_max) {
            return Err(validation("run.step_h", "must lie in (0, t_max)"));
        }
        if run.record_every == 0 {
            return Err(validation("run.record_every", "must be at least 1"));
        }
        if !(1..=17).contains(&self.outputs.csv_precision) {
            return Err(validation("outputs.csv_precision", "must lie in 1..=17"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("conservation", t.conservation),
            ("residual", t.residual),
            ("positivity", t.positivity),
            ("spectrum", t.spectrum),
        ] {
            if !(v > 0.0) {
                return Err(validation(&format!("tolerances.{name}"), "must be positive"));
            }
        }

        let (w_start, w_end) = omega.window();
        let (k_start, k_end) = kappa.window();
        if w_start > 0.0 || w_end < run.t_max || k_start > 0.0 || k_end < run.t_max {
            return Err(validation("run.t_max", "schedules must cover [0, t_max]"));
        }
        let grid = schedule::uniform_grid(run.t_max, schedule::DEFAULT_VALIDATION_SAMPLES);
        let frequency = schedule::validate_schedules(&omega, &kappa, &grid).map_err(|e| match e {
            Error::NegativeFriction { .. } => validation("kappa", e.to_string()),
            other => other,
        })?;

        let omega_ref = match self.basis.omega_ref {
            Some(w) => w,
            None => omega.value(0.0)?,
        };
        let basis = BasisConfig {
            dim: self.basis.dim,
            omega_ref,
            tail_fraction: self.basis.tail_fraction,
            tail_threshold: self.basis.tail_threshold,
        };
        basis.validate().map_err(|e| validation("basis", e.to_string()))?;
        let state = self.state.spec();
        state.validate(basis.dim).map_err(|e| validation("state", e.to_string()))?;

        let aux = &self.auxiliary;
        let init = if aux.use_adiabatic_init {
            if aux.rho0.is_some() || aux.rhodot0.is_some() {
                return Err(validation(
                    "auxiliary",
                    "rho0/rhodot0 given while use_adiabatic_init = true; set it to false to use them",
                ));
            }
            let k_aux = aux.branch.auxiliary_kappa(&kappa);
            auxiliary::adiabatic_init(&omega, &k_aux, 0.0, Anchor::Start)
                .map_err(|e| validation("auxiliary", e.to_string()))?
        } else {
            let w0 = omega.value(0.0)?;
            let rho0 = match aux.rho0 {
                Some(r) => r,
                None if w0 > 0.0 => w0.powf(-0.5),
                None => return Err(validation("auxiliary.rho0", "required when omega(0) <= 0")),
            };
            ErmakovInit::new(rho0, aux.rhodot0.unwrap_or(0.0)).map_err(|e| validation("auxiliary.rho0", e.to_string()))?
        };

        if let Some(a) = &self.adiabatic {
            if !matches!(self.omega, ScheduleConfig::Sinusoid { .. }) {
                return Err(validation("adiabatic", "the slow rate applies to a sinusoidal omega schedule"));
            }
            if !(a.epsilon > 0.0 && a.settle_periods >= 0.0 && a.step_h > 0.0) {
                return Err(validation("adiabatic", "epsilon and step_h must be positive, settle_periods non-negative"));
            }
        }
        Ok(Resolved { omega, kappa, basis, state, init, frequency })
    }

    /// The scenario as a TOML table with every default written out.
    pub fn to_table(&self) -> Result<toml::Table> {
        toml::Table::try_from(self).map_err(|e| Error::config(e.to_string()))
    }
}

/// Every accepted key with its default.
pub const SCHEMA: &str = r#"# Scenario file (TOML). Unknown keys are rejected.

[basis]
dim = 60                  # Fock truncation, >= 8
# omega_ref = 1.0         # reference frequency of the ladder basis; default omega(0)
tail_fraction = 0.1       # top fraction of levels summed into the tail population
tail_threshold = 1e-8     # tail population that aborts a run

# Coefficient schedules. `omega` is required; `kappa` defaults to constant 0.
# schedule = "constant"  value
# schedule = "linear"    c0, c1                       c0 + c1 t
# schedule = "sinusoid"  c0, amplitude, nu, phase=0   c0 + amplitude sin(nu t + phase)
# schedule = "table"     points = [[t, v], ...]  or  file = "path.csv" (header t,value)
[omega]
schedule = "constant"
value = 1.0

[kappa]
schedule = "constant"
value = 0.0

[auxiliary]
use_adiabatic_init = true # start from the slow-variation series at t = 0
# rho0 = 1.0              # explicit data, only with use_adiabatic_init = false
# rhodot0 = 0.0           #   (defaults: omega(0)^-1/2 and 0)
branch = "anti_damped"    # "anti_damped" or "commuting"

# kind = "coherent" (beta_re, beta_im=0) | "fock" (n) | "thermal" (mean_occupation)
#      | "invariant_ground"
[state]
kind = "coherent"
beta_re = 0.7071067811865476
beta_im = 0.0

[run]
t_max = 20.0
step_h = 1e-3
record_every = 100
backend = "both"          # "fock", "moments" or "both"

[tolerances]
conservation = 1e-5       # max relative drift of <I>
residual = 1e-6           # invariant operator-equation residual
positivity = 1e-8         # allowed negative eigenvalue magnitude
spectrum = 1e-6           # distance of the invariant spectrum from n + 1/2

[outputs]
# directory = "out"       # used by `run` when --out is absent
csv_precision = 12        # significant digits

# Optional: enables the adiabatic-scaling check for a sinusoidal omega.
# [adiabatic]
# epsilon = 0.05          # slow rate compared with epsilon / 2
# settle_periods = 6.0
# step_h = 1e-2
"#;

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario> {
        parse_scenario(text, Path::new("."))
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse("[omega]\nschedule = \"constant\"\nvalue = 1.0\n").unwrap();
        assert_eq!(s.basis.dim, 60);
        assert_eq!(s.run.step_h, 1e-3);
        assert_eq!(s.run.t_max, 20.0);
        assert_eq!(s.run.record_every, 100);
        assert_eq!(s.outputs.csv_precision, 12);
        assert_eq!(s.kappa, ScheduleConfig::Constant { value: 0.0 });
        let r = s.resolve().unwrap();
        assert_eq!(r.basis.omega_ref, 1.0);
        assert!(r.kappa.is_identically_zero());
        assert_eq!(r.init, ErmakovInit { rho0: 1.0, rhodot0: 0.0 });
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("[omega]\nschedle = \"constant\"\nvalue = 1.0\n").unwrap_err();
        assert_eq!(err, Error::Validation { path: "omega.schedle".into(), message: "unknown key".into() });
        let err = parse("[omega]\nschedule = \"constant\"\nvalue = 1.0\n[runn]\n").unwrap_err();
        assert!(matches!(err, Error::Validation { ref path, .. } if path == "runn"));
    }

    #[test]
    fn negative_friction_is_a_validation_error() {
        let err = parse("[omega]\nschedule = \"constant\"\nvalue = 1.0\n[kappa]\nschedule = \"constant\"\nvalue = -0.1\n")
            .unwrap_err();
        match err {
            Error::Validation { path, message } => {
                assert_eq!(path, "kappa");
                assert!(message.contains("negative friction"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_errors_carry_paths() {
        let err = parse("[omega]\nschedule = \"constant\"\nvalue = 1.0\n[basis]\ndim = \"big\"\n").unwrap_err();
        assert!(matches!(err, Error::Validation { ref path, .. } if path == "basis.dim"), "{err:?}");
        assert!(matches!(parse("[omega\n"), Err(Error::Parse(_))));
        let err = parse("[omega]\nschedule = \"linear\"\nvalue = 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Validation { .. }), "{err:?}");
    }

    #[test]
    fn schema_parses_and_round_trips() {
        let s = parse(SCHEMA).unwrap();
        assert_eq!(s.run.backend, Backend::Both);
        let table = s.to_table().unwrap();
        let again = scenario_from_table(table, Path::new(".")).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn conflicting_initial_data_rejected() {
        let err = parse("[omega]\nschedule = \"constant\"\nvalue = 1.0\n[auxiliary]\nrho0 = 1.2\n").unwrap_err();
        assert!(matches!(err, Error::Validation { ref path, .. } if path == "auxiliary"));
        let s = parse("[omega]\nschedule = \"constant\"\nvalue = 4.0\n[auxiliary]\nuse_adiabatic_init = false\n").unwrap();
        assert_eq!(s.resolve().unwrap().init, ErmakovInit { rho0: 0.5, rhodot0: 0.0 });
    }
}
