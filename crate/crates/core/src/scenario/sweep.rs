//! One-parameter sweeps over independent runs, merged in input order.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::auxiliary::fmt_sig;
use crate::error::{Error, Result};

use super::pipeline::{self, Metrics};
use super::{scenario_from_table, Scenario};

pub const SWEEP_HEADER: &str =
    "value,max_invariant_drift,max_aux_residual,max_constraint_residual,max_invariant_residual,final_mean_x,max_alpha";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub metrics: Metrics,
}

/// Copy of `base` with the scalar at `path` (dotted, e.g. `kappa.value`) set to `value`.
///
/// The path must name a numeric field, either present in the file or known
/// to the schema with a default; integers are written back as integers.
pub fn with_parameter(base: &Scenario, path: &str, value: f64) -> Result<Scenario> {
    let invalid = |msg: &str| Error::Validation { path: path.into(), message: msg.into() };
    let mut root = base.to_table()?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.len() != 2 || keys.iter().any(|k| k.is_empty()) {
        return Err(invalid("expected `section.key`"));
    }
    let section = root
        .entry(keys[0].to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| invalid("not a table"))?;
    let slot = section.get(keys[1]);
    let new = match slot {
        Some(toml::Value::Integer(_)) => {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(invalid("expects a non-negative integer"));
            }
            toml::Value::Integer(value as i64)
        }
        Some(toml::Value::Float(_)) | None => toml::Value::Float(value),
        Some(_) => return Err(invalid("not a numeric field")),
    };
    section.insert(keys[1].to_string(), new);
    scenario_from_table(root, &base.base_dir)
}

fn run_one(s: &Scenario) -> Result<Metrics> {
    let p = pipeline::prepare(s)?;
    let sim = pipeline::simulate(&p)?;
    pipeline::metrics(&p, &sim)
}

/// Runs every value (in parallel) and returns rows in input order.
pub fn sweep(base: &Scenario, path: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    // Validate every variant before spending time on any run.
    let scenarios = values.iter().map(|v| with_parameter(base, path, *v)).collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<Metrics>> = scenarios.par_iter().map(run_one).collect();
    values
        .iter()
        .zip(results)
        .map(|(v, r)| r.map(|metrics| SweepRow { value: *v, metrics }))
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], digits: usize, mut w: impl Write) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        let m = &r.metrics;
        let cells = [
            r.value,
            m.max_invariant_drift,
            m.max_aux_residual,
            m.max_constraint_residual,
            m.max_invariant_residual,
            m.final_mean_x,
            m.max_alpha,
        ];
        let line: Vec<String> = cells.iter().map(|v| fmt_sig(*v, digits)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Parses `v1,v2,...`.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("sweep value `{s}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    Ok(values)
}

/// Loads the base scenario then sweeps.
pub fn sweep_file(config: &Path, path: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    sweep(&super::load_scenario(config)?, path, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn base() -> Scenario {
        parse_scenario(
            "[omega]\nschedule = \"constant\"\nvalue = 1.0\n[kappa]\nschedule = \"constant\"\nvalue = 0.1\n\
             [basis]\ndim = 24\n[run]\nt_max = 0.5\nstep_h = 1e-2\nrecord_every = 10\n",
            Path::new("."),
        )
        .unwrap()
    }

    #[test]
    fn parameter_paths() {
        let b = base();
        assert_eq!(with_parameter(&b, "basis.dim", 30.0).unwrap().basis.dim, 30);
        assert!(with_parameter(&b, "basis.dim", 30.5).is_err());
        assert_eq!(with_parameter(&b, "run.t_max", 0.25).unwrap().run.t_max, 0.25);
        let s = with_parameter(&b, "basis.omega_ref", 1.5).unwrap();
        assert_eq!(s.basis.omega_ref, Some(1.5));
        for bad in ["basis.dimm", "basis", "run.backend", "kappa.schedule", "nope.x"] {
            assert!(with_parameter(&b, bad, 1.0).is_err(), "{bad}");
        }
    }

    #[test]
    fn rows_follow_input_order() {
        let rows = sweep(&base(), "kappa.value", &[0.1, 0.0, 0.05]).unwrap();
        let v: Vec<f64> = rows.iter().map(|r| r.value).collect();
        assert_eq!(v, vec![0.1, 0.0, 0.05]);
        assert_eq!(rows[1].metrics.max_alpha, 0.0);
        assert!((rows[0].metrics.max_alpha - 0.1).abs() < 1e-12);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, 6, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
        assert!(sweep(&base(), "kappa.value", &[]).is_err());
        assert!(parse_values(" , ").is_err());
        assert_eq!(parse_values("1, 2.5").unwrap(), vec![1.0, 2.5]);
    }
}
