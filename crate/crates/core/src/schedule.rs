//! Time-dependent real coefficients (the frequency and the friction) with
//! first and second derivatives, and the derived modulated frequency.

use std::path::Path;

use crate::error::{Error, Result};

const WINDOW_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    Constant { value: f64 },
    Linear { c0: f64, c1: f64 },
    /// `c0 + amplitude * sin(nu t + phase)`
    Sinusoid { c0: f64, amplitude: f64, nu: f64, phase: f64 },
    Table(CubicSpline),
}

/// A coefficient evaluated on a closed window.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    start: f64,
    end: f64,
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Self::closed_form(ScheduleKind::Constant { value })
    }

    pub fn linear(c0: f64, c1: f64) -> Self {
        Self::closed_form(ScheduleKind::Linear { c0, c1 })
    }

    pub fn sinusoid(c0: f64, amplitude: f64, nu: f64, phase: f64) -> Self {
        Self::closed_form(ScheduleKind::Sinusoid { c0, amplitude, nu, phase })
    }

    /// Natural cubic interpolation through `(t, value)` pairs; the window is the table span.
    pub fn table(points: &[(f64, f64)]) -> Result<Self> {
        let spline = CubicSpline::natural(points)?;
        let (start, end) = (spline.times[0], *spline.times.last().unwrap());
        Ok(Schedule { kind: ScheduleKind::Table(spline), start, end })
    }

    /// Reads a two-column CSV with header `t,value`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
            return Err(Error::Parse(format!("{}: expected header `t,value`", path.display())));
        }
        let mut points = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{} row {}: {e}", path.display(), line + 2)))
            };
            points.push((parse(&rec[0])?, parse(&rec[1])?));
        }
        Self::table(&points)
    }

    fn closed_form(kind: ScheduleKind) -> Self {
        Schedule { kind, start: 0.0, end: f64::INFINITY }
    }

    /// Restricts a closed-form schedule to `[start, end]`.
    pub fn with_window(mut self, start: f64, end: f64) -> Self {
        if !matches!(self.kind, ScheduleKind::Table(_)) {
            self.start = start;
            self.end = end;
        }
        self
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn window(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    pub fn is_identically_zero(&self) -> bool {
        match &self.kind {
            ScheduleKind::Constant { value } => *value == 0.0,
            ScheduleKind::Linear { c0, c1 } => *c0 == 0.0 && *c1 == 0.0,
            ScheduleKind::Sinusoid { c0, amplitude, .. } => *c0 == 0.0 && *amplitude == 0.0,
            ScheduleKind::Table(s) => s.values.iter().all(|v| *v == 0.0),
        }
    }

    /// Value (`order` 0), first or second derivative at `t`.
    pub fn eval(&self, t: f64, order: u8) -> Result<f64> {
        let scale = 1.0 + t.abs();
        if !(t >= self.start - WINDOW_SLACK * scale && t <= self.end + WINDOW_SLACK * scale) {
            return Err(Error::OutOfWindow { t, start: self.start, end: self.end });
        }
        if order > 2 {
            return Err(Error::config(format!("derivative order {order} not supported")));
        }
        Ok(match &self.kind {
            ScheduleKind::Constant { value } => {
                if order == 0 {
                    *value
                } else {
                    0.0
                }
            }
            ScheduleKind::Linear { c0, c1 } => match order {
                0 => c0 + c1 * t,
                1 => *c1,
                _ => 0.0,
            },
            ScheduleKind::Sinusoid { c0, amplitude, nu, phase } => {
                let arg = nu * t + phase;
                match order {
                    0 => c0 + amplitude * arg.sin(),
                    1 => amplitude * nu * arg.cos(),
                    _ => -amplitude * nu * nu * arg.sin(),
                }
            }
            ScheduleKind::Table(s) => s.eval(t.clamp(self.start, self.end), order),
        })
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.eval(t, 0)
    }

    pub fn rate(&self, t: f64) -> Result<f64> {
        self.eval(t, 1)
    }

    pub fn accel(&self, t: f64) -> Result<f64> {
        self.eval(t, 2)
    }
}

/// Natural cubic spline (zero end curvature). For second-derivative queries
/// the end intervals report the adjacent interior knot curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    times: Vec<f64>,
    values: Vec<f64>,
    curvature: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::config(format!("table schedule needs at least 4 points, got {}", points.len())));
        }
        if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(Error::config("table schedule contains non-finite entries"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::config("table schedule times must be strictly increasing"));
        }
        let times: Vec<f64> = points.iter().map(|p| p.0).collect();
        let values: Vec<f64> = points.iter().map(|p| p.1).collect();
        let n = times.len();

        // tridiagonal system for interior curvatures, Thomas algorithm
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = times[i] - times[i - 1];
            let h1 = times[i + 1] - times[i];
            diag[i] = 2.0 * (h0 + h1);
            upper[i] = h1;
            rhs[i] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
        }
        for i in 2..n - 1 {
            let lower = times[i] - times[i - 1];
            let w = lower / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut curvature = vec![0.0; n];
        for i in (1..n - 1).rev() {
            curvature[i] = (rhs[i] - upper[i] * curvature[i + 1]) / diag[i];
        }
        Ok(CubicSpline { times, values, curvature })
    }

    fn eval(&self, t: f64, order: u8) -> f64 {
        let n = self.times.len();
        let i = match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.curvature[i], self.curvature[i + 1]);
        let h = t1 - t0;
        let a = (t1 - t) / h;
        let b = (t - t0) / h;
        match order {
            0 => a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0,
            1 => (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1,
            _ => {
                if i == 0 {
                    self.curvature[1]
                } else if i == n - 2 {
                    self.curvature[n - 2]
                } else {
                    a * m0 + b * m1
                }
            }
        }
    }
}

/// `omega^2 + kappa^2 + d kappa/dt`
pub fn modulated_frequency_sq(omega: &Schedule, kappa: &Schedule, t: f64) -> Result<f64> {
    let w = omega.value(t)?;
    let k = kappa.value(t)?;
    Ok(w * w + k * k + kappa.rate(t)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyReport {
    pub times: Vec<f64>,
    pub modulated_sq: Vec<f64>,
    /// Set when the modulated frequency squared dips below zero (warning only).
    pub modulated_negative: bool,
    pub first_modulated_negative: Option<f64>,
    pub min_kappa: f64,
}

pub const DEFAULT_VALIDATION_SAMPLES: usize = 1001;

pub fn uniform_grid(t_max: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
}

/// Samples the friction and the modulated frequency on `grid`.
///
/// Negative friction (below -1e-12) is a hard error; a negative modulated
/// frequency squared only raises a flag.
pub fn validate_schedules(omega: &Schedule, kappa: &Schedule, grid: &[f64]) -> Result<FrequencyReport> {
    let mut modulated_sq = Vec::with_capacity(grid.len());
    let mut first_neg = None;
    let mut min_kappa = f64::INFINITY;
    for &t in grid {
        let k = kappa.value(t)?;
        if k < -1e-12 {
            return Err(Error::NegativeFriction { t, value: k });
        }
        min_kappa = min_kappa.min(k);
        let m = modulated_frequency_sq(omega, kappa, t)?;
        if m < 0.0 && first_neg.is_none() {
            first_neg = Some(t);
        }
        modulated_sq.push(m);
    }
    Ok(FrequencyReport {
        times: grid.to_vec(),
        modulated_sq,
        modulated_negative: first_neg.is_some(),
        first_modulated_negative: first_neg,
        min_kappa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn closed_form_examples() {
        assert_eq!(Schedule::constant(1.0).eval(3.0, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(Schedule::linear(1.0, 0.1).value(2.0).unwrap(), 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(Schedule::sinusoid(1.0, 0.5, 0.2, 0.0).rate(0.0).unwrap(), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn window_is_enforced() {
        let s = Schedule::constant(1.0).with_window(0.0, 5.0);
        assert!(matches!(s.value(5.5), Err(Error::OutOfWindow { .. })));
        assert!(s.value(-0.1).is_err());
        assert!(s.value(5.0).is_ok());
        assert!(s.eval(1.0, 3).is_err());
    }

    #[test]
    fn modulated_frequency_examples() {
        let w = Schedule::constant(1.0);
        assert_abs_diff_eq!(modulated_frequency_sq(&w, &Schedule::constant(0.1), 1.0).unwrap(), 1.01, epsilon = 1e-15);
        assert_abs_diff_eq!(modulated_frequency_sq(&w, &Schedule::linear(0.0, 0.1), 0.0).unwrap(), 1.1, epsilon = 1e-15);
        let ws = Schedule::sinusoid(1.0, 0.3, 0.7, 0.2);
        let zero = Schedule::constant(0.0);
        for t in [0.0, 1.3, 4.0] {
            let v = ws.value(t).unwrap();
            assert_eq!(modulated_frequency_sq(&ws, &zero, t).unwrap(), v * v);
        }
    }

    #[test]
    fn validation_policies() {
        let grid = uniform_grid(10.0, DEFAULT_VALIDATION_SAMPLES);
        let rep = validate_schedules(&Schedule::constant(1.0), &Schedule::constant(0.05), &grid).unwrap();
        assert!(!rep.modulated_negative);
        assert_eq!(rep.times.len(), 1001);

        let err = validate_schedules(&Schedule::constant(1.0), &Schedule::constant(-0.01), &grid).unwrap_err();
        assert_eq!(err, Error::NegativeFriction { t: 0.0, value: -0.01 });

        // 0.01 + kappa^2 - 0.05 < 0 once kappa < 0.2
        let rep = validate_schedules(&Schedule::constant(0.1), &Schedule::linear(0.5, -0.05), &grid).unwrap();
        assert!(rep.modulated_negative);
        let t_neg = rep.first_modulated_negative.unwrap();
        assert!(t_neg > 5.0 && t_neg < 10.0);
        let again = validate_schedules(&Schedule::constant(0.1), &Schedule::linear(0.5, -0.05), &grid).unwrap();
        assert_eq!(rep, again);
    }

    #[test]
    fn spline_reproduces_cubic_interior() {
        // natural splines interpolate; check values at knots and smoothness of derivatives
        let pts: Vec<(f64, f64)> = (0..21).map(|i| {
            let t = i as f64 * 0.5;
            (t, (0.3 * t).sin())
        }).collect();
        let s = Schedule::table(&pts).unwrap();
        for &(t, v) in &pts {
            assert_abs_diff_eq!(s.value(t).unwrap(), v, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(s.rate(5.0).unwrap(), 0.3 * 1.5f64.cos(), epsilon = 1e-4);
        assert_abs_diff_eq!(s.accel(5.0).unwrap(), -0.09 * 1.5f64.sin(), epsilon = 1e-3);
        // edge curvature is held at the adjacent interior knot value
        assert_eq!(s.accel(0.1).unwrap(), s.accel(0.5).unwrap());
        assert!(s.value(10.5).is_err());
    }

    #[test]
    fn table_preconditions() {
        assert!(Schedule::table(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]).is_err());
        assert!(Schedule::table(&[(0.0, 1.0), (1.0, 1.0), (1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn csv_table_loading() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        std::fs::write(&path, "t,value\n0,1\n1,1.1\n2,1.2\n3,1.3\n").unwrap();
        let s = Schedule::from_csv(&path).unwrap();
        assert_abs_diff_eq!(s.value(1.5).unwrap(), 1.15, epsilon = 1e-12);
        std::fs::write(&path, "time,value\n0,1\n").unwrap();
        assert!(matches!(Schedule::from_csv(&path), Err(Error::Parse(_))));
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(c0 in 0.5f64..2.0, a in -0.5f64..0.5, nu in 0.05f64..2.0, ph in 0.0f64..6.0, t in 0.5f64..20.0, c1 in -0.2f64..0.2) {
            let d = 1e-5;
            for s in [Schedule::sinusoid(c0, a, nu, ph), Schedule::linear(c0, c1), Schedule::constant(c0)] {
                for order in [1u8, 2u8] {
                    let fd = (s.eval(t + d, order - 1).unwrap() - s.eval(t - d, order - 1).unwrap()) / (2.0 * d);
                    let exact = s.eval(t, order).unwrap();
                    prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0));
                }
            }
        }
    }
}
