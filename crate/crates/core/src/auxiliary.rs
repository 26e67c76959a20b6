//! Auxiliary c-number equations.
//!
//! * the anti-damped Ermakov equation `rho'' - kappa rho' + omega^2 rho = rho^-3`
//!   (with `kappa = 0` it is the classic Ermakov-Pinney equation),
//! * the classical mode equation `eps'' + omega^2 eps = 0`,
//! * the slow-variation series for `rho`.
//!
//! Solutions are stored on a uniform grid as `(y, y', y'')` triples, where
//! `y''` is the right-hand side evaluated during integration. Dense output is
//! quintic Hermite interpolation of those triples.

use std::io::Write;

use crate::error::{Error, Result};
use crate::rk4;
use crate::schedule::Schedule;

/// Stage values of `rho` below this abort the integration.
pub const RHO_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErmakovInit {
    pub rho0: f64,
    pub rhodot0: f64,
}

impl ErmakovInit {
    pub fn new(rho0: f64, rhodot0: f64) -> Result<Self> {
        if !(rho0 >= RHO_FLOOR) || !rhodot0.is_finite() {
            return Err(Error::config(format!("auxiliary initial data ({rho0}, {rhodot0}) invalid: rho0 must be >= {RHO_FLOOR}")));
        }
        Ok(ErmakovInit { rho0, rhodot0 })
    }
}

/// A sampled solution of a second-order scalar ODE on a uniform grid.
///
/// Also used for the classical mode `eps(t)`, which carries no positivity
/// requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct ErmakovSolution {
    t0: f64,
    h: f64,
    value: Vec<f64>,
    rate: Vec<f64>,
    accel: Vec<f64>,
}

impl ErmakovSolution {
    pub fn from_samples(t0: f64, h: f64, value: Vec<f64>, rate: Vec<f64>, accel: Vec<f64>) -> Result<Self> {
        if value.len() < 2 || value.len() != rate.len() || value.len() != accel.len() {
            return Err(Error::config("solution samples must have equal length >= 2"));
        }
        if !(h > 0.0) {
            return Err(Error::config("grid step must be positive"));
        }
        Ok(ErmakovSolution { t0, h, value, rate, accel })
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t0, self.time(self.len() - 1))
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn rho(&self) -> &[f64] {
        &self.value
    }

    pub fn rhodot(&self) -> &[f64] {
        &self.rate
    }

    pub fn rhoddot(&self) -> &[f64] {
        &self.accel
    }

    /// Copy with every stored `rho` sample shifted by `delta` (rates and
    /// accelerations untouched).
    pub fn with_rho_offset(&self, delta: f64) -> Self {
        let mut out = self.clone();
        out.value.iter_mut().for_each(|v| *v += delta);
        out
    }

    /// `(y, y', y'')` at `t` by quintic Hermite interpolation.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64)> {
        let (start, end) = self.window();
        let slack = 1e-9 * (1.0 + t.abs());
        if !(t >= start - slack && t <= end + slack) {
            return Err(Error::OutOfWindow { t, start, end });
        }
        let pos = ((t - self.t0) / self.h).clamp(0.0, (self.len() - 1) as f64);
        let i = (pos.floor() as usize).min(self.len() - 2);
        let s = pos - i as f64;
        let h = self.h;
        let (y0, d0, a0) = (self.value[i], self.rate[i] * h, self.accel[i] * h * h);
        let (y1, d1, a1) = (self.value[i + 1], self.rate[i + 1] * h, self.accel[i + 1] * h * h);
        let (b, db, ddb) = quintic_basis(s);
        let coef = [y0, d0, a0, a1, d1, y1];
        let mut out = [0.0; 3];
        for k in 0..6 {
            out[0] += coef[k] * b[k];
            out[1] += coef[k] * db[k];
            out[2] += coef[k] * ddb[k];
        }
        Ok((out[0], out[1] / h, out[2] / (h * h)))
    }

    pub fn write_csv(&self, mut w: impl Write, times: &[f64], digits: usize) -> Result<()> {
        writeln!(w, "t,rho,rhodot")?;
        for &t in times {
            let (r, rd, _) = self.eval(t)?;
            writeln!(w, "{},{},{}", fmt_sig(t, digits), fmt_sig(r, digits), fmt_sig(rd, digits))?;
        }
        Ok(())
    }
}

/// Quintic Hermite basis on `[0,1]` ordered as
/// `[y0, h y0', h^2 y0'', h^2 y1'', h y1', y1]`, with first and second derivatives.
fn quintic_basis(s: f64) -> ([f64; 6], [f64; 6], [f64; 6]) {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let b = [
        1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
        s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5,
        0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5),
        0.5 * (s3 - 2.0 * s4 + s5),
        -4.0 * s3 + 7.0 * s4 - 3.0 * s5,
        10.0 * s3 - 15.0 * s4 + 6.0 * s5,
    ];
    let db = [
        -30.0 * s2 + 60.0 * s3 - 30.0 * s4,
        1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4,
        0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4),
        0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4),
        -12.0 * s2 + 28.0 * s3 - 15.0 * s4,
        30.0 * s2 - 60.0 * s3 + 30.0 * s4,
    ];
    let ddb = [
        -60.0 * s + 180.0 * s2 - 120.0 * s3,
        -36.0 * s + 96.0 * s2 - 60.0 * s3,
        0.5 * (2.0 - 18.0 * s + 36.0 * s2 - 20.0 * s3),
        0.5 * (6.0 * s - 24.0 * s2 + 20.0 * s3),
        -24.0 * s + 84.0 * s2 - 60.0 * s3,
        60.0 * s - 180.0 * s2 + 120.0 * s3,
    ];
    (b, db, ddb)
}

/// Where the initial data sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    /// Data at `t = 0`, integrate forward to `t_max`.
    Start,
    /// Data at `t = t_max`, integrate backward to `0`.
    End,
}

fn integrate<F>(y0: f64, yd0: f64, t_max: f64, h: f64, anchor: Anchor, mut accel: F) -> Result<ErmakovSolution>
where
    F: FnMut(f64, f64, f64) -> Result<f64>,
{
    if !(h > 0.0) || !(t_max > 0.0) {
        return Err(Error::config(format!("need h > 0 and t_max > 0, got h = {h}, t_max = {t_max}")));
    }
    let n = rk4::step_count(t_max, h);
    let h = t_max / n as f64;
    let (t_start, dir) = match anchor {
        Anchor::Start => (0.0, 1.0),
        Anchor::End => (t_max, -1.0),
    };
    let mut value = Vec::with_capacity(n + 1);
    let mut rate = Vec::with_capacity(n + 1);
    let mut acc = Vec::with_capacity(n + 1);
    let mut y = [y0, yd0];
    let mut f = |t: f64, y: &[f64; 2]| -> Result<[f64; 2]> { Ok([y[1], accel(t, y[0], y[1])?]) };
    for k in 0..=n {
        let t = t_start + dir * k as f64 * h;
        value.push(y[0]);
        rate.push(y[1]);
        acc.push(f(t, &y)?[1]);
        if k < n {
            y = rk4::step(t, &y, dir * h, &mut f)?;
            if !(y[0].is_finite() && y[1].is_finite()) {
                return Err(Error::NonFinite { t });
            }
        }
    }
    if anchor == Anchor::End {
        value.reverse();
        rate.reverse();
        acc.reverse();
    }
    ErmakovSolution::from_samples(0.0, h, value, rate, acc)
}

/// Right-hand side of the anti-damped Ermakov equation.
pub fn ermakov_accel(omega: &Schedule, kappa: &Schedule, t: f64, rho: f64, rhodot: f64) -> Result<f64> {
    if !(rho >= RHO_FLOOR) {
        return Err(Error::Singularity { t, rho });
    }
    let w = omega.value(t)?;
    Ok(kappa.value(t)? * rhodot - w * w * rho + rho.powi(-3))
}

/// Integrates `rho'' - kappa rho' + omega^2 rho = rho^-3` on `[0, t_max]`
/// with fixed-step RK4 (the step is adjusted so that it divides `t_max`).
pub fn solve_auxiliary(
    omega: &Schedule,
    kappa: &Schedule,
    init: ErmakovInit,
    t_max: f64,
    h: f64,
) -> Result<ErmakovSolution> {
    solve_auxiliary_anchored(omega, kappa, init, t_max, h, Anchor::Start)
}

/// As [`solve_auxiliary`] with the data placed at either end of the window.
///
/// Integrating from the end is the stable direction for `kappa > 0`: the
/// friction term anti-damps forward in time.
pub fn solve_auxiliary_anchored(
    omega: &Schedule,
    kappa: &Schedule,
    init: ErmakovInit,
    t_max: f64,
    h: f64,
    anchor: Anchor,
) -> Result<ErmakovSolution> {
    integrate(init.rho0, init.rhodot0, t_max, h, anchor, |t, r, rd| ermakov_accel(omega, kappa, t, r, rd))
}

/// Integrates `eps'' + omega^2 eps = 0` on `[0, t_max]`.
pub fn solve_classical_mode(omega: &Schedule, init: (f64, f64), t_max: f64, h: f64) -> Result<ErmakovSolution> {
    integrate(init.0, init.1, t_max, h, Anchor::Start, |t, e, _| {
        let w = omega.value(t)?;
        Ok(-w * w * e)
    })
}

/// Slow-variation series for `rho` truncated after the second-order terms:
///
/// ```text
/// w^-1/2 - k w'/(8 w^7/2) - w'^2 [3 - (7/4)(k/w)^2]/(16 w^9/2)
///        - k k' w'/(32 w^11/2) + w'' [1 - (1/4)(k/w)^2]/(8 w^7/2)
/// ```
pub fn adiabatic_rho(omega: &Schedule, kappa: &Schedule, t: f64) -> Result<f64> {
    let w = omega.value(t)?;
    if !(w > 0.0) {
        return Err(Error::config(format!("adiabatic series needs omega > 0, got {w} at t = {t}")));
    }
    let wd = omega.rate(t)?;
    let wdd = omega.accel(t)?;
    let k = kappa.value(t)?;
    let kd = kappa.rate(t)?;
    let r = k / w;
    Ok(w.powf(-0.5) - k * wd / (8.0 * w.powf(3.5)) - (3.0 - 1.75 * r * r) * wd * wd / (16.0 * w.powf(4.5))
        - k * kd * wd / (32.0 * w.powf(5.5))
        + (1.0 - 0.25 * r * r) * wdd / (8.0 * w.powf(3.5)))
}

/// Initial data `(rho, rho')` from the series at `t`; the rate is a one-sided
/// fourth-order finite difference pointing into the window (`Anchor::Start`
/// looks forward, `Anchor::End` looks backward).
pub fn adiabatic_init(omega: &Schedule, kappa: &Schedule, t: f64, anchor: Anchor) -> Result<ErmakovInit> {
    const DELTA: f64 = 1e-3;
    let dir = if anchor == Anchor::Start { 1.0 } else { -1.0 };
    let f = |k: f64| adiabatic_rho(omega, kappa, t + dir * k * DELTA);
    let rate = dir * (-25.0 * f(0.0)? + 48.0 * f(1.0)? - 36.0 * f(2.0)? + 16.0 * f(3.0)? - 3.0 * f(4.0)?) / (12.0 * DELTA);
    ErmakovInit::new(f(0.0)?, rate)
}

/// `rho'' - kappa rho' + omega^2 rho - rho^-3` from the interpolated triple.
pub fn auxiliary_residual(sol: &ErmakovSolution, omega: &Schedule, kappa: &Schedule, t: f64) -> Result<f64> {
    let (r, rd, rdd) = sol.eval(t)?;
    let w = omega.value(t)?;
    Ok(rdd - kappa.value(t)? * rd + w * w * r - r.powi(-3))
}

/// Largest |residual| over every node and every midpoint between nodes.
pub fn max_auxiliary_residual(sol: &ErmakovSolution, omega: &Schedule, kappa: &Schedule) -> Result<f64> {
    let mut worst = 0.0_f64;
    for i in 0..sol.len() {
        worst = worst.max(auxiliary_residual(sol, omega, kappa, sol.time(i))?.abs());
        if i + 1 < sol.len() {
            let tm = sol.time(i) + 0.5 * sol.step();
            worst = worst.max(auxiliary_residual(sol, omega, kappa, tm)?.abs());
        }
    }
    Ok(worst)
}

/// Max |rho - series| over `[0, measure_span]` for the solution that tracks
/// the series.
///
/// The solution is integrated backward from `measure_span + settle`, where it
/// starts on the series, so the homogeneous transients introduced by the
/// truncated initial data decay at rate `kappa/2` before the measurement window.
pub fn adiabatic_tracking_error(
    omega: &Schedule,
    kappa: &Schedule,
    measure_span: f64,
    settle: f64,
    h: f64,
) -> Result<f64> {
    let t_end = measure_span + settle;
    let init = adiabatic_init(omega, kappa, t_end, Anchor::End)?;
    let sol = solve_auxiliary_anchored(omega, kappa, init, t_end, h, Anchor::End)?;
    let mut worst = 0.0_f64;
    for i in 0..sol.len() {
        let t = sol.time(i);
        if t > measure_span + 1e-12 {
            break;
        }
        worst = worst.max((sol.rho()[i] - adiabatic_rho(omega, kappa, t)?).abs());
    }
    Ok(worst)
}

/// `digits` significant digits in scientific notation.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    format!("{:.*e}", digits.saturating_sub(1), v)
}
