//! Classical fixed-step fourth-order Runge-Kutta.

use crate::error::Result;
use crate::linalg::{CMatrix, C64};

/// Vector-space operations the integrator needs.
pub trait OdeState: Clone {
    /// `self += a * x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn is_finite(&self) -> bool;
}

impl OdeState for CMatrix {
    fn axpy(&mut self, a: f64, x: &Self) {
        let a = C64::new(a, 0.0);
        for (s, v) in self.iter_mut().zip(x.iter()) {
            *s += a * v;
        }
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<const N: usize> OdeState for [f64; N] {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl OdeState for Vec<C64> {
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += v * a;
        }
    }

    fn is_finite(&self) -> bool {
        self.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// One step of size `h` (negative `h` integrates backwards).
pub fn step<S, F>(t: f64, y: &S, h: f64, mut f: F) -> Result<S>
where
    S: OdeState,
    F: FnMut(f64, &S) -> Result<S>,
{
    let k1 = f(t, y)?;
    let mut y2 = y.clone();
    y2.axpy(0.5 * h, &k1);
    let k2 = f(t + 0.5 * h, &y2)?;
    let mut y3 = y.clone();
    y3.axpy(0.5 * h, &k2);
    let k3 = f(t + 0.5 * h, &y3)?;
    let mut y4 = y.clone();
    y4.axpy(h, &k3);
    let k4 = f(t + h, &y4)?;

    let mut out = y.clone();
    out.axpy(h / 6.0, &k1);
    out.axpy(h / 3.0, &k2);
    out.axpy(h / 3.0, &k3);
    out.axpy(h / 6.0, &k4);
    Ok(out)
}

/// Number of uniform steps of size `h` that cover `[0, span]`.
pub fn step_count(span: f64, h: f64) -> usize {
    let n = (span / h).round();
    if n < 1.0 {
        1
    } else {
        n as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_fourth_order() {
        let solve = |h: f64| {
            let n = step_count(1.0, h);
            let mut y = [1.0_f64];
            for k in 0..n {
                y = step(k as f64 * h, &y, h, |_, y| Ok([y[0]])).unwrap();
            }
            (y[0] - 1.0_f64.exp()).abs()
        };
        let ratio = solve(0.1) / solve(0.05);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn backward_step_inverts_forward() {
        let f = |_: f64, y: &[f64; 2]| Ok([y[1], -y[0]]);
        let y0 = [1.0, 0.0];
        let y1 = step(0.0, &y0, 1e-3, f).unwrap();
        let back = step(1e-3, &y1, -1e-3, f).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-14 && back[1].abs() < 1e-14);
    }
}
