//! Hamiltonian and Lindbladian assembly, and the three evolution backends:
//! density matrices, adjoint observables and closed moment systems.

pub mod adjoint;
pub mod evolve;
pub mod moments;

use crate::algebra::Su11;
use crate::auxiliary::ErmakovSolution;
use crate::error::{Error, Result};
use crate::operators::{BasisConfig, FockOperator, Generators};
use crate::schedule::Schedule;

pub use adjoint::{evolve_adjoint_observable, AdjointTrajectory};
pub use evolve::{
    adjoint_rhs, evolve_density, evolve_density_with, expectation_track, lindblad_rhs, state_diagnostics, EvolveOptions,
    StateDiagnostics, Trajectory, POSITIVITY_ABORT, UNDERFLOW_FLOOR,
};
pub use moments::{
    evolve_first_moments, evolve_su11_moments, first_moment_residual, FirstMomentSeries, MomentVector,
    Su11MomentSeries,
};

/// Which closed-form solution of the invariance conditions fixes the
/// Lindbladian.
///
/// `AntiDamped` uses `alpha = 4 kappa rho^4 / ((rho rho')^2 + 4)`,
/// `a2 = rho'^2/(2 rho^2) + rho^-4`, `a3 = -rho'/(2 rho)` together with the
/// anti-damped auxiliary equation. `Commuting` uses `alpha = kappa rho^4`,
/// `a2 = rho'^2/rho^2 + rho^-4`, `a3 = -rho'/rho` with the undamped auxiliary
/// equation; there `L = I / rho^2` commutes with the invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    #[default]
    AntiDamped,
    Commuting,
}

impl Branch {
    /// Friction entering the auxiliary equation for a physical friction `kappa`.
    pub fn auxiliary_kappa(self, kappa: &Schedule) -> Schedule {
        match self {
            Branch::AntiDamped => kappa.clone(),
            Branch::Commuting => Schedule::constant(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladCoefficients {
    pub alpha: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub t: f64,
}

impl LindbladCoefficients {
    pub fn from_auxiliary(branch: Branch, rho: f64, rhodot: f64, kappa: f64, t: f64) -> Result<Self> {
        if kappa < 0.0 {
            return Err(Error::NegativeFriction { t, value: kappa });
        }
        let r2 = rho * rho;
        let r4 = r2 * r2;
        let c = match branch {
            Branch::AntiDamped => LindbladCoefficients {
                alpha: 4.0 * kappa * r4 / ((rho * rhodot).powi(2) + 4.0),
                a1: 1.0,
                a2: rhodot * rhodot / (2.0 * r2) + 1.0 / r4,
                a3: -rhodot / (2.0 * rho),
                t,
            },
            Branch::Commuting => LindbladCoefficients {
                alpha: kappa * r4,
                a1: 1.0,
                a2: rhodot * rhodot / r2 + 1.0 / r4,
                a3: -rhodot / rho,
                t,
            },
        };
        Ok(c)
    }

    /// `a1 K1 + a2 K2 + a3 K3`
    pub fn lindbladian(&self) -> Su11 {
        Su11::new(self.a1, self.a2, self.a3)
    }

    /// `alpha (a2 - a3^2)`, which reproduces the friction coefficient.
    pub fn friction(&self) -> f64 {
        self.alpha * (self.a2 - self.a3 * self.a3)
    }
}

/// Coefficients of the anti-damped construction at `t`.
pub fn coefficients_at(sol: &ErmakovSolution, kappa: &Schedule, t: f64) -> Result<LindbladCoefficients> {
    coefficients_for(Branch::AntiDamped, sol, kappa, t)
}

pub fn coefficients_for(branch: Branch, sol: &ErmakovSolution, kappa: &Schedule, t: f64) -> Result<LindbladCoefficients> {
    let k = kappa.value(t)?;
    if k < 0.0 {
        return Err(Error::NegativeFriction { t, value: k });
    }
    let (rho, rhodot, _) = sol.eval(t)?;
    LindbladCoefficients::from_auxiliary(branch, rho, rhodot, k, t)
}

/// One dissipative channel `alpha (L^dag L rho + rho L^dag L - 2 L rho L^dag)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dissipator {
    pub alpha: f64,
    pub op: FockOperator,
}

/// A time-dependent generator in Lindblad form.
pub trait LindbladModel: Sync {
    fn basis(&self) -> &BasisConfig;
    fn hamiltonian_at(&self, t: f64) -> Result<FockOperator>;
    /// Every returned `alpha` is non-negative.
    fn dissipators_at(&self, t: f64) -> Result<Vec<Dissipator>>;
}

/// `H = K1 + omega^2 K2` with the single Hermitian channel
/// `L = K1 + a2 K2 + a3 K3` derived from the auxiliary solution.
#[derive(Debug, Clone)]
pub struct OscillatorModel {
    generators: Generators,
    omega: Schedule,
    kappa: Schedule,
    sol: ErmakovSolution,
    branch: Branch,
    a3_sign: f64,
    dissipative: bool,
}

pub fn assemble_model(
    omega: &Schedule,
    kappa: &Schedule,
    sol: &ErmakovSolution,
    generators: &Generators,
    branch: Branch,
) -> Result<OscillatorModel> {
    generators.basis.validate()?;
    Ok(OscillatorModel {
        generators: generators.clone(),
        omega: omega.clone(),
        kappa: kappa.clone(),
        sol: sol.clone(),
        branch,
        a3_sign: 1.0,
        dissipative: !kappa.is_identically_zero(),
    })
}

impl OscillatorModel {
    pub fn generators(&self) -> &Generators {
        &self.generators
    }

    pub fn omega(&self) -> &Schedule {
        &self.omega
    }

    pub fn kappa(&self) -> &Schedule {
        &self.kappa
    }

    pub fn solution(&self) -> &ErmakovSolution {
        &self.sol
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// Copy whose Lindbladian carries `-a3` in place of `a3`.
    pub fn with_flipped_a3(&self) -> Self {
        let mut m = self.clone();
        m.a3_sign = -m.a3_sign;
        m
    }

    pub fn coefficients_at(&self, t: f64) -> Result<LindbladCoefficients> {
        let mut c = coefficients_for(self.branch, &self.sol, &self.kappa, t)?;
        c.a3 *= self.a3_sign;
        Ok(c)
    }

    pub fn hamiltonian_su11(&self, t: f64) -> Result<Su11> {
        let w = self.omega.value(t)?;
        Ok(Su11::new(1.0, w * w, 0.0))
    }

    /// `(H, L, alpha)` in generator coordinates.
    pub fn su11_at(&self, t: f64) -> Result<(Su11, Su11, f64)> {
        let h = self.hamiltonian_su11(t)?;
        if !self.dissipative {
            return Ok((h, Su11::default(), 0.0));
        }
        let c = self.coefficients_at(t)?;
        Ok((h, c.lindbladian(), c.alpha))
    }

    fn fock(&self, v: Su11) -> FockOperator {
        self.generators.quadratic(v.k1, v.k2, v.k3)
    }
}

impl LindbladModel for OscillatorModel {
    fn basis(&self) -> &BasisConfig {
        &self.generators.basis
    }

    fn hamiltonian_at(&self, t: f64) -> Result<FockOperator> {
        Ok(self.fock(self.hamiltonian_su11(t)?))
    }

    fn dissipators_at(&self, t: f64) -> Result<Vec<Dissipator>> {
        if !self.dissipative {
            return Ok(Vec::new());
        }
        let c = self.coefficients_at(t)?;
        if c.alpha == 0.0 {
            return Ok(Vec::new());
        }
        Ok(vec![Dissipator { alpha: c.alpha, op: self.fock(c.lindbladian()) }])
    }
}

/// Time-independent model with arbitrary channels (non-Hermitian `L` allowed).
#[derive(Debug, Clone)]
pub struct ConstantModel {
    basis: BasisConfig,
    hamiltonian: FockOperator,
    dissipators: Vec<Dissipator>,
}

impl ConstantModel {
    pub fn new(basis: BasisConfig, hamiltonian: FockOperator, dissipators: Vec<Dissipator>) -> Result<Self> {
        basis.validate()?;
        if !hamiltonian.is_hermitian() {
            return Err(Error::NotHermitian { deviation: hamiltonian.hermiticity_deviation() });
        }
        crate::operators::check_dim(basis.dim, hamiltonian.dim())?;
        for d in &dissipators {
            crate::operators::check_dim(basis.dim, d.op.dim())?;
            if !(d.alpha >= 0.0) {
                return Err(Error::NegativeFriction { t: 0.0, value: d.alpha });
            }
        }
        Ok(ConstantModel { basis, hamiltonian, dissipators })
    }
}

impl LindbladModel for ConstantModel {
    fn basis(&self) -> &BasisConfig {
        &self.basis
    }

    fn hamiltonian_at(&self, _t: f64) -> Result<FockOperator> {
        Ok(self.hamiltonian.clone())
    }

    fn dissipators_at(&self, _t: f64) -> Result<Vec<Dissipator>> {
        Ok(self.dissipators.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auxiliary::{solve_auxiliary, ErmakovInit};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn flat(rho: f64) -> ErmakovSolution {
        ErmakovSolution::from_samples(0.0, 1.0, vec![rho; 30], vec![0.0; 30], vec![0.0; 30]).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        let c = coefficients_at(&flat(1.0), &Schedule::constant(0.1), 1.0).unwrap();
        assert_abs_diff_eq!(c.alpha, 0.1, epsilon = 1e-15);
        assert_eq!((c.a1, c.a2, c.a3), (1.0, 1.0, 0.0));

        let c = coefficients_at(&flat(2f64.powf(-0.5)), &Schedule::constant(0.2), 3.0).unwrap();
        assert_abs_diff_eq!(c.alpha, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(c.a2, 4.0, epsilon = 1e-13);
        assert_abs_diff_eq!(c.alpha * c.a2, 0.2, epsilon = 1e-14);

        let c = LindbladCoefficients::from_auxiliary(Branch::AntiDamped, 1.7, -0.3, 0.0, 0.0).unwrap();
        assert_eq!(c.alpha, 0.0);
        assert!(matches!(
            coefficients_at(&flat(1.0), &Schedule::constant(-0.1), 0.0),
            Err(Error::NegativeFriction { .. })
        ));
    }

    proptest! {
        #[test]
        fn friction_identity(rho in 0.2f64..3.0, rhodot in -3.0f64..3.0, kappa in 0.0f64..2.0) {
            for branch in [Branch::AntiDamped, Branch::Commuting] {
                let c = LindbladCoefficients::from_auxiliary(branch, rho, rhodot, kappa, 0.0).unwrap();
                prop_assert!((c.friction() - kappa).abs() <= 1e-12 * (1.0 + kappa));
                prop_assert!(c.alpha >= 0.0);
                prop_assert!(c.a2 - c.a3 * c.a3 > 0.0);
            }
        }
    }

    #[test]
    fn assembled_operators() {
        let g = Generators::new(&BasisConfig::new(20, 1.0).unwrap()).unwrap();
        let m = assemble_model(&Schedule::constant(1.0), &Schedule::constant(0.1), &flat(1.0), &g, Branch::AntiDamped)
            .unwrap();
        let h = m.hamiltonian_at(2.0).unwrap();
        let d = m.dissipators_at(2.0).unwrap();
        assert_eq!(d.len(), 1);
        assert_abs_diff_eq!(d[0].alpha, 0.1, epsilon = 1e-15);
        assert!(crate::linalg::max_abs(&(h.matrix() - d[0].op.matrix())) < 1e-15);
        assert!(h.is_hermitian() && d[0].op.is_hermitian());

        let w2 = Schedule::constant(2.0);
        let m2 = assemble_model(&w2, &Schedule::constant(0.3), &flat(2f64.powf(-0.5)), &g, Branch::AntiDamped).unwrap();
        let expected = g.quadratic(1.0, 4.0, 0.0);
        assert!(crate::linalg::max_abs(&(m2.hamiltonian_at(0.0).unwrap().matrix() - expected.matrix())) < 1e-14);
        let l2 = &m2.dissipators_at(0.0).unwrap()[0].op;
        assert!(crate::linalg::max_abs(&(l2.matrix() - expected.matrix())) < 1e-12);

        let free = assemble_model(&Schedule::constant(1.0), &Schedule::constant(0.0), &flat(1.0), &g, Branch::AntiDamped)
            .unwrap();
        assert!(free.dissipators_at(1.0).unwrap().is_empty());
    }

    #[test]
    fn commuting_lindbladian_is_scaled_invariant() {
        let w = Schedule::sinusoid(1.0, 0.2, 0.1, 0.0);
        let sol = solve_auxiliary(&w, &Schedule::constant(0.0), ErmakovInit::new(1.1, 0.2).unwrap(), 2.0, 1e-2).unwrap();
        let c = coefficients_for(Branch::Commuting, &sol, &Schedule::constant(0.1), 1.0).unwrap();
        let (r, rd, _) = sol.eval(1.0).unwrap();
        let inv = Su11::new(r * r, rd * rd + 1.0 / (r * r), -r * rd);
        let scaled = (1.0 / (r * r)) * inv;
        assert!((c.lindbladian() - scaled).as_array().iter().all(|v| v.abs() < 1e-14));
    }
}
