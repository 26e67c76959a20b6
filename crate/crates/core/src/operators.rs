//! Truncated Fock-space representations of the canonical pair, the quadratic
//! su(1,1) generators, density matrices and expectation values.
//!
//! Units: hbar = m = 1. The ladder basis belongs to a reference oscillator of
//! frequency `omega_ref`; every operator is built directly at the working
//! dimension and truncation effects are tracked through the tail population.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, I};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const DENSITY_HERMITIAN_TOL: f64 = 1e-10;
pub const DENSITY_TRACE_TOL: f64 = 1e-9;
pub const DENSITY_PSD_TOL: f64 = -1e-8;
pub const SUPPORT_LEAK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisConfig {
    pub dim: usize,
    pub omega_ref: f64,
    pub tail_fraction: f64,
    pub tail_threshold: f64,
}

impl BasisConfig {
    pub fn new(dim: usize, omega_ref: f64) -> Result<Self> {
        let cfg = BasisConfig { dim, omega_ref, tail_fraction: 0.1, tail_threshold: 1e-8 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 8 {
            return Err(Error::config(format!("basis dimension {} is below the minimum of 8", self.dim)));
        }
        if !(self.omega_ref > 0.0 && self.omega_ref.is_finite()) {
            return Err(Error::config(format!("omega_ref must be positive, got {}", self.omega_ref)));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(Error::config(format!("tail_fraction must lie in (0,1), got {}", self.tail_fraction)));
        }
        if !(self.tail_threshold > 0.0) {
            return Err(Error::config("tail_threshold must be positive"));
        }
        Ok(())
    }

    /// Number of top levels summed into the tail population (at least one).
    pub fn tail_levels(&self) -> usize {
        ((self.tail_fraction * self.dim as f64).round() as usize).clamp(1, self.dim)
    }

    /// Default interior projection: levels `0..dim-6`.
    pub fn interior_dim(&self) -> usize {
        self.dim.saturating_sub(6)
    }
}

/// A dense operator on the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    matrix: CMatrix,
    hermitian: bool,
    bandwidth: usize,
}

impl FockOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        if !matrix.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite { t: f64::NAN });
        }
        Ok(Self::from_matrix(matrix))
    }

    pub(crate) fn from_matrix(matrix: CMatrix) -> Self {
        let hermitian = linalg::hermiticity_deviation(&matrix) <= HERMITIAN_TOL;
        let bandwidth = linalg::bandwidth(&matrix);
        FockOperator { matrix, hermitian, bandwidth }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_matrix(CMatrix::zeros(dim, dim))
    }

    /// `sum_k c_k A_k` over operators of equal dimension.
    pub fn combination(terms: &[(f64, &FockOperator)]) -> Result<Self> {
        let dim = terms.first().map(|(_, a)| a.dim()).ok_or_else(|| Error::config("empty combination"))?;
        let mut m = CMatrix::zeros(dim, dim);
        for (c, a) in terms {
            check_dim(dim, a.dim())?;
            if *c != 0.0 {
                m += a.matrix.scale(*c);
            }
        }
        Ok(Self::from_matrix(m))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn adjoint(&self) -> Self {
        FockOperator { matrix: self.matrix.adjoint(), hermitian: self.hermitian, bandwidth: self.bandwidth }
    }

    /// `self * b`
    pub fn mul_left(&self, b: &CMatrix) -> CMatrix {
        linalg::mul_banded_left(&self.matrix, self.bandwidth, b)
    }

    /// `b * self`
    pub fn mul_right(&self, b: &CMatrix) -> CMatrix {
        linalg::mul_banded_right(b, &self.matrix, self.bandwidth)
    }

    /// `[self, b]`
    pub fn commutator(&self, b: &CMatrix) -> CMatrix {
        self.mul_left(b) - self.mul_right(b)
    }

    pub fn product(&self, other: &FockOperator) -> FockOperator {
        FockOperator::from_matrix(self.mul_left(&other.matrix))
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.matrix)
    }
}

/// A validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let dev = linalg::hermiticity_deviation(&matrix);
        if dev > DENSITY_HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let tr = linalg::trace(&matrix).re;
        if (tr - 1.0).abs() > DENSITY_TRACE_TOL {
            return Err(Error::config(format!("density matrix trace {tr} differs from 1")));
        }
        let min_eig = linalg::hermitian_eigenvalues(&matrix)[0];
        if min_eig < DENSITY_PSD_TOL {
            return Err(Error::PositivityLoss { t: 0.0, min_eig });
        }
        Ok(DensityMatrix { matrix })
    }

    /// Skips validation; integrators use this and report diagnostics separately.
    pub(crate) fn from_unchecked(matrix: CMatrix) -> Self {
        DensityMatrix { matrix }
    }

    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::config("zero state vector"));
        }
        let v = psi.unscale(norm);
        Self::new(&v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }
}

/// Initial-state menu.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateSpec {
    Coherent { beta: C64 },
    Fock { n: usize },
    Thermal { mean_occupation: f64 },
    InvariantGround,
}

impl StateSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            StateSpec::Coherent { beta } if beta.norm_sqr() >= dim as f64 / 4.0 => {
                Err(Error::config(format!("|beta|^2 = {} must stay below dim/4", beta.norm_sqr())))
            }
            StateSpec::Fock { n } if 2 * n >= dim => Err(Error::config(format!("Fock index {n} must stay below dim/2"))),
            StateSpec::Thermal { mean_occupation: nbar } if !(nbar >= 0.0 && nbar < dim as f64 / 8.0) => {
                Err(Error::config(format!("mean occupation {nbar} must lie in [0, dim/8)")))
            }
            _ => Ok(()),
        }
    }
}

/// x and p in the ladder basis of the reference oscillator.
pub fn build_canonical(cfg: &BasisConfig) -> Result<(FockOperator, FockOperator)> {
    cfg.validate()?;
    let n = cfg.dim;
    let mut a = CMatrix::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    let ad = a.adjoint();
    let x = (&a + &ad).scale(1.0 / (2.0 * cfg.omega_ref).sqrt());
    let p = (&ad - &a) * (I * (cfg.omega_ref / 2.0).sqrt());
    Ok((FockOperator::from_matrix(x), FockOperator::from_matrix(p)))
}

/// K1 = p^2/2, K2 = x^2/2, K3 = (px + xp)/2.
pub fn build_su11_generators(
    x: &FockOperator,
    p: &FockOperator,
) -> Result<(FockOperator, FockOperator, FockOperator)> {
    check_dim(x.dim(), p.dim())?;
    let xm = x.matrix();
    let pm = p.matrix();
    let k1 = linalg::hermitian_part(&(pm * pm).scale(0.5));
    let k2 = linalg::hermitian_part(&(xm * xm).scale(0.5));
    let k3 = linalg::hermitian_part(&(pm * xm + xm * pm).scale(0.5));
    Ok((FockOperator::from_matrix(k1), FockOperator::from_matrix(k2), FockOperator::from_matrix(k3)))
}

/// Max-norm residuals of the three su(1,1) relations on levels `0..interior_dim`:
/// `[K1,K2] + iK3`, `[K2,K3] - 2iK2`, `[K3,K1] - 2iK1`.
pub fn check_su11_relations(
    k1: &FockOperator,
    k2: &FockOperator,
    k3: &FockOperator,
    interior_dim: usize,
) -> Result<[f64; 3]> {
    let dim = k1.dim();
    check_dim(dim, k2.dim())?;
    check_dim(dim, k3.dim())?;
    // the full dimension is accepted as the degenerate "no projection" probe
    if interior_dim + 4 > dim && interior_dim != dim {
        return Err(Error::config(format!("interior dimension {interior_dim} exceeds dim - 4 = {}", dim.saturating_sub(4))));
    }
    let (a, b, c) = (k1.matrix(), k2.matrix(), k3.matrix());
    let r1 = linalg::commutator(a, b) + c * I;
    let r2 = linalg::commutator(b, c) - b * (I * 2.0);
    let r3 = linalg::commutator(c, a) - a * (I * 2.0);
    Ok([
        linalg::interior_max_abs(&r1, interior_dim),
        linalg::interior_max_abs(&r2, interior_dim),
        linalg::interior_max_abs(&r3, interior_dim),
    ])
}

/// Builds an initial density matrix.
///
/// `invariant` is only consulted for [`StateSpec::InvariantGround`].
pub fn build_state(spec: &StateSpec, cfg: &BasisConfig, invariant: Option<&FockOperator>) -> Result<DensityMatrix> {
    cfg.validate()?;
    spec.validate(cfg.dim)?;
    let n = cfg.dim;
    match *spec {
        StateSpec::Coherent { beta } => {
            let mut amp = DVector::<C64>::zeros(n);
            let mut c = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
            for k in 0..n {
                amp[k] = c;
                c = c * beta / ((k + 1) as f64).sqrt();
            }
            let weight: f64 = amp.iter().map(|z| z.norm_sqr()).sum();
            check_leak(1.0 - weight)?;
            DensityMatrix::pure(&amp)
        }
        StateSpec::Fock { n: level } => {
            let mut m = CMatrix::zeros(n, n);
            m[(level, level)] = C64::new(1.0, 0.0);
            DensityMatrix::new(m)
        }
        StateSpec::Thermal { mean_occupation } => {
            let q = mean_occupation / (mean_occupation + 1.0);
            let pops: Vec<f64> = (0..n).map(|k| (1.0 - q) * q.powi(k as i32)).collect();
            let total: f64 = pops.iter().sum();
            check_leak(1.0 - total)?;
            let mut m = CMatrix::zeros(n, n);
            for (k, w) in pops.iter().enumerate() {
                m[(k, k)] = C64::new(w / total, 0.0);
            }
            DensityMatrix::new(m)
        }
        StateSpec::InvariantGround => {
            let inv = invariant.ok_or_else(|| Error::config("invariant_ground requires an invariant operator"))?;
            check_dim(n, inv.dim())?;
            if !inv.is_hermitian() {
                return Err(Error::NotHermitian { deviation: inv.hermiticity_deviation() });
            }
            let (_, vecs) = linalg::hermitian_eigen(inv.matrix());
            DensityMatrix::pure(&vecs[0])
        }
    }
}

fn check_leak(deficit: f64) -> Result<()> {
    if deficit.abs() > SUPPORT_LEAK_TOL {
        Err(Error::SupportLeak { deficit })
    } else {
        Ok(())
    }
}

/// Re tr[A rho] together with the discarded imaginary part.
pub fn expectation_parts(a: &FockOperator, rho: &DensityMatrix) -> Result<(f64, f64)> {
    check_dim(a.dim(), rho.dim())?;
    if !a.is_hermitian() {
        return Err(Error::NotHermitian { deviation: a.hermiticity_deviation() });
    }
    let z = linalg::trace_of_product(a.matrix(), rho.matrix());
    Ok((z.re, z.im))
}

/// Re tr[A rho]; fails when the imaginary part exceeds 1e-10.
pub fn expectation(a: &FockOperator, rho: &DensityMatrix) -> Result<f64> {
    let (re, im) = expectation_parts(a, rho)?;
    if im.abs() > 1e-10 {
        return Err(Error::ComplexExpectation { imag: im });
    }
    Ok(re)
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

/// The canonical pair and the three quadratic generators on one basis.
#[derive(Debug, Clone)]
pub struct Generators {
    pub basis: BasisConfig,
    pub x: FockOperator,
    pub p: FockOperator,
    pub k1: FockOperator,
    pub k2: FockOperator,
    pub k3: FockOperator,
}

impl Generators {
    pub fn new(basis: &BasisConfig) -> Result<Self> {
        let (x, p) = build_canonical(basis)?;
        let (k1, k2, k3) = build_su11_generators(&x, &p)?;
        Ok(Generators { basis: *basis, x, p, k1, k2, k3 })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    /// `c1 K1 + c2 K2 + c3 K3`
    pub fn quadratic(&self, c1: f64, c2: f64, c3: f64) -> FockOperator {
        let mut m = self.k1.matrix().scale(c1);
        for ((z, a), b) in m.iter_mut().zip(self.k2.matrix.iter()).zip(self.k3.matrix.iter()) {
            *z += a * c2 + b * c3;
        }
        // a real combination of Hermitian band matrices keeps both properties
        let bandwidth = self.k1.bandwidth.max(self.k2.bandwidth).max(self.k3.bandwidth);
        FockOperator { matrix: m, hermitian: true, bandwidth }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn basis(dim: usize, w: f64) -> BasisConfig {
        BasisConfig::new(dim, w).unwrap()
    }

    fn vacuum(dim: usize) -> DensityMatrix {
        build_state(&StateSpec::Fock { n: 0 }, &basis(dim, 1.0), None).unwrap()
    }

    #[test]
    fn two_level_position_matrix() {
        // dim >= 8 is enforced, so read the 2x2 corner of the ladder construction
        let (x, _) = build_canonical(&basis(8, 1.0)).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(x.matrix()[(0, 1)].re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(x.matrix()[(1, 0)].re, s, epsilon = 1e-15);
        assert_eq!(x.matrix()[(0, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn small_dimension_rejected() {
        assert!(BasisConfig::new(4, 1.0).is_err());
        assert!(BasisConfig::new(16, 0.0).is_err());
    }

    #[test]
    fn vacuum_position_variance() {
        for w in [0.5, 1.0, 3.0] {
            let (x, _) = build_canonical(&basis(12, w)).unwrap();
            let x2 = x.product(&x);
            assert_abs_diff_eq!(x2.matrix()[(0, 0)].re, 1.0 / (2.0 * w), epsilon = 1e-14);
        }
    }

    #[test]
    fn canonical_commutator_on_interior() {
        let (x, p) = build_canonical(&basis(16, 1.0)).unwrap();
        let mut c = linalg::commutator(x.matrix(), p.matrix());
        c -= CMatrix::identity(16, 16) * I;
        assert!(linalg::interior_max_abs(&c, 15) <= 1e-12);
        // the last level carries the truncation defect
        assert!(c[(15, 15)].norm() > 1.0);
    }

    #[test]
    fn generators_are_hermitian() {
        let g = Generators::new(&basis(40, 1.3)).unwrap();
        for op in [&g.x, &g.p, &g.k1, &g.k2, &g.k3] {
            assert!(op.hermiticity_deviation() <= 1e-14);
            assert!(op.is_hermitian());
        }
        assert_eq!(g.k1.bandwidth(), 2);
    }

    #[test]
    fn vacuum_generator_expectations() {
        let g = Generators::new(&basis(20, 1.0)).unwrap();
        let v = vacuum(20);
        assert_abs_diff_eq!(expectation(&g.k1, &v).unwrap(), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(expectation(&g.k3, &v).unwrap(), 0.0, epsilon = 1e-14);
        let g2 = Generators::new(&basis(20, 2.0)).unwrap();
        assert_abs_diff_eq!(expectation(&g2.k2, &v).unwrap(), 0.125, epsilon = 1e-14);
    }

    #[test]
    fn su11_relations_interior_and_edge() {
        let g = Generators::new(&basis(32, 1.0)).unwrap();
        let r = check_su11_relations(&g.k1, &g.k2, &g.k3, 26).unwrap();
        assert!(r.iter().all(|&v| v <= 1e-11), "{r:?}");

        let g8 = Generators::new(&basis(8, 1.0)).unwrap();
        let r8 = check_su11_relations(&g8.k1, &g8.k2, &g8.k3, 8).unwrap();
        assert!(r8[0] > 1e-6);

        let flipped = FockOperator::combination(&[(-1.0, &g.k2)]).unwrap();
        let rf = check_su11_relations(&g.k1, &flipped, &g.k3, 26).unwrap();
        assert!(rf[0] > 1.0 && rf[1] < 1e-11);

        assert!(check_su11_relations(&g.k1, &g.k2, &g.k3, 30).is_err());
    }

    #[test]
    fn simple_states() {
        let cfg = basis(20, 1.0);
        let coh = build_state(&StateSpec::Coherent { beta: C64::new(0.0, 0.0) }, &cfg, None).unwrap();
        let th = build_state(&StateSpec::Thermal { mean_occupation: 0.0 }, &cfg, None).unwrap();
        let vac = vacuum(20);
        assert!(linalg::max_abs(&(coh.matrix() - vac.matrix())) < 1e-15);
        assert!(linalg::max_abs(&(th.matrix() - vac.matrix())) < 1e-15);
    }

    #[test]
    fn coherent_state_moments() {
        let cfg = basis(30, 1.0);
        let g = Generators::new(&cfg).unwrap();
        let rho = build_state(&StateSpec::Coherent { beta: C64::new(0.5f64.sqrt(), 0.0) }, &cfg, None).unwrap();
        assert_abs_diff_eq!(expectation(&g.x, &rho).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(expectation(&g.p, &rho).unwrap(), 0.0, epsilon = 1e-12);
        let h = FockOperator::combination(&[(1.0, &g.k1), (1.0, &g.k2)]).unwrap();
        assert_abs_diff_eq!(expectation(&h, &rho).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(expectation(&h, &vacuum(30)).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(expectation(&FockOperator::identity(30), &rho).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn thermal_leak_detected() {
        // q^N = (7/8)^60 ~ 3e-4 trace deficit
        let cfg = basis(60, 1.0);
        let err = build_state(&StateSpec::Thermal { mean_occupation: 7.0 }, &cfg, None).unwrap_err();
        assert!(matches!(err, Error::SupportLeak { .. }));
    }

    #[test]
    fn invariant_ground_is_lowest_eigenvector() {
        let cfg = basis(24, 1.0);
        let g = Generators::new(&cfg).unwrap();
        let h = g.quadratic(1.0, 1.0, 0.0);
        let rho = build_state(&StateSpec::InvariantGround, &cfg, Some(&h)).unwrap();
        assert_abs_diff_eq!(expectation(&h, &rho).unwrap(), 0.5, epsilon = 1e-12);
        assert!(build_state(&StateSpec::InvariantGround, &cfg, None).is_err());
    }

    #[test]
    fn state_preconditions() {
        assert!(StateSpec::Fock { n: 10 }.validate(20).is_err());
        assert!(StateSpec::Coherent { beta: C64::new(3.0, 0.0) }.validate(20).is_err());
        assert!(StateSpec::Thermal { mean_occupation: 3.0 }.validate(20).is_err());
    }

    #[test]
    fn non_hermitian_observable_rejected() {
        let mut m = CMatrix::zeros(10, 10);
        m[(0, 1)] = C64::new(1.0, 0.0);
        let a = FockOperator::new(m).unwrap();
        assert!(matches!(expectation(&a, &vacuum(10)), Err(Error::NotHermitian { .. })));
    }

    proptest! {
        #[test]
        fn states_satisfy_density_invariants(re in -1.5f64..1.5, im in -1.5f64..1.5, n in 0usize..10, nbar in 0.0f64..0.4) {
            let cfg = basis(24, 1.0);
            for spec in [StateSpec::Coherent { beta: C64::new(re, im) }, StateSpec::Fock { n }, StateSpec::Thermal { mean_occupation: nbar }] {
                let rho = build_state(&spec, &cfg, None).unwrap();
                prop_assert!(linalg::hermiticity_deviation(rho.matrix()) <= DENSITY_HERMITIAN_TOL);
                prop_assert!((linalg::trace(rho.matrix()).re - 1.0).abs() <= DENSITY_TRACE_TOL);
                prop_assert!(linalg::hermitian_eigenvalues(rho.matrix())[0] >= DENSITY_PSD_TOL);
            }
        }

        #[test]
        fn expectation_is_linear(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, re in -1.0f64..1.0) {
            let cfg = basis(20, 1.0);
            let g = Generators::new(&cfg).unwrap();
            let rho = build_state(&StateSpec::Coherent { beta: C64::new(re, 0.3) }, &cfg, None).unwrap();
            let comb = FockOperator::combination(&[(c1, &g.k1), (c2, &g.x)]).unwrap();
            let lhs = expectation(&comb, &rho).unwrap();
            let rhs = c1 * expectation(&g.k1, &rho).unwrap() + c2 * expectation(&g.x, &rho).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
            // K1 is positive semidefinite
            prop_assert!(expectation(&g.k1, &rho).unwrap() >= -1e-9);
        }
    }
}
