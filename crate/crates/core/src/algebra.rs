//! Exact arithmetic in the real span of the quadratic generators.
//!
//! For real combinations A, B of K1, K2, K3 the commutator is purely
//! imaginary, `[A, B] = i C`, with C again a real combination. [`lie`] returns
//! that C using `[K1,K2] = -iK3`, `[K2,K3] = 2iK2`, `[K3,K1] = 2iK1`.

use std::ops::{Add, Mul, Neg, Sub};

/// `k1 K1 + k2 K2 + k3 K3`
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Su11 {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Su11 {
    pub const K1: Su11 = Su11 { k1: 1.0, k2: 0.0, k3: 0.0 };
    pub const K2: Su11 = Su11 { k1: 0.0, k2: 1.0, k3: 0.0 };
    pub const K3: Su11 = Su11 { k1: 0.0, k2: 0.0, k3: 1.0 };
    pub const BASIS: [Su11; 3] = [Self::K1, Self::K2, Self::K3];

    pub const fn new(k1: f64, k2: f64, k3: f64) -> Self {
        Su11 { k1, k2, k3 }
    }

    pub fn as_array(self) -> [f64; 3] {
        [self.k1, self.k2, self.k3]
    }

    /// `k1 k2 - k3^2`; the spectrum of a positive element is `sqrt(disc) (n + 1/2)`.
    pub fn discriminant(self) -> f64 {
        self.k1 * self.k2 - self.k3 * self.k3
    }

    pub fn dot(self, v: [f64; 3]) -> f64 {
        self.k1 * v[0] + self.k2 * v[1] + self.k3 * v[2]
    }
}

impl Add for Su11 {
    type Output = Su11;
    fn add(self, o: Su11) -> Su11 {
        Su11::new(self.k1 + o.k1, self.k2 + o.k2, self.k3 + o.k3)
    }
}

impl Sub for Su11 {
    type Output = Su11;
    fn sub(self, o: Su11) -> Su11 {
        Su11::new(self.k1 - o.k1, self.k2 - o.k2, self.k3 - o.k3)
    }
}

impl Neg for Su11 {
    type Output = Su11;
    fn neg(self) -> Su11 {
        Su11::new(-self.k1, -self.k2, -self.k3)
    }
}

impl Mul<Su11> for f64 {
    type Output = Su11;
    fn mul(self, v: Su11) -> Su11 {
        Su11::new(self * v.k1, self * v.k2, self * v.k3)
    }
}

/// C with `[A, B] = i C`.
pub fn lie(a: Su11, b: Su11) -> Su11 {
    let c12 = a.k1 * b.k2 - a.k2 * b.k1;
    let c23 = a.k2 * b.k3 - a.k3 * b.k2;
    let c31 = a.k3 * b.k1 - a.k1 * b.k3;
    Su11::new(2.0 * c31, 2.0 * c23, -c12)
}

/// `[L, [L, A]]` (real, since two factors of i combine to -1).
pub fn double_commutator(l: Su11, a: Su11) -> Su11 {
    -lie(l, lie(l, a))
}

/// Heisenberg-picture generator for expectations of the generators:
/// `d<K_i>/dt = sum_j M[i][j] <K_j>` for `d rho/dt = -i[H,rho] - alpha [L,[L,rho]]`.
pub fn moment_matrix(h: Su11, l: Su11, alpha: f64) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for (i, e) in Su11::BASIS.iter().enumerate() {
        // i[H,K_i] - alpha [L,[L,K_i]]
        let row = -lie(h, *e) - alpha * double_commutator(l, *e);
        m[i] = row.as_array();
    }
    m
}
