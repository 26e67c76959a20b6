//! Dense complex matrix helpers with band-aware products.
//!
//! Every operator built from the quadratic generators is banded in the Fock
//! basis (bandwidth 2), so products against a dense density matrix cost
//! O(N^2 w) instead of O(N^3). Matrices are nalgebra column-major storage.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Largest |i - j| with a nonzero entry.
pub fn bandwidth(m: &CMatrix) -> usize {
    let n = m.nrows();
    let mut bw = 0;
    for j in 0..m.ncols() {
        for i in 0..n {
            let z = m[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                bw = bw.max(i.abs_diff(j));
            }
        }
    }
    bw
}

/// `a * b` where `a` has the given bandwidth.
pub fn mul_banded_left(a: &CMatrix, bw: usize, b: &CMatrix) -> CMatrix {
    let n = a.nrows();
    if 4 * bw >= n {
        return a * b;
    }
    let m = b.ncols();
    let mut out = CMatrix::zeros(n, m);
    let b_s = b.as_slice();
    let o_s = out.as_mut_slice();
    // out[i, j] += a[i, i + d] b[i + d, j], one diagonal offset d at a time so
    // the inner loop runs over whole columns.
    let mut diag = vec![C64::new(0.0, 0.0); n];
    for d in -(bw as isize)..=(bw as isize) {
        let (r0, r1) = if d >= 0 { (0, n - d as usize) } else { ((-d) as usize, n) };
        let mut any = false;
        for i in r0..r1 {
            diag[i] = a[(i, (i as isize + d) as usize)];
            any |= diag[i].re != 0.0 || diag[i].im != 0.0;
        }
        if !any {
            continue;
        }
        let k0 = (r0 as isize + d) as usize;
        for j in 0..m {
            let bcol = &b_s[j * n + k0..j * n + k0 + (r1 - r0)];
            let ocol = &mut o_s[j * n + r0..j * n + r1];
            for ((o, &av), &bv) in ocol.iter_mut().zip(&diag[r0..r1]).zip(bcol) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `b * a` where `a` has the given bandwidth.
pub fn mul_banded_right(b: &CMatrix, a: &CMatrix, bw: usize) -> CMatrix {
    let n = a.nrows();
    if 4 * bw >= n {
        return b * a;
    }
    let r = b.nrows();
    let mut out = CMatrix::zeros(r, n);
    let a_s = a.as_slice();
    let b_s = b.as_slice();
    let o_s = out.as_mut_slice();
    for j in 0..n {
        let lo = j.saturating_sub(bw);
        let hi = (j + bw + 1).min(n);
        let ocol = &mut o_s[j * r..(j + 1) * r];
        for k in lo..hi {
            let akj = a_s[j * n + k];
            if akj.re == 0.0 && akj.im == 0.0 {
                continue;
            }
            let bcol = &b_s[k * r..(k + 1) * r];
            for (o, &bv) in ocol.iter_mut().zip(bcol) {
                *o += bv * akj;
            }
        }
    }
    out
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// max |A - A^dagger|
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm_sqr());
        }
    }
    dev.sqrt()
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Max-norm of the top-left `k x k` block.
pub fn interior_max_abs(m: &CMatrix, k: usize) -> f64 {
    let k = k.min(m.nrows()).min(m.ncols());
    let mut best = 0.0_f64;
    for j in 0..k {
        for i in 0..k {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// tr[a b] without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Ascending eigenvalues of a Hermitian matrix (the Hermitian part is used).
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Ascending eigenpairs of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, Vec<DVector<C64>>) {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    (vals, vecs)
}

/// <v| m |v>
pub fn quadratic_form(m: &CMatrix, v: &DVector<C64>) -> C64 {
    v.dotc(&(m * v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(n: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(n, n, |_, _| C64::new(next(), next()))
    }

    fn banded(n: usize, bw: usize, seed: u64) -> CMatrix {
        let full = pseudo_random(n, seed);
        CMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) <= bw { full[(i, j)] } else { C64::new(0.0, 0.0) })
    }

    #[test]
    fn banded_products_match_dense() {
        let a = banded(24, 2, 7);
        let b = pseudo_random(24, 11);
        assert_eq!(bandwidth(&a), 2);
        assert!(max_abs(&(mul_banded_left(&a, 2, &b) - &a * &b)) < 1e-13);
        assert!(max_abs(&(mul_banded_right(&b, &a, 2) - &b * &a)) < 1e-13);
    }

    #[test]
    fn eigen_sorted_ascending() {
        let m = pseudo_random(6, 3);
        let h = hermitian_part(&m);
        let vals = hermitian_eigenvalues(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let (v2, vecs) = hermitian_eigen(&h);
        for (lam, v) in v2.iter().zip(&vecs) {
            assert!((quadratic_form(&h, v).re - lam).abs() < 1e-12);
        }
    }
}
