//! Isometric vectorization of real-symmetric / Hermitian matrices.
//!
//! Diagonal entries map to themselves, off-diagonal real (and, for the
//! complex field, imaginary) parts of the upper triangle are scaled by √2, so
//! the Euclidean inner product of two vectorizations equals `tr(A B)`.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::numerics::HermitianMatrix;

/// Scalar type of a PSD block: `f64` for the real-symmetric field,
/// `Complex64` for the Hermitian field.
pub trait Field: ComplexField<RealField = f64> + Copy {
    const COMPLEX: bool;
    fn from_parts(re: f64, im: f64) -> Self;
    fn re_part(self) -> f64;
    fn im_part(self) -> f64;
}

impl Field for f64 {
    const COMPLEX: bool = false;

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }

    fn re_part(self) -> f64 {
        self
    }

    fn im_part(self) -> f64 {
        0.0
    }
}

impl Field for Complex64 {
    const COMPLEX: bool = true;

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }

    fn re_part(self) -> f64 {
        self.re
    }

    fn im_part(self) -> f64 {
        self.im
    }
}

pub fn svec_len<T: Field>(n: usize) -> usize {
    if T::COMPLEX {
        n * n
    } else {
        n * (n + 1) / 2
    }
}

/// Writes the vectorization of `m` into `out`.
pub fn svec_into<T: Field>(m: &DMatrix<T>, out: &mut [f64]) {
    let n = m.nrows();
    let s = std::f64::consts::SQRT_2;
    let mut k = 0;
    for j in 0..n {
        for i in 0..j {
            let z = m[(i, j)];
            out[k] = s * z.re_part();
            k += 1;
            if T::COMPLEX {
                out[k] = s * z.im_part();
                k += 1;
            }
        }
        out[k] = m[(j, j)].re_part();
        k += 1;
    }
}

pub fn smat<T: Field>(x: &[f64], n: usize) -> DMatrix<T> {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = DMatrix::<T>::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..j {
            let re = x[k] * inv;
            k += 1;
            let im = if T::COMPLEX {
                k += 1;
                x[k - 1] * inv
            } else {
                0.0
            };
            m[(i, j)] = T::from_parts(re, im);
            m[(j, i)] = T::from_parts(re, -im);
        }
        m[(j, j)] = T::from_parts(x[k], 0.0);
        k += 1;
    }
    m
}

/// Vectorization of a Hermitian matrix in field `T` (imaginary parts are
/// dropped for the real field).
pub fn svec_of<T: Field>(h: &HermitianMatrix) -> Vec<f64> {
    let m = h.as_matrix().map(|z| T::from_parts(z.re, z.im));
    let mut out = vec![0.0; svec_len::<T>(h.dim())];
    svec_into(&m, &mut out);
    out
}

pub fn to_hermitian<T: Field>(m: &DMatrix<T>) -> HermitianMatrix {
    HermitianMatrix::symmetrized(m.map(|z| Complex64::new(z.re_part(), z.im_part())))
}

/// Projects `x` (a vectorized matrix) onto the PSD cone in place.
pub fn project_psd<T: Field>(x: &mut [f64], n: usize) {
    let m = smat::<T>(x, n);
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return;
    }
    let q = &eig.eigenvectors;
    let clipped = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| T::from_parts(l.max(0.0), 0.0)));
    let mut scaled = q.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= clipped[k];
    }
    let p = scaled * q.adjoint();
    svec_into(&p, x);
}
