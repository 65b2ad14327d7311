//! Dense Hermitian matrix primitives.
//!
//! Everything downstream works with small (N up to a few hundred) dense
//! complex matrices. [`HermitianMatrix`] is symmetrized on construction, and
//! [`hermitian_eig`] returns eigenpairs sorted by descending eigenvalue.
//! Matrices whose imaginary parts are all exactly zero take a real-symmetric
//! path so their eigenvectors come back purely real.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{degenerate, invalid, Error, Result};

/// Default relative PSD tolerance: eigenvalues down to `-1e-8 * λ_max` pass.
pub const DEFAULT_PSD_TOLERANCE: f64 = 1e-8;

/// Relative tolerance on `|H_ij - conj(H_ji)|` accepted by [`HermitianMatrix::new`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITERS: usize = 20_000;

/// A square complex matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Validates and symmetrizes as `(H + H^H) / 2`.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(invalid(format!("expected a non-empty square matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let n = m.nrows();
        for i in 0..n {
            for j in i..n {
                let gap = (m[(i, j)] - m[(j, i)].conj()).norm();
                if gap > HERMITIAN_TOLERANCE * scale {
                    return Err(invalid(format!("matrix is not Hermitian at ({i}, {j}): asymmetry {gap:e}")));
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without the Hermitian check. Used for iterates that are
    /// Hermitian up to round-off by construction.
    pub(crate) fn symmetrized(m: DMatrix<Complex64>) -> Self {
        let mut out = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        for i in 0..out.nrows() {
            out[(i, i)].im = 0.0;
        }
        Self { m: out }
    }

    /// Builds a real-symmetric matrix.
    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| Complex64::new(x, 0.0)))
    }

    /// The rank-one lift `h h^H`.
    pub fn outer(h: &[Complex64]) -> Self {
        let v = DVector::from_column_slice(h);
        Self::symmetrized(&v * v.adjoint())
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: DMatrix::zeros(n, n) }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: DMatrix::identity(n, n) }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = DMatrix::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `tr(self · other)`, real for Hermitian operands.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                let a = self.m[(i, j)];
                let b = other.m[(j, i)];
                acc += a.re * b.re - a.im * b.im;
            }
        }
        acc
    }

    /// `v^H H v`.
    pub fn quadratic_form(&self, v: &[Complex64]) -> f64 {
        let n = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let mut col = Complex64::new(0.0, 0.0);
            for i in 0..n {
                col += v[i].conj() * self.m[(i, j)];
            }
            acc += col * v[j];
        }
        acc.re
    }

    /// Entrywise real part, itself real-symmetric.
    pub fn real_part(&self) -> Self {
        Self { m: self.m.map(|z| Complex64::new(z.re, 0.0)) }
    }

    pub fn conj(&self) -> Self {
        Self { m: self.m.map(|z| z.conj()) }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { m: &self.m * Complex64::new(c, 0.0) }
    }

    pub fn is_real(&self) -> bool {
        self.m.iter().all(|z| z.im == 0.0)
    }

    pub fn max_imag(&self) -> f64 {
        self.m.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        Self { m: &self.m - &other.m }
    }
}

/// A Hermitian matrix whose spectrum is non-negative up to a relative tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix {
    base: HermitianMatrix,
    tolerance: f64,
}

impl PsdMatrix {
    pub fn new(base: HermitianMatrix, tolerance: f64) -> Result<Self> {
        if !(tolerance >= 0.0) {
            return Err(invalid("PSD tolerance must be non-negative"));
        }
        let eig = hermitian_eig(&base)?;
        let top = eig.eigenvalues[0].max(0.0);
        let bottom = *eig.eigenvalues.last().unwrap();
        if bottom < -tolerance * top || (top == 0.0 && bottom < 0.0) {
            return Err(invalid(format!("matrix is not PSD: smallest eigenvalue {bottom:e}, largest {top:e}")));
        }
        Ok(Self { base, tolerance })
    }

    pub fn with_default_tolerance(base: HermitianMatrix) -> Result<Self> {
        Self::new(base, DEFAULT_PSD_TOLERANCE)
    }

    /// Skips the spectral check. For matrices that are PSD by construction,
    /// e.g. eigenvalue-clipped projections.
    pub(crate) fn new_unchecked(base: HermitianMatrix, tolerance: f64) -> Self {
        Self { base, tolerance }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new_unchecked(HermitianMatrix::zeros(n), DEFAULT_PSD_TOLERANCE)
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.base
    }

    pub fn into_inner(self) -> HermitianMatrix {
        self.base
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

impl std::ops::Deref for PsdMatrix {
    type Target = HermitianMatrix;

    fn deref(&self) -> &HermitianMatrix {
        &self.base
    }
}

/// Eigenvalues in descending order with matching unit-norm eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<Complex64>,
}

impl EigDecomposition {
    /// Eigenvector `k` (0 = largest eigenvalue).
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.eigenvectors.column(k).iter().copied().collect()
    }

    /// `Q Λ Q^H`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let lambda = DMatrix::from_diagonal(&DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)),
        ));
        &self.eigenvectors * lambda * self.eigenvectors.adjoint()
    }
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues descending.
pub fn hermitian_eig(h: &HermitianMatrix) -> Result<EigDecomposition> {
    let n = h.dim();
    if h.m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    let (values, vectors): (Vec<f64>, DMatrix<Complex64>) = if h.is_real() {
        let re = h.m.map(|z| z.re);
        let eig = SymmetricEigen::try_new(re, EIG_EPS, EIG_MAX_ITERS).ok_or(Error::NumericalFailure {
            what: "real symmetric eigendecomposition did not converge".into(),
            iterations: EIG_MAX_ITERS,
        })?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(|x| Complex64::new(x, 0.0)))
    } else {
        let eig = SymmetricEigen::try_new(h.m.clone(), EIG_EPS, EIG_MAX_ITERS).ok_or(Error::NumericalFailure {
            what: "Hermitian eigendecomposition did not converge".into(),
            iterations: EIG_MAX_ITERS,
        })?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let eigenvalues = order.iter().map(|&k| values[k]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = vectors.column(src);
        let norm = col.norm();
        eigenvectors.set_column(dst, &(col / Complex64::new(norm, 0.0)));
    }
    Ok(EigDecomposition { eigenvalues, eigenvectors })
}

fn positive_trace(h: &PsdMatrix) -> Result<f64> {
    let tr = h.trace();
    if !(tr > 0.0) {
        return Err(degenerate(format!("trace must be positive, got {tr:e}")));
    }
    Ok(tr)
}

/// `λ_max(H) / tr(H)`; equals 1 exactly when `H` is rank one.
pub fn eigenvalue_ratio(h: &PsdMatrix) -> Result<f64> {
    let tr = positive_trace(h)?;
    let eig = hermitian_eig(h)?;
    Ok((eig.eigenvalues[0] / tr).min(1.0))
}

/// `(λ_1 + λ_2) / tr(H)` for a real-symmetric PSD matrix; equals 1 exactly
/// when the rank is at most two.
pub fn generalized_eigenvalue_ratio(h: &PsdMatrix) -> Result<f64> {
    if !h.is_real() {
        return Err(invalid(format!(
            "generalized ratio needs a real-symmetric matrix (max |imag| = {:e})",
            h.max_imag()
        )));
    }
    let tr = positive_trace(h)?;
    let eig = hermitian_eig(h)?;
    let top_two: f64 = eig.eigenvalues.iter().take(2).sum();
    Ok((top_two / tr).min(1.0))
}

/// `‖estimate − truth‖_F² / ‖truth‖_F²`.
pub fn normalized_frobenius_error(estimate: &HermitianMatrix, truth: &HermitianMatrix) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(invalid(format!("dimension mismatch: estimate {} vs truth {}", estimate.dim(), truth.dim())));
    }
    let denom = truth.frobenius_norm().powi(2);
    if !(denom > 0.0) {
        return Err(degenerate("truth matrix has zero Frobenius norm"));
    }
    Ok(estimate.sub(truth).frobenius_norm().powi(2) / denom)
}
