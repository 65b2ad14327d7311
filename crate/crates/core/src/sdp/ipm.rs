//! Primal-dual interior-point method for
//! `min ⟨C, X⟩ + cₗᵀx  s.t.  A(X) + Aₗ x = b,  X ⪰ 0,  x ≥ lower`
//! with one PSD block (real-symmetric or Hermitian) and a few bounded scalars.
//!
//! Infeasible-start path following with the HKM search direction and
//! Mehrotra's predictor-corrector. The constraint rows are first replaced by
//! an orthonormal basis of their row space, which drops redundant
//! equalities: overdetermined campaigns produce many of them.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::svec::{smat, svec_into, svec_len, Field};

#[derive(Debug, Clone)]
pub struct ConeProgram {
    pub psd_dim: usize,
    /// Finite lower bound per trailing scalar.
    pub scalar_lower: Vec<f64>,
    /// Columns: vectorized PSD block, then the scalars.
    pub rows: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub cost: DVector<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct IpmSettings {
    /// Required relative primal/dual infeasibility and duality gap.
    pub tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone)]
pub struct IpmOutput {
    /// Primal point in the program's column layout.
    pub z: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Interior steps stop this fraction short of the cone boundary.
const STEP_FRACTION: f64 = 0.98;
/// Iteration stops early once the error measure drops this far below `tol`.
const TARGET_FACTOR: f64 = 1e-3;
/// Rows whose component outside the span of the previous rows is this small
/// (relative to their norm) are treated as redundant.
const DEPENDENT_ROW_TOL: f64 = 1e-10;
/// Iterations without a new best error before giving up.
const STALL_ITERS: usize = 8;

struct Data<T: Field> {
    a: Vec<DMatrix<T>>,
    /// Scalar coefficients, one row per constraint.
    lin: DMatrix<f64>,
    b: DVector<f64>,
    c: DMatrix<T>,
    c_lin: DVector<f64>,
}

impl<T: Field> Data<T> {
    fn apply(&self, x: &DMatrix<T>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.lin * v;
        for (i, a) in self.a.iter().enumerate() {
            out[i] += inner(a, x);
        }
        out
    }

    fn adjoint(&self, y: &DVector<f64>) -> (DMatrix<T>, DVector<f64>) {
        let n = self.c.nrows();
        let mut m = DMatrix::<T>::zeros(n, n);
        for (a, &yi) in self.a.iter().zip(y.iter()) {
            m += a * T::from_parts(yi, 0.0);
        }
        (m, self.lin.tr_mul(y))
    }
}

/// `Re tr(A B)` for Hermitian `A`.
fn inner<T: Field>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re_part() * y.re_part() + x.im_part() * y.im_part()).sum()
}

fn herm<T: Field>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.adjoint()) * T::from_parts(0.5, 0.0)
}

/// Largest `α` with `X + α D ⪰ 0`, for positive definite `X`.
fn psd_step<T: Field>(x: &DMatrix<T>, d: &DMatrix<T>) -> f64 {
    let Some(chol) = Cholesky::new(x.clone()) else { return 0.0 };
    let l = chol.l();
    let Some(w) = l.solve_lower_triangular(d) else { return 0.0 };
    let Some(w) = l.solve_lower_triangular(&w.adjoint()) else { return 0.0 };
    let lmin = herm(&w).symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn lin_step(x: &DVector<f64>, d: &DVector<f64>) -> f64 {
    x.iter().zip(d.iter()).filter(|(_, &di)| di < 0.0).map(|(&xi, &di)| -xi / di).fold(f64::INFINITY, f64::min)
}

fn reduce<T: Field>(prog: &ConeProgram) -> Data<T> {
    let n = prog.psd_dim;
    let psd_len = svec_len::<T>(n);
    let k = prog.scalar_lower.len();
    let mut rhs = prog.rhs.clone();
    for (j, &lb) in prog.scalar_lower.iter().enumerate() {
        rhs.axpy(-lb, &prog.rows.column(psd_len + j), 1.0);
    }
    // Gram-Schmidt with one reorthogonalization pass; the same operations
    // applied to the right-hand side keep the system equivalent.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut offsets = Vec::new();
    for (r, row) in prog.rows.row_iter().enumerate() {
        let mut q = row.transpose();
        let mut beta = rhs[r];
        let norm0 = q.norm();
        for _ in 0..2 {
            for (bq, &bo) in basis.iter().zip(&offsets) {
                let c = bq.dot(&q);
                q.axpy(-c, bq, 1.0);
                beta -= c * bo;
            }
        }
        let norm = q.norm();
        if norm > DEPENDENT_ROW_TOL * norm0 {
            basis.push(q / norm);
            offsets.push(beta / norm);
        }
    }
    let m = basis.len();
    let mut a = Vec::with_capacity(m);
    let mut lin = DMatrix::zeros(m, k);
    for (r, q) in basis.iter().enumerate() {
        a.push(smat::<T>(&q.as_slice()[..psd_len], n));
        for j in 0..k {
            lin[(r, j)] = q[psd_len + j];
        }
    }
    let b = DVector::from_vec(offsets);
    let cost: Vec<f64> = prog.cost.iter().copied().collect();
    Data { a, lin, b, c: smat::<T>(&cost[..psd_len], n), c_lin: DVector::from_column_slice(&cost[psd_len..]) }
}

struct Direction<T: Field> {
    dx: DMatrix<T>,
    dxl: DVector<f64>,
    dy: DVector<f64>,
    ds: DMatrix<T>,
    dsl: DVector<f64>,
}

pub fn solve<T: Field>(prog: &ConeProgram, settings: &IpmSettings) -> IpmOutput {
    let n = prog.psd_dim;
    let psd_len = svec_len::<T>(n);
    let k = prog.scalar_lower.len();
    assert_eq!(prog.rows.ncols(), psd_len + k, "constraint width does not match the variable layout");
    assert_eq!(prog.cost.len(), psd_len + k);
    assert!(prog.scalar_lower.iter().all(|l| l.is_finite()), "scalar lower bounds must be finite");

    let data = reduce::<T>(prog);
    let m = data.b.len();
    let nu = (n + k) as f64;
    let b_norm = data.b.norm();
    let c_norm = (inner(&data.c, &data.c) + data.c_lin.norm_squared()).sqrt();

    let b_max = data.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let xi = (n as f64).sqrt().max(10.0).max(n as f64 * (1.0 + b_max));
    let eta = (n as f64).sqrt().max(10.0).max(1.0 + c_norm);
    let eye = DMatrix::<T>::identity(n, n);
    let mut x = &eye * T::from_parts(xi, 0.0);
    let mut xl = DVector::from_element(k, xi);
    let mut s = &eye * T::from_parts(eta, 0.0);
    let mut sl = DVector::from_element(k, eta);
    let mut y = DVector::<f64>::zeros(m);

    let target = settings.tol * TARGET_FACTOR;
    let mut best = (f64::INFINITY, x.clone(), xl.clone());
    let mut best_iter = 0;
    let mut iterations = 0;

    for it in 0..=settings.max_iters {
        let (aty, atyl) = data.adjoint(&y);
        let rp = &data.b - data.apply(&x, &xl);
        let rd = &data.c - &aty - &s;
        let rdl = &data.c_lin - &atyl - &sl;
        let gap = inner(&x, &s) + xl.dot(&sl);
        let mu = gap / nu;
        let pobj = inner(&data.c, &x) + data.c_lin.dot(&xl);
        let dobj = data.b.dot(&y);
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = (inner(&rd, &rd) + rdl.norm_squared()).sqrt() / (1.0 + c_norm);
        let rel_gap = gap.abs() / (1.0 + pobj.abs() + dobj.abs());
        let err = pinf.max(dinf).max(rel_gap);
        if err < best.0 {
            best = (err, x.clone(), xl.clone());
            best_iter = it;
        }
        iterations = it;
        let stalled = it >= best_iter + STALL_ITERS && best.0 <= settings.tol;
        if err <= target || stalled || it == settings.max_iters {
            break;
        }

        let Some(s_chol) = Cholesky::new(s.clone()) else { break };
        let s_inv = s_chol.inverse();
        let ratio = xl.component_div(&sl);

        let mut schur = &data.lin * DMatrix::from_diagonal(&ratio) * data.lin.transpose();
        for j in 0..m {
            let w = &x * &data.a[j] * &s_inv;
            for i in 0..=j {
                let v = inner(&data.a[i], &w);
                schur[(i, j)] += v;
                if i != j {
                    schur[(j, i)] += v;
                }
            }
        }
        let schur_chol = match Cholesky::new(schur.clone()) {
            Some(c) => c,
            None => {
                let bump = 1e-12 * schur.diagonal().amax().max(f64::MIN_POSITIVE);
                for i in 0..m {
                    schur[(i, i)] += bump;
                }
                match Cholesky::new(schur) {
                    Some(c) => c,
                    None => break,
                }
            }
        };

        let x_rd_sinv = herm(&(&x * &rd * &s_inv));
        let direction = |sigma_mu: f64, corr: Option<&Direction<T>>| -> Direction<T> {
            let mut rc = &s_inv * T::from_parts(sigma_mu, 0.0) - &x - &x_rd_sinv;
            let mut rcl = DVector::from_fn(k, |i, _| sigma_mu / sl[i] - xl[i] - ratio[i] * rdl[i]);
            if let Some(a) = corr {
                rc -= herm(&(&a.dx * &a.ds * &s_inv));
                for i in 0..k {
                    rcl[i] -= a.dxl[i] * a.dsl[i] / sl[i];
                }
            }
            let rhs = &rp - data.apply(&rc, &rcl);
            let dy = schur_chol.solve(&rhs);
            let (ady, adyl) = data.adjoint(&dy);
            let dx = rc + herm(&(&x * &ady * &s_inv));
            let dxl = rcl + ratio.component_mul(&adyl);
            Direction { dx, dxl, dy, ds: &rd - ady, dsl: &rdl - adyl }
        };
        let steps = |d: &Direction<T>, frac: f64| -> (f64, f64) {
            let ap = (frac * psd_step(&x, &d.dx).min(lin_step(&xl, &d.dxl))).min(1.0);
            let ad = (frac * psd_step(&s, &d.ds).min(lin_step(&sl, &d.dsl))).min(1.0);
            (ap, ad)
        };

        let pred = direction(0.0, None);
        let (ap, ad) = steps(&pred, 1.0);
        let x_aff = &x + &pred.dx * T::from_parts(ap, 0.0);
        let s_aff = &s + &pred.ds * T::from_parts(ad, 0.0);
        let mu_aff = (inner(&x_aff, &s_aff) + (&xl + &pred.dxl * ap).dot(&(&sl + &pred.dsl * ad))) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let d = direction(sigma * mu, Some(&pred));
        let (ap, ad) = steps(&d, STEP_FRACTION);
        if !(ap > 0.0 && ad > 0.0) {
            break;
        }
        x = herm(&(x + d.dx * T::from_parts(ap, 0.0)));
        xl += d.dxl * ap;
        y += d.dy * ad;
        s = herm(&(s + d.ds * T::from_parts(ad, 0.0)));
        sl += d.dsl * ad;
    }

    let (err, x, xl) = best;
    let mut z = vec![0.0; psd_len + k];
    svec_into(&x, &mut z[..psd_len]);
    for j in 0..k {
        z[psd_len + j] = xl[j] + prog.scalar_lower[j];
    }
    IpmOutput { z, iterations, converged: err <= settings.tol }
}
