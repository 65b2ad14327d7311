//! The two convex programs behind the estimators.
//!
//! * The normalized ratio subproblem: given a fixed direction matrix `C`,
//!   maximize `tr(G C)` over PSD `G` with `tr(G) = 1` and
//!   `tr(G V_t) = p_t γ`, `γ > 0`. This is the Charnes–Cooper form of
//!   maximizing `tr(H C) / tr(H)` under the power constraints, and the
//!   maximizer is recovered as `H = G / γ`.
//! * Trace minimization: minimize `tr(H)` over PSD `H` with `tr(H V_t) = p_t`.
//!
//! Both are solved by the interior-point method in [`ipm`] after rescaling
//! the powers so their median is 1; raw powers are around 1e-9 W. Residuals
//! reported on solutions are in those rescaled units.

mod ipm;
pub mod svec;

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::measurement::Campaign;
use crate::numerics::{HermitianMatrix, PsdMatrix, DEFAULT_PSD_TOLERANCE};
use ipm::{ConeProgram, IpmSettings};
use svec::{smat, svec_len, svec_of, to_hermitian, Field};

/// Floor on the rescaled `γ`; hitting it means no positive-trace solution.
pub const GAMMA_FLOOR: f64 = 1e-12;

/// Which PSD cone the variable lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    ComplexHermitian,
    RealSymmetric,
}

impl FieldKind {
    /// Binary reflections only see the real part of the channel matrix.
    pub fn for_bits(bits: u32) -> Self {
        if bits == 1 {
            FieldKind::RealSymmetric
        } else {
            FieldKind::ComplexHermitian
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSettings {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self { tol: 1e-7, max_iters: 100 }
    }
}

impl SdpSettings {
    fn ipm(&self) -> IpmSettings {
        IpmSettings { tol: self.tol, max_iters: self.max_iters }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

/// One power constraint `tr(H A) = power`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpConstraint {
    pub a: HermitianMatrix,
    pub power: f64,
}

/// The normalized ratio subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSdpProblem {
    pub field: FieldKind,
    /// `C` in `max tr(G C)`. For the real field only its real part is used.
    pub objective: HermitianMatrix,
    pub constraints: Vec<SdpConstraint>,
    /// Allowed `|tr(H A_t) − p_t|` in watts; 0 for exact equality.
    pub slack: f64,
}

impl LinearSdpProblem {
    pub fn from_campaign(campaign: &Campaign, objective: HermitianMatrix, field: FieldKind) -> Self {
        Self { field, objective, constraints: campaign_constraints(campaign), slack: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn validate(&self) -> Result<()> {
        validate_constraints(&self.constraints, self.dim(), self.slack)
    }
}

pub fn campaign_constraints(campaign: &Campaign) -> Vec<SdpConstraint> {
    campaign
        .records
        .iter()
        .map(|r| SdpConstraint { a: HermitianMatrix::outer(r.reflection.entries()), power: r.power })
        .collect()
}

fn validate_constraints(constraints: &[SdpConstraint], dim: usize, slack: f64) -> Result<()> {
    if constraints.is_empty() {
        return Err(invalid("SDP needs at least one power constraint"));
    }
    for (t, c) in constraints.iter().enumerate() {
        if c.a.dim() != dim {
            return Err(invalid(format!("constraint {t} has dimension {}, expected {dim}", c.a.dim())));
        }
        if !(c.power >= 0.0 && c.power.is_finite()) {
            return Err(invalid(format!("constraint {t} has invalid power {}", c.power)));
        }
    }
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(invalid("constraint slack must be non-negative"));
    }
    Ok(())
}

/// Median of the positive powers; 1 if there are none.
fn power_scale(constraints: &[SdpConstraint]) -> f64 {
    let mut p: Vec<f64> = constraints.iter().map(|c| c.power).filter(|&p| p > 0.0).collect();
    if p.is_empty() {
        return 1.0;
    }
    p.sort_by(f64::total_cmp);
    let m = p.len();
    if m % 2 == 1 {
        p[m / 2]
    } else {
        0.5 * (p[m / 2 - 1] + p[m / 2])
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Normalized matrix, `tr(G) = 1`.
    pub g: PsdMatrix,
    /// In original power units: `H = G / γ`.
    pub gamma: f64,
    pub objective_value: f64,
    /// Largest constraint violation `|tr(G A_t) − p_t γ|` with powers rescaled to median 1
    /// (beyond the slack band when one is set).
    pub residual: f64,
    pub iterations: usize,
    pub status: SdpStatus,
}

impl SdpSolution {
    /// `H = G / γ`.
    pub fn h(&self) -> HermitianMatrix {
        self.g.scaled(1.0 / self.gamma)
    }
}

/// Shared layout: PSD block, then `extra` scalars, then the ± slack pairs.
struct Layout {
    psd_len: usize,
    extra: usize,
    t: usize,
    slack: bool,
}

impl Layout {
    fn nvar(&self) -> usize {
        self.psd_len + self.extra + if self.slack { 2 * self.t } else { 0 }
    }

    fn slack_lower(&self) -> Vec<f64> {
        if self.slack {
            vec![0.0; 2 * self.t]
        } else {
            Vec::new()
        }
    }
}

fn constraint_svecs<T: Field>(constraints: &[SdpConstraint]) -> Vec<Vec<f64>> {
    constraints.iter().map(|c| svec_of::<T>(&c.a)).collect()
}

/// Maximizes `tr(G C)` subject to `tr(G) = 1`, `tr(G A_t) = p_t γ`, `G ⪰ 0`, `γ > 0`.
pub fn solve_ratio_subproblem(problem: &LinearSdpProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    problem.validate()?;
    match problem.field {
        FieldKind::ComplexHermitian => ratio_impl::<Complex64>(problem, settings),
        FieldKind::RealSymmetric => ratio_impl::<f64>(problem, settings),
    }
}

fn ratio_impl<T: Field>(problem: &LinearSdpProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    let n = problem.dim();
    let scale = power_scale(&problem.constraints);
    let powers: Vec<f64> = problem.constraints.iter().map(|c| c.power / scale).collect();
    let delta = problem.slack / scale;
    let layout = Layout { psd_len: svec_len::<T>(n), extra: 1, t: powers.len(), slack: delta > 0.0 };
    let gamma_col = layout.psd_len;
    let nvar = layout.nvar();
    let a_rows = constraint_svecs::<T>(&problem.constraints);

    let n_rows = 1 + if layout.slack { 2 * layout.t } else { layout.t };
    let mut rows = DMatrix::zeros(n_rows, nvar);
    let mut rhs = DVector::zeros(n_rows);
    let id = svec_of::<T>(&HermitianMatrix::identity(n));
    for (k, &v) in id.iter().enumerate() {
        rows[(0, k)] = v;
    }
    rhs[0] = 1.0;
    for (t, a) in a_rows.iter().enumerate() {
        if layout.slack {
            let (up, lo) = (1 + 2 * t, 2 + 2 * t);
            for (k, &v) in a.iter().enumerate() {
                rows[(up, k)] = v;
                rows[(lo, k)] = v;
            }
            rows[(up, gamma_col)] = -(powers[t] + delta);
            rows[(lo, gamma_col)] = -(powers[t] - delta);
            rows[(up, gamma_col + 1 + t)] = 1.0;
            rows[(lo, gamma_col + 1 + layout.t + t)] = -1.0;
        } else {
            for (k, &v) in a.iter().enumerate() {
                rows[(1 + t, k)] = v;
            }
            rows[(1 + t, gamma_col)] = -powers[t];
        }
    }
    let objective = if T::COMPLEX { problem.objective.clone() } else { problem.objective.real_part() };
    let c = svec_of::<T>(&objective);
    let mut cost = DVector::zeros(nvar);
    for (k, &v) in c.iter().enumerate() {
        cost[k] = -v;
    }
    let mut lower = vec![GAMMA_FLOOR];
    lower.extend(layout.slack_lower());
    let prog = ConeProgram { psd_dim: n, scalar_lower: lower, rows, rhs, cost };

    let out = ipm::solve::<T>(&prog, &settings.ipm());

    let mut g = smat::<T>(&out.z[..layout.psd_len], n);
    let tr = (0..n).map(|i| g[(i, i)].re_part()).sum::<f64>();
    if !(tr > 0.0) {
        return Err(Error::NumericalFailure {
            what: "ratio subproblem returned a zero matrix".into(),
            iterations: out.iterations,
        });
    }
    g /= T::from_parts(tr, 0.0);
    let gamma_scaled = out.z[gamma_col] / tr;
    let g_vec = {
        let mut v = vec![0.0; layout.psd_len];
        svec::svec_into(&g, &mut v);
        v
    };
    let residual = a_rows
        .iter()
        .zip(&powers)
        .map(|(a, &p)| {
            let lhs: f64 = a.iter().zip(&g_vec).map(|(x, y)| x * y).sum();
            ((lhs - p * gamma_scaled).abs() - delta * gamma_scaled).max(0.0)
        })
        .fold(0.0, f64::max);
    let g = to_hermitian(&g);
    let objective_value = g.trace_product(&objective);
    // Within solver accuracy of the floor.
    let at_floor = out.z[gamma_col] <= GAMMA_FLOOR + 0.01 * settings.tol;
    let status = if at_floor || residual > 10.0 * settings.tol {
        SdpStatus::Infeasible
    } else if out.converged {
        SdpStatus::Optimal
    } else {
        SdpStatus::MaxIters
    };
    Ok(SdpSolution {
        g: PsdMatrix::new_unchecked(g, DEFAULT_PSD_TOLERANCE),
        gamma: gamma_scaled / scale,
        objective_value,
        residual,
        iterations: out.iterations,
        status,
    })
}

#[derive(Debug, Clone)]
pub struct TraceMinSolution {
    pub h: PsdMatrix,
    /// Largest `|tr(H A_t) − p_t|` in rescaled power units (beyond the slack band).
    pub residual: f64,
    pub iterations: usize,
    pub status: SdpStatus,
}

/// `min tr(H)` over PSD `H` with `tr(H V_t) = p_t`, the convex relaxation
/// used as the starting point of the estimators and as a baseline.
pub fn trace_min_init(campaign: &Campaign, field: FieldKind, settings: &SdpSettings) -> Result<TraceMinSolution> {
    trace_min(&campaign_constraints(campaign), campaign.dim, field, 0.0, settings)
}

/// Trace minimization over explicit constraints, with an optional slack band
/// `|tr(H A_t) − p_t| ≤ slack` (watts).
pub fn trace_min(
    constraints: &[SdpConstraint],
    dim: usize,
    field: FieldKind,
    slack: f64,
    settings: &SdpSettings,
) -> Result<TraceMinSolution> {
    validate_constraints(constraints, dim, slack)?;
    if constraints.iter().all(|c| c.power == 0.0) {
        return Ok(TraceMinSolution {
            h: PsdMatrix::zeros(dim),
            residual: 0.0,
            iterations: 0,
            status: SdpStatus::Optimal,
        });
    }
    match field {
        FieldKind::ComplexHermitian => trace_min_impl::<Complex64>(constraints, dim, slack, settings),
        FieldKind::RealSymmetric => trace_min_impl::<f64>(constraints, dim, slack, settings),
    }
}

fn trace_min_impl<T: Field>(
    constraints: &[SdpConstraint],
    n: usize,
    slack: f64,
    settings: &SdpSettings,
) -> Result<TraceMinSolution> {
    let scale = power_scale(constraints);
    let powers: Vec<f64> = constraints.iter().map(|c| c.power / scale).collect();
    let delta = slack / scale;
    let layout = Layout { psd_len: svec_len::<T>(n), extra: 0, t: powers.len(), slack: delta > 0.0 };
    let nvar = layout.nvar();
    let a_rows = constraint_svecs::<T>(constraints);

    let n_rows = if layout.slack { 2 * layout.t } else { layout.t };
    let mut rows = DMatrix::zeros(n_rows, nvar);
    let mut rhs = DVector::zeros(n_rows);
    for (t, a) in a_rows.iter().enumerate() {
        if layout.slack {
            let (up, lo) = (2 * t, 2 * t + 1);
            for (k, &v) in a.iter().enumerate() {
                rows[(up, k)] = v;
                rows[(lo, k)] = v;
            }
            rows[(up, layout.psd_len + t)] = 1.0;
            rows[(lo, layout.psd_len + layout.t + t)] = -1.0;
            rhs[up] = powers[t] + delta;
            rhs[lo] = powers[t] - delta;
        } else {
            for (k, &v) in a.iter().enumerate() {
                rows[(t, k)] = v;
            }
            rhs[t] = powers[t];
        }
    }
    let mut cost = DVector::zeros(nvar);
    for (k, &v) in svec_of::<T>(&HermitianMatrix::identity(n)).iter().enumerate() {
        cost[k] = v;
    }
    let prog = ConeProgram { psd_dim: n, scalar_lower: layout.slack_lower(), rows, rhs, cost };
    let out = ipm::solve::<T>(&prog, &settings.ipm());
    let h_vec = &out.z[..layout.psd_len];
    let residual = a_rows
        .iter()
        .zip(&powers)
        .map(|(a, &p)| {
            let lhs: f64 = a.iter().zip(h_vec).map(|(x, y)| x * y).sum();
            ((lhs - p).abs() - delta).max(0.0)
        })
        .fold(0.0, f64::max);
    let status = if residual > 10.0 * settings.tol {
        SdpStatus::Infeasible
    } else if out.converged {
        SdpStatus::Optimal
    } else {
        SdpStatus::MaxIters
    };
    let h = to_hermitian(&smat::<T>(h_vec, n)).scaled(scale);
    Ok(TraceMinSolution {
        h: PsdMatrix::new_unchecked(h, DEFAULT_PSD_TOLERANCE),
        residual,
        iterations: out.iterations,
        status,
    })
}

/// Writes an objective matrix as `i,j,re,im` rows (full matrix), for
/// dumping a subproblem next to its campaign CSV.
pub fn write_objective_csv<W: Write>(objective: &HermitianMatrix, mut out: W) -> Result<()> {
    writeln!(out, "i,j,re,im")?;
    let n = objective.dim();
    for i in 0..n {
        for j in 0..n {
            let z = objective.get(i, j);
            writeln!(out, "{i},{j},{:e},{:e}", z.re, z.im)?;
        }
    }
    Ok(())
}

pub fn read_objective_csv<R: BufRead>(input: R) -> Result<HermitianMatrix> {
    let mut entries = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if lineno == 0 || line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| Error::Parse { line: lineno + 1, msg: msg.to_string() };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(bad("expected i,j,re,im"));
        }
        let i: usize = f[0].parse().map_err(|_| bad("bad row index"))?;
        let j: usize = f[1].parse().map_err(|_| bad("bad column index"))?;
        let re: f64 = f[2].parse().map_err(|_| bad("bad real part"))?;
        let im: f64 = f[3].parse().map_err(|_| bad("bad imaginary part"))?;
        entries.push((i, j, Complex64::new(re, im)));
    }
    let n = (entries.len() as f64).sqrt() as usize;
    if n == 0 || n * n != entries.len() {
        return Err(Error::Parse { line: 1, msg: format!("{} entries do not form a square matrix", entries.len()) });
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, j, z) in entries {
        if i >= n || j >= n {
            return Err(Error::Parse { line: 1, msg: format!("index ({i}, {j}) out of range") });
        }
        m[(i, j)] = z;
    }
    HermitianMatrix::new(m)
}
