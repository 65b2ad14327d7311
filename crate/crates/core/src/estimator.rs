//! Recovery of the channel autocorrelation matrix from a power campaign.
//!
//! Both estimators maximize an eigenvalue-ratio surrogate of the rank over
//! the PSD matrices consistent with the measured powers, alternating
//! between two easy steps:
//!
//! 1. Given `H`, the best direction matrix `X` is built from the top
//!    eigenvector (`b ≥ 2`, `X = x xᴴ`) or the top two eigenvectors
//!    (`b = 1`, `X = x₁x₁ᵀ + x₂x₂ᵀ`).
//! 2. Given `X`, `max tr(H X) / tr(H)` over the feasible set is a linear SDP
//!    after the substitution `G = H / tr H`, `γ = 1 / tr H`.
//!
//! Each step can only raise the ratio `λ_max / tr` (resp. `(λ₁ + λ₂) / tr`),
//! which is bounded by 1, so the trajectory is non-decreasing. The loop
//! starts from the trace-minimization solution and stops once the ratio
//! exceeds `ε`.
//!
//! With binary reflections the measurements only see `Re(H̄)`, which has
//! rank at most two, so the real-symmetric variant targets `Re(H̄)`.

use crate::error::{invalid, Result};
use crate::measurement::{Campaign, MeasurementMode};
use crate::numerics::{
    eigenvalue_ratio, generalized_eigenvalue_ratio, hermitian_eig, HermitianMatrix, PsdMatrix, DEFAULT_PSD_TOLERANCE,
};
use crate::sdp::{
    campaign_constraints, solve_ratio_subproblem, trace_min, FieldKind, LinearSdpProblem, SdpSettings, SdpStatus,
};

/// Multiple of the RSRP standard error used as the constraint slack in noisy campaigns.
pub const NOISE_SLACK_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Ratio threshold in `(0, 1)`.
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub sdp: SdpSettings,
    /// Accepted `max_t |tr(Ĥ V_t) − p_t|` relative to `max_t p_t`.
    pub residual_tol: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { epsilon: 0.95, max_outer_iters: 30, sdp: SdpSettings::default(), residual_tol: 1e-5 }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must be in (0, 1), got {}", self.epsilon)));
        }
        if self.max_outer_iters == 0 {
            return Err(invalid("max_outer_iters must be at least 1"));
        }
        if !(self.sdp.tol > 0.0) || self.sdp.max_iters == 0 {
            return Err(invalid("SDP tolerance and iteration limit must be positive"));
        }
        if !(self.residual_tol > 0.0) {
            return Err(invalid("residual_tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateStatus {
    Converged,
    IterCapped,
    SolverFailed,
}

impl EstimateStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateStatus::Converged => "converged",
            EstimateStatus::IterCapped => "iter-capped",
            EstimateStatus::SolverFailed => "solver-failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    /// Hermitian estimate of `H̄` (`b ≥ 2`) or real-symmetric estimate of `Re(H̄)` (`b = 1`).
    pub h_hat: PsdMatrix,
    pub field: FieldKind,
    /// Ratio after initialization, then after each outer iteration.
    pub ratio_trajectory: Vec<f64>,
    pub outer_iterations: usize,
    pub status: EstimateStatus,
    /// `max_t |tr(Ĥ V_t) − p_t|`, watts.
    pub max_power_residual: f64,
    /// The residual exceeded `residual_tol · max_t p_t`.
    pub residual_flagged: bool,
    /// Trace-minimization solution the loop started from.
    pub initial: PsdMatrix,
}

impl EstimateResult {
    pub fn final_ratio(&self) -> Option<f64> {
        self.ratio_trajectory.last().copied()
    }

    /// Outer iterations until the ratio first exceeded `epsilon`, if it did.
    pub fn iterations_to_threshold(&self, epsilon: f64) -> Option<usize> {
        self.ratio_trajectory.iter().position(|&g| g > epsilon)
    }
}

/// Routes binary campaigns to [`estimate_real`] and the rest to [`estimate_complex`].
pub fn estimate(campaign: &Campaign, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    if campaign.bits == 1 {
        estimate_real(campaign, cfg)
    } else {
        estimate_complex(campaign, cfg)
    }
}

/// Rank-one recovery of `H̄` for `b ≥ 2`.
pub fn estimate_complex(campaign: &Campaign, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    if campaign.bits < 2 {
        return Err(invalid("complex estimator needs b >= 2"));
    }
    run(campaign, cfg, FieldKind::ComplexHermitian, None)
}

/// Rank-two recovery of `Re(H̄)` for `b = 1`.
pub fn estimate_real(campaign: &Campaign, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    if campaign.bits != 1 {
        return Err(invalid("real estimator needs b = 1"));
    }
    run(campaign, cfg, FieldKind::RealSymmetric, None)
}

/// Runs the estimator for the campaign's field from a caller-supplied
/// starting matrix instead of the trace-minimization solution.
pub fn estimate_from(campaign: &Campaign, cfg: &EstimatorConfig, start: &HermitianMatrix) -> Result<EstimateResult> {
    if start.dim() != campaign.dim {
        return Err(invalid(format!("start matrix has dimension {}, campaign {}", start.dim(), campaign.dim)));
    }
    let field = FieldKind::for_bits(campaign.bits);
    let start = if field == FieldKind::RealSymmetric { start.real_part() } else { start.clone() };
    run(campaign, cfg, field, Some(start))
}

/// Constraint slack (watts) for a campaign: zero for exact powers.
pub fn campaign_slack(campaign: &Campaign) -> f64 {
    match campaign.meta.mode {
        MeasurementMode::Exact => 0.0,
        MeasurementMode::Rsrp { .. } => NOISE_SLACK_FACTOR * campaign.meta.rsrp_std_error,
    }
}

fn ratio(h: &HermitianMatrix, field: FieldKind) -> Result<f64> {
    let p = PsdMatrix::new_unchecked(h.clone(), DEFAULT_PSD_TOLERANCE);
    match field {
        FieldKind::ComplexHermitian => eigenvalue_ratio(&p),
        FieldKind::RealSymmetric => generalized_eigenvalue_ratio(&p),
    }
}

/// `x xᴴ` from the top eigenvector, or `x₁x₁ᵀ + x₂x₂ᵀ` for the real field.
fn direction_matrix(h: &HermitianMatrix, field: FieldKind) -> Result<HermitianMatrix> {
    let eig = hermitian_eig(h)?;
    let x1 = HermitianMatrix::outer(&eig.vector(0));
    Ok(match field {
        FieldKind::ComplexHermitian => x1,
        FieldKind::RealSymmetric if h.dim() > 1 => {
            let x2 = HermitianMatrix::outer(&eig.vector(1));
            HermitianMatrix::symmetrized(x1.as_matrix() + x2.as_matrix()).real_part()
        }
        FieldKind::RealSymmetric => x1.real_part(),
    })
}

fn max_power_residual(h: &HermitianMatrix, campaign: &Campaign) -> f64 {
    campaign.records.iter().map(|r| (h.quadratic_form(r.reflection.entries()) - r.power).abs()).fold(0.0, f64::max)
}

fn run(
    campaign: &Campaign,
    cfg: &EstimatorConfig,
    field: FieldKind,
    start: Option<HermitianMatrix>,
) -> Result<EstimateResult> {
    cfg.validate()?;
    let n = campaign.dim;
    let max_p = campaign.powers().into_iter().fold(0.0, f64::max);
    if max_p == 0.0 {
        return Ok(EstimateResult {
            h_hat: PsdMatrix::zeros(n),
            field,
            ratio_trajectory: Vec::new(),
            outer_iterations: 0,
            status: EstimateStatus::Converged,
            max_power_residual: 0.0,
            residual_flagged: false,
            initial: PsdMatrix::zeros(n),
        });
    }

    let slack = campaign_slack(campaign);
    let constraints = campaign_constraints(campaign);
    let finish = |h: HermitianMatrix, traj: Vec<f64>, iters: usize, status: EstimateStatus, initial: PsdMatrix| {
        let residual = max_power_residual(&h, campaign);
        let allowed = cfg.residual_tol * max_p + slack;
        EstimateResult {
            h_hat: PsdMatrix::new_unchecked(h, DEFAULT_PSD_TOLERANCE),
            field,
            ratio_trajectory: traj,
            outer_iterations: iters,
            status,
            max_power_residual: residual,
            residual_flagged: residual > allowed,
            initial,
        }
    };

    let mut h = match start {
        Some(h) => h,
        None => {
            let init = trace_min(&constraints, n, field, slack, &cfg.sdp)?;
            if init.status == SdpStatus::Infeasible || !(init.h.trace() > 0.0) {
                let h = init.h.matrix().clone();
                return Ok(finish(h, Vec::new(), 0, EstimateStatus::SolverFailed, init.h));
            }
            init.h.into_inner()
        }
    };
    let initial = PsdMatrix::new_unchecked(h.clone(), DEFAULT_PSD_TOLERANCE);
    let mut trajectory = vec![ratio(&h, field)?];
    let mut iterations = 0;

    while *trajectory.last().unwrap() <= cfg.epsilon {
        if iterations == cfg.max_outer_iters {
            return Ok(finish(h, trajectory, iterations, EstimateStatus::IterCapped, initial));
        }
        let problem = LinearSdpProblem {
            field,
            objective: direction_matrix(&h, field)?,
            constraints: constraints.clone(),
            slack,
        };
        let sol = solve_ratio_subproblem(&problem, &cfg.sdp)?;
        if sol.status == SdpStatus::Infeasible {
            return Ok(finish(h, trajectory, iterations, EstimateStatus::SolverFailed, initial));
        }
        h = sol.h();
        iterations += 1;
        trajectory.push(ratio(&h, field)?);
    }
    Ok(finish(h, trajectory, iterations, EstimateStatus::Converged, initial))
}

#[cfg(test)]
mod tests;
