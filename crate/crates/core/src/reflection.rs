//! Reflection design from an estimate, the measurement-only baselines, and
//! effective channel gain.

use std::fmt;

use num_complex::Complex64;

use crate::error::{degenerate, invalid, Error, Result};
use crate::estimator::EstimateResult;
use crate::measurement::{Campaign, PhaseSet, ReflectionVector};
use crate::numerics::{hermitian_eig, PsdMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Proposed,
    TraceMin,
    Rms,
    Csm,
    UpperBound,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Proposed, Scheme::TraceMin, Scheme::Rms, Scheme::Csm, Scheme::UpperBound];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::TraceMin => "trace-min",
            Scheme::Rms => "rms",
            Scheme::Csm => "csm",
            Scheme::UpperBound => "upper-bound",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.as_str() == s)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainReport {
    /// `|vᴴh̄|² / p0` against the true channel.
    pub gain: f64,
    pub gain_db: f64,
    pub scheme: Scheme,
    pub t_used: usize,
}

/// `|dᴴv|²`.
pub fn beam_objective(direction: &[Complex64], v: &ReflectionVector) -> f64 {
    direction.iter().zip(v.entries()).map(|(d, x)| d.conj() * x).sum::<Complex64>().norm_sqr()
}

/// Maximizes `|dᴴv|²` over `v ∈ Φ_b^N` with `v_N = 1`.
///
/// At the optimum every entry is the phase nearest to `d_n e^{jθ}` for
/// `θ = arg(dᴴv)`, so it suffices to try one rotation inside each interval
/// between the angles where some entry's nearest phase flips. Rotating by a
/// whole phase step only relabels phases, so the sweep covers one step.
pub fn optimize_discrete(direction: &[Complex64], bits: u32) -> Result<ReflectionVector> {
    if direction.len() < 2 {
        return Err(invalid("direction needs at least one IRS element plus the direct path"));
    }
    if direction.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(invalid("direction has non-finite entries"));
    }
    if direction.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(degenerate("zero beamforming direction"));
    }
    let set = PhaseSet::new(bits)?;
    let step = set.step();
    let mut flips: Vec<f64> = direction.iter().map(|d| (0.5 * step - d.arg()).rem_euclid(step)).collect();
    flips.sort_by(f64::total_cmp);
    flips.dedup();

    let levels = set.len();
    let n = direction.len();
    let mut best: Option<(f64, ReflectionVector)> = None;
    let mut phases = vec![0usize; n];
    for (i, &lo) in flips.iter().enumerate() {
        let hi = if i + 1 < flips.len() { flips[i + 1] } else { flips[0] + step };
        let rot = Complex64::from_polar(1.0, 0.5 * (lo + hi));
        for (k, d) in phases.iter_mut().zip(direction) {
            *k = set.nearest(d * rot);
        }
        let last = phases[n - 1];
        let pinned: Vec<usize> = phases[..n - 1].iter().map(|&k| (k + levels - last) % levels).collect();
        let v = ReflectionVector::from_phase_indices(bits, pinned)?;
        let value = beam_objective(direction, &v);
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, v));
        }
    }
    Ok(best.expect("at least one candidate rotation").1)
}

/// `√λ₁ x₁ + j √λ₂ x₂` from the top two eigenpairs of a real-symmetric
/// estimate; for real `v`, `|dᴴv|² = λ₁(x₁ᵀv)² + λ₂(x₂ᵀv)²`.
pub fn composite_direction_b1(h_r: &PsdMatrix) -> Result<Vec<Complex64>> {
    if !h_r.is_real() {
        return Err(invalid("composite direction needs a real-symmetric matrix"));
    }
    if h_r.frobenius_norm() == 0.0 {
        return Err(degenerate("zero estimate"));
    }
    let eig = hermitian_eig(h_r)?;
    let l1 = eig.eigenvalues[0].max(0.0).sqrt();
    let x1 = eig.vector(0);
    if h_r.dim() == 1 {
        return Ok(x1.iter().map(|z| z * l1).collect());
    }
    // Below the PSD tolerance the second eigenvalue is numerical noise.
    let l2 = if eig.eigenvalues[1] > h_r.tolerance() * eig.eigenvalues[0] { eig.eigenvalues[1].sqrt() } else { 0.0 };
    let x2 = eig.vector(1);
    let j = Complex64::new(0.0, 1.0);
    Ok(x1.iter().zip(&x2).map(|(a, b)| Complex64::new(a.re * l1, 0.0) + j * (b.re * l2)).collect())
}

/// Top eigenvector (`b ≥ 2`) or composite direction (`b = 1`) of the
/// estimate, quantized with [`optimize_discrete`].
pub fn design_from_estimate(result: &EstimateResult, bits: u32) -> Result<ReflectionVector> {
    design_from_matrix(&result.h_hat, bits)
}

pub fn design_from_matrix(h: &PsdMatrix, bits: u32) -> Result<ReflectionVector> {
    if h.frobenius_norm() == 0.0 {
        return Err(degenerate("zero estimate"));
    }
    let direction = if bits == 1 {
        composite_direction_b1(&PsdMatrix::new_unchecked(h.real_part(), h.tolerance()))?
    } else {
        hermitian_eig(h)?.vector(0)
    };
    optimize_discrete(&direction, bits)
}

/// Design with perfect knowledge of `h̄`.
pub fn upper_bound(h_bar: &[Complex64], bits: u32) -> Result<ReflectionVector> {
    optimize_discrete(h_bar, bits)
}

/// Reflection of the strongest measurement; the first one on ties.
pub fn rms_baseline(campaign: &Campaign) -> &ReflectionVector {
    let mut best = 0;
    for (t, r) in campaign.records.iter().enumerate() {
        if r.power > campaign.records[best].power {
            best = t;
        }
    }
    &campaign.records[best].reflection
}

/// Per element, the phase with the largest mean power over the records
/// using it; the smallest phase index on ties.
pub fn csm_baseline(campaign: &Campaign) -> Result<ReflectionVector> {
    let n_irs = campaign.dim - 1;
    let levels = 1usize << campaign.bits;
    let mut sum = vec![0.0; n_irs * levels];
    let mut count = vec![0usize; n_irs * levels];
    for r in &campaign.records {
        for (n, &k) in r.reflection.phase_indices().iter().enumerate() {
            sum[n * levels + k] += r.power;
            count[n * levels + k] += 1;
        }
    }
    let missing: Vec<(usize, usize)> =
        (0..n_irs * levels).filter(|&i| count[i] == 0).map(|i| (i / levels, i % levels)).collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    let phases = (0..n_irs)
        .map(|n| {
            let mean = |k: usize| sum[n * levels + k] / count[n * levels + k] as f64;
            (1..levels).fold(0, |best, k| if mean(k) > mean(best) { k } else { best })
        })
        .collect();
    ReflectionVector::from_phase_indices(campaign.bits, phases)
}

/// `|vᴴh̄|² / p0` against the true channel.
pub fn effective_gain(
    h_bar: &[Complex64],
    v: &ReflectionVector,
    p0: f64,
    scheme: Scheme,
    t_used: usize,
) -> Result<GainReport> {
    if h_bar.len() != v.dim() {
        return Err(invalid(format!("channel has length {}, reflection {}", h_bar.len(), v.dim())));
    }
    if !(p0 > 0.0) {
        return Err(invalid("p0 must be positive"));
    }
    let gain = v.inner(h_bar).norm_sqr() / p0;
    Ok(GainReport { gain, gain_db: 10.0 * gain.log10(), scheme, t_used })
}

#[cfg(test)]
mod tests;
