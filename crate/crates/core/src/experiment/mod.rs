//! Monte-Carlo harness: convergence traces, estimation error and beamforming
//! gain against the number of measurements.
//!
//! Trial `i` draws its channel and then its campaign from
//! [`trial_rng`]`(seed, i)`, so results do not depend on scheduling. Each
//! trial measures once with `max(T_grid)` records; smaller `T` use a prefix
//! of that campaign.

mod config;

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::channel::{sample_channel, ChannelRealization, ScenarioConfig};
use crate::error::{invalid, Error, Result};
use crate::estimator::{estimate, EstimateResult, EstimatorConfig};
use crate::measurement::{run_campaign, Campaign, MeasurementMode, MAX_BITS};
use crate::numerics::{normalized_frobenius_error, HermitianMatrix, PsdMatrix};
use crate::reflection::{csm_baseline, design_from_matrix, effective_gain, rms_baseline, upper_bound, Scheme};
use crate::rng::trial_rng;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Received-power samples averaged per RSRP report unless configured.
pub const DEFAULT_RSRP_AVERAGING: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Geometry, links and powers; `scenario.seed` is the master seed.
    pub scenario: ScenarioConfig,
    pub bits: u32,
    /// Strictly increasing measurement counts.
    pub t_grid: Vec<usize>,
    pub trials: usize,
    pub estimator: EstimatorConfig,
    /// Schemes reported by [`gain_vs_t`].
    pub schemes: Vec<Scheme>,
    pub measurement: MeasurementMode,
}

impl Default for ExperimentSpec {
    /// Desk scale: a 4×4 IRS (`N = 17`), 50 trials, `T ∈ {N, 2N, 3N, 4N}`.
    fn default() -> Self {
        let scenario = ScenarioConfig::with_irs(4, 4);
        let t_grid = Self::desk_t_grid(scenario.dim());
        Self {
            scenario,
            bits: 2,
            t_grid,
            trials: 50,
            estimator: EstimatorConfig::default(),
            schemes: Scheme::ALL.to_vec(),
            measurement: MeasurementMode::Exact,
        }
    }
}

impl ExperimentSpec {
    pub fn desk_t_grid(n: usize) -> Vec<usize> {
        (1..=4).map(|k| k * n).collect()
    }

    pub fn from_config_str(text: &str) -> Result<Self> {
        config::parse(text)
    }

    /// Canonical `key = value` form; parses back to an equivalent spec.
    pub fn to_config_string(&self) -> String {
        config::render(self)
    }

    /// SHA-256 of [`to_config_string`](Self::to_config_string), hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_config_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seed(&self) -> u64 {
        self.scenario.seed
    }

    pub fn dim(&self) -> usize {
        self.scenario.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.estimator.validate()?;
        if !(1..=MAX_BITS).contains(&self.bits) {
            return Err(invalid(format!("bits must be in 1..={MAX_BITS}, got {}", self.bits)));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.t_grid.is_empty() || self.t_grid[0] == 0 || self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("t_grid must be non-empty, positive and strictly increasing"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("at least one scheme is required"));
        }
        if let MeasurementMode::Rsrp { averaging, .. } = self.measurement {
            if averaging == 0 {
                return Err(invalid("rsrp_averaging must be at least 1"));
            }
        }
        Ok(())
    }

    fn t_max(&self) -> usize {
        *self.t_grid.last().expect("validated t_grid")
    }

    /// Measurement mode with the scenario's noise power.
    fn mode(&self) -> MeasurementMode {
        match self.measurement {
            MeasurementMode::Exact => MeasurementMode::Exact,
            MeasurementMode::Rsrp { averaging, .. } => {
                MeasurementMode::Rsrp { averaging, sigma2: self.scenario.sigma2 }
            }
        }
    }
}

/// Execution settings that do not affect results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 1 runs trials in order on the calling thread.
    pub parallel: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { parallel: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub index: usize,
    pub channel: ChannelRealization,
    /// `max(T_grid)` records.
    pub campaign: Campaign,
}

impl Trial {
    /// `H̄`, or `Re(H̄)` for binary reflections.
    pub fn target(&self) -> HermitianMatrix {
        let h = self.channel.autocorrelation();
        if self.campaign.bits == 1 {
            h.real_part()
        } else {
            h
        }
    }
}

/// Channel and a campaign of `t` records for one trial.
pub fn trial_with_length(spec: &ExperimentSpec, index: usize, t: usize) -> Result<Trial> {
    let mut rng = trial_rng(spec.seed(), index as u64);
    let channel = sample_channel(&spec.scenario, &mut rng)?;
    let mut campaign = run_campaign(&channel.h_bar, t, spec.bits, &mut rng, spec.mode())?;
    campaign.meta.seed = Some(spec.seed());
    Ok(Trial { index, channel, campaign })
}

pub fn trial(spec: &ExperimentSpec, index: usize) -> Result<Trial> {
    trial_with_length(spec, index, spec.t_max())
}

fn run_trials<T, F>(spec: &ExperimentSpec, opts: RunOptions, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    spec.validate()?;
    if opts.parallel <= 1 {
        return (0..spec.trials).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallel)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    pool.install(|| (0..spec.trials).into_par_iter().map(f).collect())
}

/// One estimate per trial at `T = T_grid[0]`.
pub fn convergence(spec: &ExperimentSpec, opts: RunOptions) -> Result<Vec<EstimateResult>> {
    let t = spec.t_grid[0];
    run_trials(spec, opts, |i| estimate(&trial_with_length(spec, i, t)?.campaign, &spec.estimator))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub t: usize,
    pub trial: usize,
    pub scheme: Scheme,
    pub error: f64,
}

/// Normalized Frobenius error of the proposed and trace-min estimates.
pub fn error_vs_t(spec: &ExperimentSpec, opts: RunOptions) -> Result<Vec<ErrorRow>> {
    error_vs_t_with(spec, opts, |_, camp| estimate(camp, &spec.estimator))
}

/// [`error_vs_t`] with a substitute estimator; `est` sees the trial and the
/// truncated campaign.
pub fn error_vs_t_with<F>(spec: &ExperimentSpec, opts: RunOptions, est: F) -> Result<Vec<ErrorRow>>
where
    F: Fn(&Trial, &Campaign) -> Result<EstimateResult> + Sync + Send,
{
    let per_trial = run_trials(spec, opts, |i| {
        let tr = trial(spec, i)?;
        let target = tr.target();
        let mut rows = Vec::new();
        for &t in &spec.t_grid {
            let res = est(&tr, &tr.campaign.truncated(t)?)?;
            for (scheme, h) in [(Scheme::Proposed, &res.h_hat), (Scheme::TraceMin, &res.initial)] {
                let error = normalized_frobenius_error(h, &target)?;
                rows.push(ErrorRow { t, trial: i, scheme, error });
            }
        }
        Ok(rows)
    })?;
    Ok(sorted(per_trial.into_iter().flatten().collect(), |r| (r.t, r.trial, r.scheme.as_str())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub t: usize,
    pub trial: usize,
    pub scheme: Scheme,
    /// `|vᴴh̄|² / p0`; NaN when the scheme has no design at this `T`
    /// (zero estimate, or an uncovered phase for CSM).
    pub gain: f64,
    pub gain_db: f64,
}

/// Effective gain of each configured scheme. The upper bound does not use
/// measurements and repeats across `T`.
pub fn gain_vs_t(spec: &ExperimentSpec, opts: RunOptions) -> Result<Vec<GainRow>> {
    gain_vs_t_with(spec, opts, |_, camp| estimate(camp, &spec.estimator))
}

pub fn gain_vs_t_with<F>(spec: &ExperimentSpec, opts: RunOptions, est: F) -> Result<Vec<GainRow>>
where
    F: Fn(&Trial, &Campaign) -> Result<EstimateResult> + Sync + Send,
{
    let needs_estimate = spec.schemes.iter().any(|s| matches!(s, Scheme::Proposed | Scheme::TraceMin));
    let per_trial = run_trials(spec, opts, |i| {
        let tr = trial(spec, i)?;
        let h_bar = &tr.channel.h_bar;
        let p0 = spec.scenario.p0;
        let bound = upper_bound(h_bar, spec.bits)?;
        let mut rows = Vec::new();
        for &t in &spec.t_grid {
            let camp = tr.campaign.truncated(t)?;
            let res = if needs_estimate { Some(est(&tr, &camp)?) } else { None };
            for &scheme in &spec.schemes {
                let design = match scheme {
                    Scheme::Proposed => from_matrix(&res.as_ref().expect("estimate").h_hat, spec.bits)?,
                    Scheme::TraceMin => from_matrix(&res.as_ref().expect("estimate").initial, spec.bits)?,
                    Scheme::Rms => Some(rms_baseline(&camp).clone()),
                    Scheme::Csm => match csm_baseline(&camp) {
                        Ok(v) => Some(v),
                        Err(Error::Coverage(_)) => None,
                        Err(e) => return Err(e),
                    },
                    Scheme::UpperBound => Some(bound.clone()),
                };
                let (gain, gain_db) = match design {
                    Some(v) => {
                        let g = effective_gain(h_bar, &v, p0, scheme, t)?;
                        (g.gain, g.gain_db)
                    }
                    None => (f64::NAN, f64::NAN),
                };
                rows.push(GainRow { t, trial: i, scheme, gain, gain_db });
            }
        }
        Ok(rows)
    })?;
    Ok(sorted(per_trial.into_iter().flatten().collect(), |r| (r.t, r.trial, r.scheme.as_str())))
}

fn from_matrix(h: &PsdMatrix, bits: u32) -> Result<Option<crate::measurement::ReflectionVector>> {
    match design_from_matrix(h, bits) {
        Ok(v) => Ok(Some(v)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn sorted<T, K: Ord>(mut rows: Vec<T>, key: impl Fn(&T) -> K) -> Vec<T> {
    rows.sort_by_key(|r| key(r));
    rows
}

/// A result table ready for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub command: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

impl Table {
    /// `trial,iter,ratio,b`: the ratio after initialization (`iter = 0`) and
    /// after each outer iteration.
    pub fn convergence(results: &[EstimateResult], bits: u32) -> Self {
        let rows = results
            .iter()
            .enumerate()
            .flat_map(|(trial, r)| {
                r.ratio_trajectory
                    .iter()
                    .enumerate()
                    .map(move |(k, g)| vec![trial.to_string(), k.to_string(), num(*g), bits.to_string()])
            })
            .collect();
        Self { command: "convergence", columns: vec!["trial", "iter", "ratio", "b"], rows }
    }

    pub fn errors(rows: &[ErrorRow]) -> Self {
        let rows = rows
            .iter()
            .map(|r| vec![r.t.to_string(), r.trial.to_string(), r.scheme.to_string(), num(r.error)])
            .collect();
        Self { command: "error-vs-t", columns: vec!["T", "trial", "scheme", "error"], rows }
    }

    pub fn gains(rows: &[GainRow]) -> Self {
        let rows = rows
            .iter()
            .map(|r| vec![r.t.to_string(), r.trial.to_string(), r.scheme.to_string(), num(r.gain), num(r.gain_db)])
            .collect();
        Self { command: "gain-vs-t", columns: vec!["T", "trial", "scheme", "gain", "gain_db"], rows }
    }

    /// `# irs-autocorr <version> <command> b=<b> N=<N> seed=<seed> spec=<hash>`,
    /// then the header and rows.
    pub fn write_csv<W: Write>(&self, spec: &ExperimentSpec, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# irs-autocorr {TOOL_VERSION} {} b={} N={} seed={} spec={}",
            self.command,
            spec.bits,
            spec.dim(),
            spec.seed(),
            spec.hash()
        )?;
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.into());
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `h̄` as `n,re,im` rows.
pub fn write_truth_csv<W: Write>(h_bar: &[Complex64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(["n", "re", "im"]).map_err(io)?;
    for (n, z) in h_bar.iter().enumerate() {
        w.write_record([n.to_string(), num(z.re), num(z.im)]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth_csv<R: BufRead>(input: R) -> Result<Vec<Complex64>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "n,re,im" {
        return Err(Error::Parse { line: 1, msg: format!("expected header `n,re,im`, got `{header}`") });
    }
    let mut h = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse { line: line_no, msg: msg.to_string() };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(bad("expected 3 fields"));
        }
        if f[0].parse::<usize>().ok() != Some(h.len()) {
            return Err(bad("entries must be numbered 0, 1, 2, ..."));
        }
        let re: f64 = f[1].parse().map_err(|_| bad("bad real part"))?;
        let im: f64 = f[2].parse().map_err(|_| bad("bad imaginary part"))?;
        if !(re.is_finite() && im.is_finite()) {
            return Err(bad("non-finite entry"));
        }
        h.push(Complex64::new(re, im));
    }
    if h.is_empty() {
        return Err(Error::Parse { line: 1, msg: "no entries".into() });
    }
    Ok(h)
}

#[cfg(test)]
mod tests;
