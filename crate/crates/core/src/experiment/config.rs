//! Flat `key = value` experiment files.
//!
//! ```text
//! # comments and blank lines are ignored
//! scenario.n_x = 4
//! scenario.p0_dbm = 30
//! estimator.epsilon = 0.95
//! experiment.t_grid = N, 2N, 3N, 4N
//! ```
//!
//! Every key is optional and falls back to [`ExperimentSpec::default`];
//! unknown or repeated keys are errors. Powers are given in dBm and stored
//! in watts. Measurement counts may be written as multiples of the channel
//! dimension `N` (`2N`, `2.5N`, rounded up).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::ExperimentSpec;
use crate::channel::{dbm_to_watts, watts_to_dbm, LosModel, Point3};
use crate::error::{Error, Result};
use crate::measurement::MeasurementMode;
use crate::reflection::Scheme;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn float(line: usize, key: &str, v: &str) -> Result<f64> {
    match v {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => v.parse().map_err(|_| parse_err(line, format!("{key}: expected a number, got `{v}`"))),
    }
}

fn int<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| parse_err(line, format!("{key}: expected a non-negative integer, got `{v}`")))
}

fn point(line: usize, key: &str, v: &str) -> Result<Point3> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(parse_err(line, format!("{key}: expected `x, y, z`")));
    }
    Ok([float(line, key, parts[0])?, float(line, key, parts[1])?, float(line, key, parts[2])?])
}

fn los(line: usize, key: &str, v: &str) -> Result<LosModel> {
    LosModel::parse(v).ok_or_else(|| parse_err(line, format!("{key}: expected `steering` or `random-phase`")))
}

/// A measurement count, absolute or as a multiple of `N`.
#[derive(Debug, Clone, Copy)]
enum Count {
    Abs(usize),
    TimesN(f64),
}

fn count(line: usize, v: &str) -> Result<Count> {
    if let Some(m) = v.strip_suffix('N') {
        let m = if m.is_empty() { 1.0 } else { float(line, "t_grid", m)? };
        if !(m > 0.0 && m.is_finite()) {
            return Err(parse_err(line, format!("t_grid: bad multiple `{v}`")));
        }
        return Ok(Count::TimesN(m));
    }
    Ok(Count::Abs(int(line, "t_grid", v)?))
}

pub(super) fn parse(text: &str) -> Result<ExperimentSpec> {
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(parse_err(line, format!("expected `key = value`, got `{content}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        if seen.insert(key.to_string(), (line, value.to_string())).is_some() {
            return Err(parse_err(line, format!("duplicate key `{key}`")));
        }
    }

    let mut spec = ExperimentSpec::default();
    let mut t_grid: Option<(usize, Vec<Count>)> = None;
    let mut rsrp_averaging = None;
    let mut measurement = None;
    for (key, (line, v)) in &seen {
        let (line, v) = (*line, v.as_str());
        let s = &mut spec.scenario;
        let e = &mut spec.estimator;
        match key.as_str() {
            "scenario.n_x" => s.n_x = int(line, key, v)?,
            "scenario.n_z" => s.n_z = int(line, key, v)?,
            "scenario.bs_position" => s.bs_position = point(line, key, v)?,
            "scenario.irs_position" => s.irs_position = point(line, key, v)?,
            "scenario.user_region_min" => s.user_region.min = point(line, key, v)?,
            "scenario.user_region_max" => s.user_region.max = point(line, key, v)?,
            "scenario.c0_bu_db" => s.bs_user.c0_db = float(line, key, v)?,
            "scenario.c0_bi_db" => s.bs_irs.c0_db = float(line, key, v)?,
            "scenario.c0_iu_db" => s.irs_user.c0_db = float(line, key, v)?,
            "scenario.alpha_bu" => s.bs_user.alpha = float(line, key, v)?,
            "scenario.alpha_bi" => s.bs_irs.alpha = float(line, key, v)?,
            "scenario.alpha_iu" => s.irs_user.alpha = float(line, key, v)?,
            "scenario.beta_bu" => s.bs_user.beta = float(line, key, v)?,
            "scenario.beta_bi" => s.bs_irs.beta = float(line, key, v)?,
            "scenario.beta_iu" => s.irs_user.beta = float(line, key, v)?,
            "scenario.p0_dbm" => s.p0 = dbm_to_watts(float(line, key, v)?),
            "scenario.sigma2_dbm" => s.sigma2 = dbm_to_watts(float(line, key, v)?),
            "scenario.irs_user_los" => s.irs_user_los = los(line, key, v)?,
            "scenario.bs_user_los" => s.bs_user_los = los(line, key, v)?,
            "scenario.seed" => s.seed = int(line, key, v)?,
            "estimator.epsilon" => e.epsilon = float(line, key, v)?,
            "estimator.max_outer_iters" => e.max_outer_iters = int(line, key, v)?,
            "estimator.sdp_tol" => e.sdp.tol = float(line, key, v)?,
            "estimator.sdp_max_iters" => e.sdp.max_iters = int(line, key, v)?,
            "estimator.residual_tol" => e.residual_tol = float(line, key, v)?,
            "experiment.bits" => spec.bits = int(line, key, v)?,
            "experiment.trials" => spec.trials = int(line, key, v)?,
            "experiment.t_grid" => {
                let items = v.split(',').map(|x| count(line, x.trim())).collect::<Result<Vec<_>>>()?;
                t_grid = Some((line, items));
            }
            "experiment.schemes" => {
                spec.schemes = v
                    .split(',')
                    .map(|x| {
                        Scheme::parse(x.trim()).ok_or_else(|| parse_err(line, format!("unknown scheme `{}`", x.trim())))
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            "experiment.measurement" => match v {
                "exact" | "rsrp" => measurement = Some(v == "rsrp"),
                _ => return Err(parse_err(line, "experiment.measurement: expected `exact` or `rsrp`")),
            },
            "experiment.rsrp_averaging" => rsrp_averaging = Some(int::<usize>(line, key, v)?),
            _ => return Err(parse_err(line, format!("unknown key `{key}`"))),
        }
    }

    let n = spec.scenario.dim();
    if let Some((line, items)) = t_grid {
        spec.t_grid = items
            .into_iter()
            .map(|c| match c {
                Count::Abs(t) => t,
                Count::TimesN(m) => (m * n as f64 - 1e-9).ceil() as usize,
            })
            .collect();
        if spec.t_grid.windows(2).any(|w| w[0] >= w[1]) || spec.t_grid.first() == Some(&0) {
            return Err(parse_err(line, "experiment.t_grid must be positive and strictly increasing"));
        }
    } else {
        spec.t_grid = ExperimentSpec::desk_t_grid(n);
    }
    if measurement == Some(true) || (measurement.is_none() && rsrp_averaging.is_some()) {
        let averaging = rsrp_averaging.unwrap_or(super::DEFAULT_RSRP_AVERAGING);
        spec.measurement = MeasurementMode::Rsrp { averaging, sigma2: spec.scenario.sigma2 };
    }
    spec.validate()?;
    Ok(spec)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

fn pt(p: &Point3) -> String {
    join(p)
}

/// Every setting, one `key = value` per line, in a fixed order.
pub(super) fn render(spec: &ExperimentSpec) -> String {
    let s = &spec.scenario;
    let e = &spec.estimator;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("scenario.n_x", s.n_x.to_string());
    kv("scenario.n_z", s.n_z.to_string());
    kv("scenario.bs_position", pt(&s.bs_position));
    kv("scenario.irs_position", pt(&s.irs_position));
    kv("scenario.user_region_min", pt(&s.user_region.min));
    kv("scenario.user_region_max", pt(&s.user_region.max));
    kv("scenario.c0_bu_db", s.bs_user.c0_db.to_string());
    kv("scenario.c0_bi_db", s.bs_irs.c0_db.to_string());
    kv("scenario.c0_iu_db", s.irs_user.c0_db.to_string());
    kv("scenario.alpha_bu", s.bs_user.alpha.to_string());
    kv("scenario.alpha_bi", s.bs_irs.alpha.to_string());
    kv("scenario.alpha_iu", s.irs_user.alpha.to_string());
    kv("scenario.beta_bu", s.bs_user.beta.to_string());
    kv("scenario.beta_bi", s.bs_irs.beta.to_string());
    kv("scenario.beta_iu", s.irs_user.beta.to_string());
    kv("scenario.p0_dbm", watts_to_dbm(s.p0).to_string());
    kv("scenario.sigma2_dbm", watts_to_dbm(s.sigma2).to_string());
    kv("scenario.irs_user_los", s.irs_user_los.as_str().to_string());
    kv("scenario.bs_user_los", s.bs_user_los.as_str().to_string());
    kv("scenario.seed", s.seed.to_string());
    kv("estimator.epsilon", e.epsilon.to_string());
    kv("estimator.max_outer_iters", e.max_outer_iters.to_string());
    kv("estimator.sdp_tol", e.sdp.tol.to_string());
    kv("estimator.sdp_max_iters", e.sdp.max_iters.to_string());
    kv("estimator.residual_tol", e.residual_tol.to_string());
    kv("experiment.bits", spec.bits.to_string());
    kv("experiment.trials", spec.trials.to_string());
    kv("experiment.t_grid", join(&spec.t_grid));
    kv("experiment.schemes", spec.schemes.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "));
    match spec.measurement {
        MeasurementMode::Exact => kv("experiment.measurement", "exact".into()),
        MeasurementMode::Rsrp { averaging, .. } => {
            kv("experiment.measurement", "rsrp".into());
            kv("experiment.rsrp_averaging", averaging.to_string());
        }
    }
    out
}
