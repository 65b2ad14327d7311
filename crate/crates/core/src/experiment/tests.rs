use super::*;
use crate::estimator::EstimateStatus;

fn small() -> ExperimentSpec {
    let mut spec = ExperimentSpec::from_config_str(
        "scenario.n_x = 2\nscenario.n_z = 2\nexperiment.trials = 3\nexperiment.t_grid = N, 2N\n",
    )
    .unwrap();
    spec.scenario.seed = 11;
    spec
}

#[test]
fn defaults_are_desk_scale() {
    let spec = ExperimentSpec::from_config_str("").unwrap();
    assert_eq!(spec, ExperimentSpec::default());
    assert_eq!(spec.dim(), 17);
    assert_eq!(spec.t_grid, vec![17, 34, 51, 68]);
    assert_eq!(spec.trials, 50);
}

#[test]
fn parses_keys_and_multiples() {
    let text =
        "# header\n\nscenario.p0_dbm = 20 # inline\nscenario.beta_iu = inf\nscenario.irs_user_los = random-phase\n\
                experiment.bits = 1\nexperiment.t_grid = 5, 2.5N\nexperiment.schemes = rms, csm\n\
                experiment.rsrp_averaging = 7\n";
    let spec = ExperimentSpec::from_config_str(text).unwrap();
    assert!((spec.scenario.p0 - 0.1).abs() < 1e-15);
    assert!(spec.scenario.irs_user.beta.is_infinite());
    assert_eq!(spec.bits, 1);
    assert_eq!(spec.t_grid, vec![5, 43]);
    assert_eq!(spec.schemes, vec![Scheme::Rms, Scheme::Csm]);
    assert_eq!(spec.measurement, MeasurementMode::Rsrp { averaging: 7, sigma2: spec.scenario.sigma2 });
}

#[test]
fn config_errors_carry_line_numbers() {
    let cases = [
        ("scenario.n_x = 2\nbogus.key = 1\n", 2),
        ("scenario.n_x = 2\n\nscenario.n_x = 3\n", 3),
        ("experiment.t_grid = 4, 4\n", 1),
        ("no equals sign\n", 1),
        ("scenario.p0_dbm = loud\n", 1),
        ("experiment.schemes = proposed, magic\n", 1),
    ];
    for (text, line) in cases {
        match ExperimentSpec::from_config_str(text) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    assert!(matches!(ExperimentSpec::from_config_str("experiment.trials = 0\n"), Err(Error::InvalidInput(_))));
}

#[test]
fn canonical_form_round_trips() {
    let mut spec = small();
    spec.measurement = MeasurementMode::Rsrp { averaging: 3, sigma2: spec.scenario.sigma2 };
    let text = spec.to_config_string();
    let back = ExperimentSpec::from_config_str(&text).unwrap();
    assert_eq!(back.to_config_string(), text);
    assert_eq!(back.hash(), spec.hash());
    let mut other = spec.clone();
    other.scenario.seed += 1;
    assert_ne!(other.hash(), spec.hash());
}

#[test]
fn campaigns_are_prefixes() {
    let spec = small();
    let long = trial(&spec, 1).unwrap();
    let short = trial_with_length(&spec, 1, 4).unwrap();
    assert_eq!(short.campaign, long.campaign.truncated(4).unwrap());
    assert_eq!(short.channel, long.channel);
    assert_ne!(trial(&spec, 2).unwrap().channel, long.channel);
}

#[test]
fn injected_truth_gives_zero_error() {
    let spec = small();
    let rows = error_vs_t_with(&spec, RunOptions::default(), |tr, _| {
        let truth = PsdMatrix::new_unchecked(tr.target(), 1e-9);
        Ok(EstimateResult {
            h_hat: truth.clone(),
            field: crate::sdp::FieldKind::for_bits(spec.bits),
            ratio_trajectory: vec![1.0],
            outer_iterations: 0,
            status: EstimateStatus::Converged,
            max_power_residual: 0.0,
            residual_flagged: false,
            initial: truth,
        })
    })
    .unwrap();
    assert_eq!(rows.len(), spec.trials * spec.t_grid.len() * 2);
    assert!(rows.iter().all(|r| r.error == 0.0));
}

#[test]
fn tables_are_sorted_and_thread_independent() {
    let spec = small();
    let serial = error_vs_t(&spec, RunOptions::default()).unwrap();
    let parallel = error_vs_t(&spec, RunOptions { parallel: 3 }).unwrap();
    assert_eq!(serial, parallel);
    let keys: Vec<_> = serial.iter().map(|r| (r.t, r.trial, r.scheme.as_str())).collect();
    let mut sorted_keys = keys.clone();
    sorted_keys.sort();
    assert_eq!(keys, sorted_keys);

    let mut a = Vec::new();
    let mut b = Vec::new();
    Table::errors(&serial).write_csv(&spec, &mut a).unwrap();
    Table::errors(&parallel).write_csv(&spec, &mut b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(&format!("# irs-autocorr {TOOL_VERSION} error-vs-t b=2 N=5 seed=11 spec=")));
    assert_eq!(text.lines().nth(1), Some("T,trial,scheme,error"));
}

#[test]
fn gains_cover_every_scheme_and_respect_the_bound() {
    let spec = small();
    let rows = gain_vs_t(&spec, RunOptions::default()).unwrap();
    assert_eq!(rows.len(), spec.trials * spec.t_grid.len() * Scheme::ALL.len());
    for r in &rows {
        let bound = rows.iter().find(|u| u.trial == r.trial && u.t == r.t && u.scheme == Scheme::UpperBound).unwrap();
        if r.gain.is_finite() {
            assert!(r.gain <= bound.gain * (1.0 + 1e-12), "{r:?} above {bound:?}");
            assert!((r.gain_db - 10.0 * r.gain.log10()).abs() < 1e-12);
        } else {
            assert_eq!(r.scheme, Scheme::Csm);
        }
    }
}

#[test]
fn convergence_table_has_one_row_per_ratio() {
    let spec = small();
    let results = convergence(&spec, RunOptions::default()).unwrap();
    assert_eq!(results.len(), spec.trials);
    let table = Table::convergence(&results, spec.bits);
    let total: usize = results.iter().map(|r| r.ratio_trajectory.len()).sum();
    assert_eq!(table.rows.len(), total);
    assert!(table.rows.iter().all(|row| row[3] == "2"));
}

#[test]
fn truth_sidecar_round_trips() {
    let h = vec![Complex64::new(1.5e-6, -2.0), Complex64::new(0.0, 1e-300)];
    let mut buf = Vec::new();
    write_truth_csv(&h, &mut buf).unwrap();
    assert_eq!(read_truth_csv(buf.as_slice()).unwrap(), h);
    assert!(matches!(read_truth_csv("n,re,im\n1,0,0\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
    assert!(read_truth_csv("".as_bytes()).is_err());
}
