use proptest::prelude::*;

use super::*;
use crate::estimator::{estimate, EstimatorConfig};
use crate::measurement::{random_reflection, run_campaign, MeasurementMode, MeasurementRecord};
use crate::numerics::HermitianMatrix;
use crate::rng::{complex_normal, master_rng};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Every `v ∈ Φ_b^{N-1} × {1}`.
fn all_reflections(n: usize, bits: u32) -> Vec<ReflectionVector> {
    let levels = 1usize << bits;
    let total = levels.pow(n as u32 - 1);
    (0..total)
        .map(|mut code| {
            let phases = (0..n - 1)
                .map(|_| {
                    let k = code % levels;
                    code /= levels;
                    k
                })
                .collect();
            ReflectionVector::from_phase_indices(bits, phases).unwrap()
        })
        .collect()
}

fn brute_force_best(direction: &[Complex64], bits: u32) -> f64 {
    all_reflections(direction.len(), bits).iter().map(|v| beam_objective(direction, v)).fold(0.0, f64::max)
}

fn random_direction(rng: &mut crate::rng::SimRng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| complex_normal(rng)).collect()
}

#[test]
fn aligned_direction_is_returned() {
    let v = ReflectionVector::from_phase_indices(2, vec![1, 3, 0, 2]).unwrap();
    let d: Vec<_> = v.entries().iter().map(|z| z * 0.7).collect();
    let out = optimize_discrete(&d, 2).unwrap();
    assert_eq!(out, v);
    assert!((beam_objective(&d, &out) - 25.0 * 0.49).abs() <= 1e-12);
}

#[test]
fn small_binary_case_matches_enumeration() {
    let d = [c(1.0, 0.0), c(-0.9, 0.0), c(0.0, 0.1)];
    let out = optimize_discrete(&d, 1).unwrap();
    assert_eq!(beam_objective(&d, &out), brute_force_best(&d, 1));
    // The two real entries add coherently; the imaginary direct term cannot
    // break the tie between u = (+1, −1) and u = (−1, +1).
    let u = out.phase_indices();
    assert_ne!(u[0], u[1]);
}

#[test]
fn matches_enumeration() {
    let mut rng = master_rng(5);
    for n in 3..=6 {
        for bits in [1, 2] {
            for _ in 0..20 {
                let d = random_direction(&mut rng, n);
                let out = optimize_discrete(&d, bits).unwrap();
                assert_eq!(out.entries().last(), Some(&c(1.0, 0.0)));
                assert_eq!(beam_objective(&d, &out), brute_force_best(&d, bits), "n={n} b={bits}");
            }
        }
    }
}

#[test]
fn rejects_zero_direction() {
    assert!(matches!(optimize_discrete(&[c(0.0, 0.0); 3], 2), Err(Error::Degenerate(_))));
    assert!(optimize_discrete(&[c(1.0, 0.0)], 2).is_err());
}

proptest! {
    #[test]
    fn dominates_naive_quantization(seed in any::<u64>(), n in 2usize..10, bits in 1u32..4) {
        let mut rng = master_rng(seed);
        let d = random_direction(&mut rng, n);
        let set = PhaseSet::new(bits).unwrap();
        let levels = set.len();
        let last = set.nearest(d[n - 1]);
        let naive: Vec<usize> = d[..n - 1].iter().map(|z| (set.nearest(*z) + levels - last) % levels).collect();
        let naive = ReflectionVector::from_phase_indices(bits, naive).unwrap();
        let out = optimize_discrete(&d, bits).unwrap();
        prop_assert!(beam_objective(&d, &out) >= beam_objective(&d, &naive) * (1.0 - 1e-12));
    }

    #[test]
    fn invariant_to_global_rotation(seed in any::<u64>(), n in 2usize..10, bits in 1u32..4, theta in 0.0..std::f64::consts::TAU) {
        let mut rng = master_rng(seed);
        let d = random_direction(&mut rng, n);
        let rot = Complex64::from_polar(1.0, theta);
        let dr: Vec<_> = d.iter().map(|z| z * rot).collect();
        let a = beam_objective(&d, &optimize_discrete(&d, bits).unwrap());
        let b = beam_objective(&dr, &optimize_discrete(&dr, bits).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a);
    }
}

#[test]
fn composite_direction_rank_one_is_real() {
    let x = [c(0.6, 0.0), c(-0.8, 0.0)];
    let h = PsdMatrix::with_default_tolerance(HermitianMatrix::outer(&x).scaled(4.0)).unwrap();
    let d = composite_direction_b1(&h).unwrap();
    let sign = d[0].re.signum() * 0.6_f64.signum();
    for (a, b) in d.iter().zip(&x) {
        assert!((a.re - sign * 2.0 * b.re).abs() <= 1e-12);
        assert!(a.im.abs() <= 1e-12);
    }
}

#[test]
fn composite_direction_identity_is_isotropic() {
    let h = PsdMatrix::with_default_tolerance(HermitianMatrix::identity(2)).unwrap();
    let d = composite_direction_b1(&h).unwrap();
    for phases in [vec![0], vec![1]] {
        let v = ReflectionVector::from_phase_indices(1, phases).unwrap();
        assert!((beam_objective(&d, &v) - 2.0).abs() <= 1e-12);
    }
}

#[test]
fn composite_direction_reproduces_quadratic_form() {
    let mut rng = master_rng(8);
    for _ in 0..20 {
        let a: Vec<_> = (0..6).map(|_| complex_normal(&mut rng)).collect();
        let h = PsdMatrix::with_default_tolerance(HermitianMatrix::outer(&a).real_part()).unwrap();
        let d = composite_direction_b1(&h).unwrap();
        let v = random_reflection(5, 1, &mut rng).unwrap();
        let direct = h.quadratic_form(v.entries());
        assert!((beam_objective(&d, &v) - direct).abs() <= 1e-10 * direct.max(1.0));
    }
    assert!(composite_direction_b1(&PsdMatrix::zeros(3)).is_err());
}

#[test]
fn exact_estimate_reaches_upper_bound() {
    let mut rng = master_rng(9);
    let h = random_direction(&mut rng, 6);
    for bits in [2, 3] {
        let truth = PsdMatrix::with_default_tolerance(HermitianMatrix::outer(&h)).unwrap();
        let designed = design_from_matrix(&truth, bits).unwrap();
        let ub = upper_bound(&h, bits).unwrap();
        let g = |v: &ReflectionVector| effective_gain(&h, v, 1.0, Scheme::Proposed, 0).unwrap().gain;
        assert!((g(&designed) - g(&ub)).abs() <= 1e-12 * g(&ub));
    }
}

#[test]
fn binary_design_from_real_part_is_optimal() {
    let mut rng = master_rng(10);
    for n in 3..=8 {
        let h = random_direction(&mut rng, n);
        let hr = PsdMatrix::with_default_tolerance(HermitianMatrix::outer(&h).real_part()).unwrap();
        let designed = design_from_matrix(&hr, 1).unwrap();
        let best = all_reflections(n, 1).iter().map(|v| v.inner(&h).norm_sqr()).fold(0.0, f64::max);
        assert!((designed.inner(&h).norm_sqr() - best).abs() <= 1e-12 * best, "n={n}");
    }
}

#[test]
fn design_from_estimator_output() {
    let mut rng = master_rng(11);
    let h: Vec<_> = random_direction(&mut rng, 5).iter().map(|z| z * 1e-5).collect();
    let camp = run_campaign(&h, 30, 2, &mut rng, MeasurementMode::Exact).unwrap();
    let res = estimate(&camp, &EstimatorConfig::default()).unwrap();
    let v = design_from_estimate(&res, 2).unwrap();
    let ub = upper_bound(&h, 2).unwrap();
    assert!((v.inner(&h).norm_sqr() / ub.inner(&h).norm_sqr() - 1.0).abs() <= 1e-6);

    let zero = EstimateResult { h_hat: PsdMatrix::zeros(5), ..res };
    assert!(design_from_estimate(&zero, 2).is_err());
}

fn record(bits: u32, phases: Vec<usize>, power: f64) -> MeasurementRecord {
    MeasurementRecord { reflection: ReflectionVector::from_phase_indices(bits, phases).unwrap(), power }
}

#[test]
fn rms_picks_first_maximum() {
    let camp = Campaign::from_records(vec![record(1, vec![0, 1], 2.0)]).unwrap();
    assert_eq!(rms_baseline(&camp).phase_indices(), &[0, 1]);
    let camp = Campaign::from_records(vec![
        record(1, vec![0, 0], 1.0),
        record(1, vec![0, 1], 2.0),
        record(1, vec![1, 0], 3.0),
    ])
    .unwrap();
    assert_eq!(rms_baseline(&camp).phase_indices(), &[1, 0]);
    let camp = Campaign::from_records(vec![
        record(1, vec![0, 0], 1.0),
        record(1, vec![0, 1], 3.0),
        record(1, vec![1, 1], 3.0),
    ])
    .unwrap();
    assert_eq!(rms_baseline(&camp).phase_indices(), &[0, 1]);
}

#[test]
fn csm_follows_constructed_separation() {
    // Element 0 uses +1 (index 0) exactly when the power is large.
    let camp = Campaign::from_records(vec![
        record(1, vec![0, 0], 5.0),
        record(1, vec![0, 1], 6.0),
        record(1, vec![1, 0], 1.0),
        record(1, vec![1, 1], 0.5),
    ])
    .unwrap();
    assert_eq!(csm_baseline(&camp).unwrap().phase_indices()[0], 0);
}

#[test]
fn csm_two_bit_toy() {
    // One record per phase; element 1 mirrors element 0.
    let camp = Campaign::from_records(vec![
        record(2, vec![0, 3], 1.0),
        record(2, vec![1, 2], 4.0),
        record(2, vec![2, 1], 3.0),
        record(2, vec![3, 0], 2.0),
    ])
    .unwrap();
    assert_eq!(csm_baseline(&camp).unwrap().phase_indices(), &[1, 2]);
}

#[test]
fn csm_reports_uncovered_pairs() {
    let camp = Campaign::from_records(vec![record(2, vec![0, 1], 1.0), record(2, vec![1, 1], 2.0)]).unwrap();
    match csm_baseline(&camp) {
        Err(Error::Coverage(missing)) => {
            assert!(missing.contains(&(0, 2)) && missing.contains(&(1, 0)));
            assert!(!missing.contains(&(1, 1)));
        }
        other => panic!("expected coverage error, got {other:?}"),
    }
}

/// Conditional means recomputed element by element and phase by phase.
pub(crate) fn naive_csm(camp: &Campaign) -> Vec<usize> {
    let levels = 1usize << camp.bits;
    (0..camp.dim - 1)
        .map(|n| {
            let mut best = (f64::NEG_INFINITY, 0);
            for k in 0..levels {
                let mut total = 0.0;
                let mut hits = 0;
                for r in &camp.records {
                    if r.reflection.phase_indices()[n] == k {
                        total += r.power;
                        hits += 1;
                    }
                }
                let mean = total / hits as f64;
                if mean > best.0 {
                    best = (mean, k);
                }
            }
            best.1
        })
        .collect()
}

#[test]
fn csm_matches_naive_oracle() {
    let mut rng = master_rng(12);
    for bits in [1, 2] {
        for _ in 0..5 {
            let h = random_direction(&mut rng, 9);
            let camp = run_campaign(&h, 200, bits, &mut rng, MeasurementMode::Exact).unwrap();
            assert_eq!(csm_baseline(&camp).unwrap().phase_indices(), naive_csm(&camp).as_slice());
        }
    }
}

#[test]
fn upper_bound_dominates_random_reflections() {
    let mut rng = master_rng(13);
    let h = random_direction(&mut rng, 8);
    let ub = effective_gain(&h, &upper_bound(&h, 2).unwrap(), 1.0, Scheme::UpperBound, 0).unwrap();
    for _ in 0..100 {
        let v = random_reflection(7, 2, &mut rng).unwrap();
        assert!(effective_gain(&h, &v, 1.0, Scheme::Rms, 0).unwrap().gain <= ub.gain);
    }
}

#[test]
fn gain_matches_lifted_form() {
    let mut rng = master_rng(14);
    let h = random_direction(&mut rng, 5);
    let v = random_reflection(4, 3, &mut rng).unwrap();
    let p0 = 2.0;
    let report = effective_gain(&h, &v, p0, Scheme::Csm, 7).unwrap();
    let vv = HermitianMatrix::outer(v.entries());
    let lifted = HermitianMatrix::outer(&h).trace_product(&vv) / p0;
    assert!((report.gain - lifted).abs() <= 1e-12 * lifted);
    assert!((report.gain_db - 10.0 * lifted.log10()).abs() <= 1e-9);
    assert_eq!(report.t_used, 7);

    let zero = effective_gain(&[c(0.0, 0.0); 5], &v, p0, Scheme::Csm, 0).unwrap();
    assert_eq!(zero.gain, 0.0);
    assert!(effective_gain(&h[..4], &v, p0, Scheme::Csm, 0).is_err());
}

#[test]
fn scheme_names_round_trip() {
    for s in Scheme::ALL {
        assert_eq!(Scheme::parse(s.as_str()), Some(s));
    }
    assert_eq!(Scheme::parse("passive"), None);
}
