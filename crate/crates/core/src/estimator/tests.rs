use num_complex::Complex64;

use super::*;
use crate::measurement::{run_campaign, MeasurementMode};
use crate::numerics::normalized_frobenius_error;
use crate::rng::{complex_normal, master_rng};

fn random_truth(seed: u64, n: usize) -> Vec<Complex64> {
    let mut rng = master_rng(seed);
    (0..n).map(|_| complex_normal(&mut rng) * 2e-5).collect()
}

fn exact_campaign(h: &[Complex64], t: usize, bits: u32, seed: u64) -> Campaign {
    run_campaign(h, t, bits, &mut master_rng(seed), MeasurementMode::Exact).unwrap()
}

fn assert_monotone(traj: &[f64]) {
    for w in traj.windows(2) {
        assert!(w[1] >= w[0] - 1e-6, "trajectory decreased: {traj:?}");
    }
}

fn assert_fixed_point(res: &EstimateResult, camp: &Campaign, cfg: &EstimatorConfig) {
    let max_p = camp.powers().into_iter().fold(0.0, f64::max);
    assert!(!res.residual_flagged);
    for r in &camp.records {
        let p = res.h_hat.quadratic_form(r.reflection.entries());
        assert!((p - r.power).abs() <= cfg.residual_tol * max_p, "{p:e} vs {:e}", r.power);
    }
}

#[test]
fn complex_recovery_n5() {
    let cfg = EstimatorConfig::default();
    let h = random_truth(11, 5);
    let camp = exact_campaign(&h, 25, 2, 12);
    let res = estimate_complex(&camp, &cfg).unwrap();
    assert_eq!(res.status, EstimateStatus::Converged);
    assert!(res.final_ratio().unwrap() > cfg.epsilon);
    let err = normalized_frobenius_error(&res.h_hat, &HermitianMatrix::outer(&h)).unwrap();
    assert!(err <= 1e-4, "error {err:e}");
    assert_fixed_point(&res, &camp, &cfg);
}

#[test]
fn real_recovery_n5() {
    let cfg = EstimatorConfig::default();
    let h = random_truth(21, 5);
    let camp = exact_campaign(&h, 40, 1, 22);
    let res = estimate_real(&camp, &cfg).unwrap();
    assert_eq!(res.status, EstimateStatus::Converged);
    assert!(res.h_hat.is_real());
    let truth = HermitianMatrix::outer(&h).real_part();
    let err = normalized_frobenius_error(&res.h_hat, &truth).unwrap();
    assert!(err <= 1e-3, "error {err:e}");
    assert_fixed_point(&res, &camp, &cfg);
}

#[test]
fn trajectories_are_monotone() {
    let cfg = EstimatorConfig::default();
    for trial in 0..20u64 {
        let h = random_truth(100 + trial, 5);
        for (bits, t) in [(2, 10), (1, 12)] {
            let camp = exact_campaign(&h, t, bits, 200 + trial);
            let res = estimate(&camp, &cfg).unwrap();
            assert_ne!(res.status, EstimateStatus::SolverFailed);
            assert_eq!(res.ratio_trajectory.len(), res.outer_iterations + 1);
            assert_monotone(&res.ratio_trajectory);
            if res.status == EstimateStatus::Converged {
                assert!(res.final_ratio().unwrap() > cfg.epsilon);
            }
        }
    }
}

#[test]
fn real_truth_collapses_to_rank_one() {
    let cfg = EstimatorConfig::default();
    let h: Vec<_> = random_truth(31, 5).iter().map(|z| Complex64::new(z.re, 0.0)).collect();
    let camp = exact_campaign(&h, 40, 1, 32);
    let res = estimate_real(&camp, &cfg).unwrap();
    assert_eq!(res.status, EstimateStatus::Converged);
    let eig = hermitian_eig(&res.h_hat).unwrap();
    assert!(eig.eigenvalues[1] / eig.eigenvalues[0] <= 1e-3, "{:?}", eig.eigenvalues);
}

#[test]
fn binary_campaigns_cannot_tell_conjugates_apart() {
    let cfg = EstimatorConfig::default();
    let h = random_truth(41, 5);
    let hc: Vec<_> = h.iter().map(|z| z.conj()).collect();
    let a = exact_campaign(&h, 30, 1, 42);
    let b = exact_campaign(&hc, 30, 1, 42);
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.reflection, rb.reflection);
        assert!((ra.power - rb.power).abs() <= 1e-12 * ra.power.max(1e-30));
    }
    let ea = estimate_real(&a, &cfg).unwrap();
    let eb = estimate_real(&b, &cfg).unwrap();
    let d = normalized_frobenius_error(&ea.h_hat, &eb.h_hat).unwrap();
    assert!(d <= 1e-6, "{d:e}");
}

#[test]
fn dispatch_follows_bits() {
    let cfg = EstimatorConfig::default();
    let h = random_truth(51, 3);
    for (bits, field) in
        [(1, FieldKind::RealSymmetric), (2, FieldKind::ComplexHermitian), (3, FieldKind::ComplexHermitian)]
    {
        let camp = exact_campaign(&h, 12, bits, 52);
        assert_eq!(estimate(&camp, &cfg).unwrap().field, field);
    }
    assert!(estimate_real(&exact_campaign(&h, 4, 2, 1), &cfg).is_err());
    assert!(estimate_complex(&exact_campaign(&h, 4, 1, 1), &cfg).is_err());
}

#[test]
fn overdetermined_campaign_starts_rank_one() {
    let cfg = EstimatorConfig::default();
    let h = random_truth(61, 3);
    let camp = exact_campaign(&h, 60, 2, 62);
    let res = estimate_complex(&camp, &cfg).unwrap();
    assert_eq!(res.status, EstimateStatus::Converged);
    assert!(res.outer_iterations <= 1, "{} iterations", res.outer_iterations);
}

#[test]
fn zero_campaign_gives_zero_estimate() {
    let camp = exact_campaign(&[Complex64::new(0.0, 0.0); 4], 6, 2, 1);
    let res = estimate(&camp, &EstimatorConfig::default()).unwrap();
    assert_eq!(res.status, EstimateStatus::Converged);
    assert!(res.ratio_trajectory.is_empty());
    assert_eq!(res.h_hat.frobenius_norm(), 0.0);
}

#[test]
fn perturbed_starts_agree() {
    let cfg = EstimatorConfig::default();
    let h = random_truth(71, 5);
    let camp = exact_campaign(&h, 25, 2, 72);
    let base = estimate_complex(&camp, &cfg).unwrap().initial;
    let mut rng = master_rng(73);
    let mut runs = Vec::new();
    for _ in 0..2 {
        let w: Vec<_> = (0..5).map(|_| complex_normal(&mut rng)).collect();
        let bump = HermitianMatrix::outer(&w).scaled(0.05 * base.trace() / 5.0);
        let start = HermitianMatrix::symmetrized(base.as_matrix() + bump.as_matrix());
        let res = estimate_from(&camp, &cfg, &start).unwrap();
        assert_eq!(res.status, EstimateStatus::Converged);
        runs.push(res.h_hat);
    }
    let d = normalized_frobenius_error(&runs[0], &runs[1]).unwrap();
    assert!(d <= 1e-3, "{d:e}");
}

#[test]
fn noisy_campaign_stays_feasible() {
    let cfg = EstimatorConfig::default();
    let h = random_truth(81, 5);
    let mode = MeasurementMode::Rsrp { averaging: 10_000, sigma2: 1e-12 };
    let camp = run_campaign(&h, 25, 2, &mut master_rng(82), mode).unwrap();
    assert!(campaign_slack(&camp) > 0.0);
    let res = estimate(&camp, &cfg).unwrap();
    assert_ne!(res.status, EstimateStatus::SolverFailed);
    assert!(!res.residual_flagged);
    let err = normalized_frobenius_error(&res.h_hat, &HermitianMatrix::outer(&h)).unwrap();
    assert!(err <= 1e-2, "{err:e}");
}

#[test]
fn rejects_bad_config() {
    let camp = exact_campaign(&random_truth(1, 3), 4, 2, 1);
    for cfg in [
        EstimatorConfig { epsilon: 1.0, ..Default::default() },
        EstimatorConfig { epsilon: 0.0, ..Default::default() },
        EstimatorConfig { max_outer_iters: 0, ..Default::default() },
    ] {
        assert!(estimate(&camp, &cfg).is_err());
    }
}
