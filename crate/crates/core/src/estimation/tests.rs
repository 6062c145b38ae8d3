use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

use proptest::prelude::*;

use super::*;
use crate::catalog;

fn phase() -> (ParametricModel<f64>, Povm64) {
    (catalog::qubit_phase(), catalog::sigma_x_povm())
}

/// Index of the `|+⟩` outcome of the σ_x POVM.
fn plus_index(model: &ParametricModel<f64>, povm: &Povm64) -> usize {
    let p = probabilities(model, povm, &[0.0]).unwrap();
    if p.values()[0] > 0.5 {
        0
    } else {
        1
    }
}

#[test]
fn deterministic_outcome() {
    let (model, povm) = phase();
    let r = sample_outcomes(&model, &povm, &[0.0], 1000, 3).unwrap();
    assert_eq!(r.counts[plus_index(&model, &povm)], 1000);
    assert_eq!(r.counts.iter().sum::<u64>(), 1000);
}

#[test]
fn fixed_seed_reproduces() {
    let (model, povm) = phase();
    let a = sample_outcomes(&model, &povm, &[0.7], 5000, 11).unwrap();
    let b = sample_outcomes(&model, &povm, &[0.7], 5000, 11).unwrap();
    assert_eq!(a, b);
    let c = sample_outcomes_stream(&model, &povm, &[0.7], 5000, 11, 1).unwrap();
    assert_ne!(a.counts, c.counts);
}

#[test]
fn binomial_concentration() {
    let (model, povm) = phase();
    let plus = plus_index(&model, &povm);
    let p = probabilities(&model, &povm, &[FRAC_PI_3]).unwrap();
    assert!((p.values()[plus] - 0.75).abs() < 1e-12);
    let m = 100_000u64;
    let r = sample_outcomes(&model, &povm, &[FRAC_PI_3], m, 5).unwrap();
    let f = r.counts[plus] as f64 / m as f64;
    let sigma = (0.75f64 * 0.25 / m as f64).sqrt();
    assert!((f - 0.75).abs() < 5.0 * sigma, "{f}");
}

#[test]
fn exact_counts_recover_grid_point() {
    let (model, povm) = phase();
    let domain = [(0.5, 1.5)];
    let grid = LikelihoodGrid::new(&model, &povm, &domain, 101).unwrap();
    let star = grid.theta(37)[0];
    let p = probabilities(&model, &povm, &[star]).unwrap();
    // Counts proportional to P(k|θ*) up to integer rounding: scale so both are integral.
    let m = 1u64 << 40;
    let counts: Vec<u64> = p.values().iter().map(|x| (x * m as f64).round() as u64).collect();
    let rec = OutcomeRecord {
        seed: 0,
        stream: 0,
        theta_true: vec![star],
        m: counts.iter().sum(),
        counts,
    };
    let e = max_likelihood_on(&rec, &grid, &model, &povm).unwrap();
    assert_eq!(e.grid_index, 37);
    assert!((e.theta_hat[0] - star).abs() < 1e-9);
}

#[test]
fn binomial_argmax_matches_closed_form() {
    let (model, povm) = phase();
    let plus = plus_index(&model, &povm);
    let domain = [(0.2, 2.8)];
    let step = 2.6 / 2000.0;
    for seed in 0..5 {
        let r = sample_outcomes(&model, &povm, &[1.1], 2000, seed).unwrap();
        let f = r.counts[plus] as f64 / r.m as f64;
        // P(+|θ) = (1 + cos θ)/2 is maximised at cos θ̂ = 2f − 1.
        let analytic = (2.0 * f - 1.0).acos();
        let e = max_likelihood(&r, &model, &povm, &domain, DEFAULT_RESOLUTION).unwrap();
        assert!(
            (e.theta_hat[0] - analytic).abs() <= step,
            "{} vs {analytic}",
            e.theta_hat[0]
        );
        assert!(!e.tie);
    }
}

#[test]
fn flat_likelihood_takes_lowest_index() {
    let model = catalog::qubit_phase::<f64>();
    let povm = Povm64::trivial(2);
    let r = sample_outcomes(&model, &povm, &[0.3], 100, 1).unwrap();
    let e = max_likelihood(&r, &model, &povm, &[(0.0, 1.0)], 11).unwrap();
    assert!(e.tie);
    assert_eq!(e.grid_index, 0);
    assert_eq!(e.theta_hat, vec![0.0]);
}

#[test]
fn impossible_record_is_rejected() {
    let (model, povm) = phase();
    let plus = plus_index(&model, &povm);
    let mut counts = vec![0, 0];
    counts[1 - plus] = 10;
    let rec = OutcomeRecord {
        seed: 0,
        stream: 0,
        theta_true: vec![0.0],
        counts,
        m: 10,
    };
    // Only θ = 0 is on the grid and there the minus outcome is impossible.
    let e = max_likelihood(&rec, &model, &povm, &[(-1e-300, 1e-300)], 3);
    assert_eq!(e.unwrap_err(), Error::DegenerateLikelihood);
}

#[test]
fn covariance_examples() {
    let t = [0.3, -0.2];
    let c = empirical_covariance(&[t.to_vec(), t.to_vec(), t.to_vec()], &t).unwrap();
    assert_eq!(c, DMatrix::zeros(2, 2));
    let d = 0.01;
    let est: Vec<Vec<f64>> = (0..10)
        .map(|i| vec![t[0] + if i % 2 == 0 { d } else { -d }, t[1]])
        .collect();
    let c = empirical_covariance(&est, &t).unwrap();
    assert!((c[(0, 0)] - d * d).abs() < 1e-16 && c[(0, 1)] == 0.0 && c[(1, 1)] == 0.0);
    assert!(empirical_covariance(&[], &t).is_err());
}

#[test]
fn saturation_moderate_shots() {
    let (model, povm) = phase();
    let theta = [FRAC_PI_2];
    let run = saturation_report(&SaturationConfig {
        model: &model,
        povm: &povm,
        theta: &theta,
        m: 10_000,
        trials: 400,
        seed: 21,
        domain: &[(FRAC_PI_2 - 0.5, FRAC_PI_2 + 0.5)],
        resolution: DEFAULT_RESOLUTION,
    })
    .unwrap();
    assert!((run.crb[0][0] - 1e-4).abs() < 1e-10);
    assert!((run.qcrb[0][0] - 1e-4).abs() < 1e-10);
    // Variance estimate over 400 trials has relative sd √(2/400) ≈ 7%.
    assert!(run.z_scores[0].abs() < 4.0, "{:?}", run);
    assert!(!run.pre_asymptotic);
    assert_eq!(run.rows.len(), 400);
}

#[test]
fn single_shot_is_pre_asymptotic() {
    let (model, povm) = phase();
    let run = saturation_report(&SaturationConfig {
        model: &model,
        povm: &povm,
        theta: &[1.0],
        m: 1,
        trials: 100,
        seed: 1,
        domain: &[(0.1, 3.0)],
        resolution: 201,
    })
    .unwrap();
    assert!(run.pre_asymptotic);
}

#[test]
fn too_few_trials() {
    let (model, povm) = phase();
    let r = saturation_report(&SaturationConfig {
        model: &model,
        povm: &povm,
        theta: &[1.0],
        m: 10,
        trials: 99,
        seed: 1,
        domain: &[(0.1, 3.0)],
        resolution: 201,
    });
    assert!(r.is_err());
}

#[test]
fn independent_sensors_are_uncorrelated() {
    let model = catalog::two_sensor::<f64>();
    let x = catalog::sigma_x_povm::<f64>();
    let povm = x.tensor(&x).unwrap();
    let theta = [FRAC_PI_2, FRAC_PI_2];
    let run = saturation_report(&SaturationConfig {
        model: &model,
        povm: &povm,
        theta: &theta,
        m: 2000,
        trials: 200,
        seed: 8,
        domain: &[(1.1, 2.1), (1.1, 2.1)],
        resolution: 201,
    })
    .unwrap();
    assert!(run.off_diagonal_z[0][1].abs() <= 5.0, "{:?}", run.off_diagonal_z);
    for j in 0..2 {
        assert!((run.diagonal_ratio[j] - 1.0).abs() < 0.3);
    }
}

#[test]
fn estimator_is_consistent() {
    let (model, povm) = phase();
    let theta = 1.2;
    let grid = LikelihoodGrid::new(&model, &povm, &[(0.7, 1.7)], DEFAULT_RESOLUTION).unwrap();
    let median_error = |m: u64| {
        let mut errs: Vec<f64> = (0..101)
            .map(|t| {
                let r = sample_outcomes_stream(&model, &povm, &[theta], m, 4, t).unwrap();
                (max_likelihood_on(&r, &grid, &model, &povm).unwrap().theta_hat[0] - theta).abs()
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        errs[50]
    };
    let e = [median_error(1_000), median_error(10_000), median_error(100_000)];
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
}

#[test]
fn csv_layout() {
    let rows = vec![
        TrialRow {
            trial: 0,
            theta_hat: vec![1.5, 0.25],
            loglik: -3.0,
        },
        TrialRow {
            trial: 1,
            theta_hat: vec![1.0, 0.5],
            loglik: -2.5,
        },
    ];
    let mut buf = Vec::new();
    write_trials_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "trial,theta_0,theta_1,loglik");
    assert_eq!(lines.len(), 3);
    let fields: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(fields, vec![0.0, 1.5, 0.25, -3.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_sum_to_m(p0 in 0.0f64..1.0, p1 in 0.0f64..1.0, m in 1u64..100_000, seed in any::<u64>()) {
        let raw = [p0, p1, 1.0];
        let s: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let c = multinomial(&p, m, &mut rng_for(seed, 0)).unwrap();
        prop_assert_eq!(c.iter().sum::<u64>(), m);
        prop_assert_eq!(&c, &multinomial(&p, m, &mut rng_for(seed, 0)).unwrap());
    }

    #[test]
    fn estimates_stay_in_box(theta in 0.6f64..2.5, seed in any::<u64>()) {
        let (model, povm) = phase();
        let r = sample_outcomes(&model, &povm, &[theta], 500, seed).unwrap();
        let e = max_likelihood(&r, &model, &povm, &[(0.5, 2.6)], 301).unwrap();
        prop_assert!(e.theta_hat[0] >= 0.5 && e.theta_hat[0] <= 2.6);
    }
}
