use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::catalog;
use crate::operator::{DensityMatrix, HermitianOperator};
use crate::random;

fn identity(d: usize) -> Weight {
    Weight::identity(d)
}

/// Direct minimisation of the Holevo function over a two-coefficient family
/// by a shrinking grid (the function is convex in the coefficients).
fn grid_oracle(fam: &UnbiasedFamily, w: &Weight, extent: f64) -> f64 {
    assert_eq!(fam.dimension(), 1);
    let eval = |c1: f64, c2: f64| {
        let c = DMatrix::from_row_slice(2, 1, &[c1, c2]);
        holevo_function(&fam.z_matrix(&fam.operators(&c)), w).unwrap()
    };
    let (mut cx, mut cy, mut half) = (0.0, 0.0, extent);
    let mut best = eval(0.0, 0.0);
    for _ in 0..40 {
        let steps = 20;
        let (mut bx, mut by) = (cx, cy);
        for i in 0..=steps {
            for j in 0..=steps {
                let x = cx - half + 2.0 * half * i as f64 / steps as f64;
                let y = cy - half + 2.0 * half * j as f64 / steps as f64;
                let v = eval(x, y);
                if v < best {
                    best = v;
                    bx = x;
                    by = y;
                }
            }
        }
        cx = bx;
        cy = by;
        half *= 0.5;
    }
    best
}

fn rank_one_psd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    random::real_psd(d, 1, rng)
}

#[test]
fn qubit_xy_identity_weight() {
    let m = catalog::qubit_xy::<f64>();
    let theta = [0.0, 0.0];
    let sol = holevo_bound(&m, &theta, &identity(2)).unwrap();
    assert!((sol.value - 4.0).abs() < 1e-7, "HB = {}", sol.value);
    let fam = unbiased_family(&m, &theta).unwrap();
    let oracle = grid_oracle(&fam, &identity(2), 4.0);
    assert!((oracle - sol.value).abs() < 1e-3);
    assert!(sol.diagnostics.feasibility >= -1e-7);
    assert!(sol.value >= 2.0 - 1e-7 && sol.value <= 4.0 + 1e-7);
}

#[test]
fn family_examples() {
    let fam = unbiased_family(&catalog::qubit_phase::<f64>(), &[0.4]).unwrap();
    assert_eq!(fam.dimension(), 4 - 2);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let n = rng.random_range(2..=4);
        let m = random::unitary_model(n, 2, n, &mut rng).unwrap();
        let theta = random::parameters(2, &mut rng);
        let fam = unbiased_family(&m, &theta).unwrap();
        assert!(fam.residuals.mean <= 1e-9, "{:?}", fam.residuals);
        assert!(fam.residuals.derivative <= 1e-8, "{:?}", fam.residuals);
        assert!(fam.residuals.homogeneous <= 1e-8, "{:?}", fam.residuals);
    }

    // Collinear generators: singular QFIM.
    let rho = DensityMatrix::from_pure(&crate::pauli::ket_plus()).unwrap();
    let z = HermitianOperator::new(crate::pauli::z::<f64>()).unwrap();
    let m = ParametricModel::unitary(rho, vec![z.scale(0.5), z.clone()]).unwrap();
    assert!(matches!(
        unbiased_family(&m, &[0.1, 0.2]),
        Err(Error::NotIdentifiable { .. })
    ));
}

#[test]
fn single_parameter_collapse() {
    let sol = holevo_bound(&catalog::coin::<f64>(), &[0.3], &identity(1)).unwrap();
    assert!((sol.value - 0.21).abs() < 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let n = rng.random_range(2..=4);
        let m = random::unitary_model(n, 1, rng.random_range(1..=n), &mut rng).unwrap();
        let theta = random::parameters(1, &mut rng);
        let f = crate::bounds::qfim(&m, &theta).unwrap().qfim.matrix()[(0, 0)];
        let sol = holevo_bound(&m, &theta, &identity(1)).unwrap();
        assert!(
            (sol.value - 1.0 / f).abs() < 1e-6 * (1.0 / f).max(1.0),
            "{} vs {}",
            sol.value,
            1.0 / f
        );
    }
}

#[test]
fn rank_one_weight_matches_qcrb() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..15 {
        let n = rng.random_range(2..=4);
        let d = rng.random_range(2..=3);
        let m = random::unitary_model(n, d, rng.random_range(1..=n), &mut rng).unwrap();
        let theta = random::parameters(d, &mut rng);
        let Ok(fam) = unbiased_family(&m, &theta) else { continue };
        let nu: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = Weight::rank_one(&nu).unwrap();
        let sol = solve_family(&fam, &w, &BarrierOptions::default()).unwrap();
        let qcrb = (w.matrix() * fam.qfim().qfim.pinv()).trace();
        assert!(
            (sol.value - qcrb).abs() <= 1e-5 * qcrb.max(1.0),
            "{} vs {}",
            sol.value,
            qcrb
        );
        assert!(sol.diagnostics.feasibility >= -1e-7 * sol.v_opt.amax().max(1.0));
    }
}

#[test]
fn mixed_qubit_against_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..8 {
        let m = random::unitary_model(2, 2, 2, &mut rng).unwrap();
        let theta = random::parameters(2, &mut rng);
        let fam = unbiased_family(&m, &theta).unwrap();
        let w = Weight::new(random::real_psd(2, 2, &mut rng)).unwrap();
        let sol = solve_family(&fam, &w, &BarrierOptions::default()).unwrap();
        let extent = 20.0 * (1.0 + fam.particular.iter().map(|x| x.max_abs()).fold(0.0, f64::max));
        let oracle = grid_oracle(&fam, &w, extent);
        assert!(
            (sol.value - oracle).abs() <= 1e-6 * oracle.max(1.0),
            "{} vs {}",
            sol.value,
            oracle
        );
    }
}

#[test]
fn monotone_and_scale_covariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10 {
        let n = rng.random_range(2..=3);
        let m = random::unitary_model(n, 2, rng.random_range(1..=n), &mut rng).unwrap();
        let theta = random::parameters(2, &mut rng);
        let fam = unbiased_family(&m, &theta).unwrap();
        let w1 = random::real_psd(2, 2, &mut rng);
        let w2 = &w1 + rank_one_psd(&mut rng, 2);
        let opts = BarrierOptions::default();
        let h1 = solve_family(&fam, &Weight::new(w1.clone()).unwrap(), &opts)
            .unwrap()
            .value;
        let h2 = solve_family(&fam, &Weight::new(w2).unwrap(), &opts).unwrap().value;
        assert!(h2 >= h1 - 1e-7);
        for c in [0.5, 2.0, 10.0] {
            let hc = solve_family(&fam, &Weight::new(&w1 * c).unwrap(), &opts).unwrap().value;
            assert!((hc - c * h1).abs() <= 1e-8 * c * h1, "c = {c}: {hc} vs {}", c * h1);
        }
    }
}

#[test]
fn sandwich_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    while checked < 50 {
        let n = rng.random_range(2..=3);
        let m = random::unitary_model(n, 2, rng.random_range(1..=n), &mut rng).unwrap();
        let theta = random::parameters(2, &mut rng);
        let w = Weight::new(random::real_psd(2, 2, &mut rng)).unwrap();
        let s = hb_sandwich(&m, &theta, &w).unwrap();
        assert!(s.holds, "{s:?}");
        assert!(s.ratio <= 2.0 + 1e-5);
        checked += 1;
    }
}

#[test]
fn sandwich_examples() {
    // Commuting sensors: G_Q = 0, HB = QCRB.
    let s = hb_sandwich(&catalog::two_sensor::<f64>(), &[0.2, 0.5], &identity(2)).unwrap();
    assert!((s.hb - s.qcrb).abs() <= 1e-5 * s.qcrb && s.r_measure < 1e-8);
    // Maximal incompatibility.
    let s = hb_sandwich(&catalog::qubit_xy::<f64>(), &[0.0, 0.0], &identity(2)).unwrap();
    assert!((s.ratio - 2.0).abs() < 1e-6 && s.holds);
    let s = hb_sandwich(&catalog::qubit_phase::<f64>(), &[0.3], &identity(1)).unwrap();
    assert!((s.ratio - 1.0).abs() < 1e-6);
}

#[test]
fn chain_collapses_for_one_parameter() {
    let model = catalog::qubit_phase::<f64>();
    let povm = catalog::sigma_x_povm();
    let c = bound_chain_report(&model, &povm, &[0.4], &identity(1), 10, "single copy").unwrap();
    assert!(c.ordering_holds);
    assert!((c.crb - 0.1).abs() < 1e-6 && (c.hb - 0.1).abs() < 1e-6 && (c.qcrb - 0.1).abs() < 1e-6);
    assert_eq!(c.interval.1, Some(c.crb));
}

#[test]
fn chain_strict_for_incompatible_generators() {
    let model = catalog::qubit_xy::<f64>();
    // σ_x eigenbasis only sees the σ_y rotation: the CRB is infinite.
    let c = bound_chain_report(&model, &catalog::sigma_x_povm(), &[0.0, 0.0], &identity(2), 1, "x").unwrap();
    assert!(c.crb_inestimable && c.interval.1.is_none());
    assert!(c.ordering_holds);
    assert!((c.hb - 4.0).abs() < 1e-6 && (c.qcrb - 2.0).abs() < 1e-9);

    let c = bound_chain_report(&model, &catalog::pauli6_povm(), &[0.0, 0.0], &identity(2), 1, "pauli6").unwrap();
    assert!(!c.crb_inestimable && c.ordering_holds);
    assert!((c.crb - 6.0).abs() < 1e-6, "{}", c.crb);
    assert!(c.crb > c.hb + 1.0 && c.hb > c.qcrb + 1.0);
    assert_eq!(c.interval, (c.hb, Some(c.crb)));
}

#[test]
fn chain_rank_one_weight() {
    let model = catalog::qubit_xy::<f64>();
    let w = Weight::rank_one(&[0.6, 0.8]).unwrap();
    let c = bound_chain_report(&model, &catalog::pauli6_povm(), &[0.1, -0.2], &w, 4, "rank one").unwrap();
    assert!((c.hb - c.qcrb).abs() <= 1e-5 * c.qcrb);
    assert!(c.ordering_holds);
}
