use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::dense::{f_dense, steady_state_msd_dense, transient_msd_dense};
use super::*;
use crate::filterbank::AnalysisBank;
use crate::signal::{InputKind, InputModel, NoiseModel};
use crate::topology::Topology;

fn white(n: usize) -> Vec<InputModel> {
    vec![InputModel::new(InputKind::White, 1.0).unwrap(); n]
}

fn no_gate(samples: usize) -> MomentConfig {
    MomentConfig {
        samples,
        seed: 11,
        update_probability: UpdateProbability::Analytic {
            k_xi: f64::INFINITY,
        },
    }
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// 0 - 1 - 2, clusters {0,1} and {2}, M = 2.
fn tiny(eta: f64) -> TheoryModel {
    let t = Topology::from_edges(3, &[(0, 1), (1, 2)], &[0, 0, 1]).unwrap();
    let w = CombinationWeights::new(&t);
    let targets = TargetSet::from_base(&t, vec![0.6, -0.3], &[0.0, 0.5]).unwrap();
    let inputs = vec![
        InputModel::new(InputKind::White, 1.0).unwrap(),
        InputModel::new(InputKind::Ar1 { beta1: 0.8 }, 0.5).unwrap(),
        InputModel::new(InputKind::White, 2.0).unwrap(),
    ];
    let noises = vec![
        NoiseModel::gaussian(0.1),
        NoiseModel::gaussian(0.2),
        NoiseModel::gaussian(0.05),
    ];
    let cfg = MomentConfig {
        samples: 4000,
        seed: 3,
        update_probability: UpdateProbability::Analytic { k_xi: 2.576 },
    };
    let mom = estimate_moments(&inputs, &noises, &AnalysisBank::identity(), 2, &cfg).unwrap();
    TheoryModel::new(mom, NetworkMatrices::new(&w, &targets, eta).unwrap()).unwrap()
}

fn single_node(eb: f64, ebb: f64, ett: f64, eta: f64) -> TheoryModel {
    let t = Topology::from_adjacency(&[vec![]], &[0]).unwrap();
    let w = CombinationWeights::new(&t);
    let targets = TargetSet::from_base(&t, vec![1.0], &[0.0]).unwrap();
    let mom = moments_from_eb(
        vec![DMatrix::from_element(1, 1, eb)],
        vec![DMatrix::from_element(1, 1, ebb)],
        vec![DMatrix::from_element(1, 1, ett)],
    );
    TheoryModel::new(mom, NetworkMatrices::new(&w, &targets, eta).unwrap()).unwrap()
}

#[test]
fn white_regressors_are_isotropic() {
    let m = 8;
    let mom = estimate_moments(
        &white(1),
        &[NoiseModel::gaussian(1.0)],
        &AnalysisBank::identity(),
        m,
        &no_gate(20_000),
    )
    .unwrap();
    let ea = &mom.ea[0][0];
    assert!((ea.trace() - 1.0).abs() < 1e-6);
    assert!((ea - DMatrix::identity(m, m) / m as f64).amax() < 0.01);
    assert!(!mom.undersampled());
}

#[test]
fn every_ea_block_has_unit_trace() {
    let bank = AnalysisBank::with_default_length(4).unwrap();
    let inputs = vec![
        InputModel::new(
            InputKind::Ar2 {
                beta2: 0.1,
                beta3: 0.8
            },
            1.0
        )
        .unwrap();
        2
    ];
    let mom = estimate_moments(
        &inputs,
        &[NoiseModel::gaussian(1.0); 2],
        &bank,
        8,
        &no_gate(2000),
    )
    .unwrap();
    for node in &mom.ea {
        assert_eq!(node.len(), 4);
        for a in node {
            assert!((a.trace() - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn analytic_probability_at_default_k() {
    let p = analytic_update_probability(0.0, 2.576);
    assert!((p - 0.990).abs() < 5e-4, "{p}");
    assert!((analytic_update_probability(0.01, 2.576) - 0.99 * p).abs() < 1e-15);
    assert_eq!(analytic_update_probability(0.0, f64::INFINITY), 1.0);
}

#[test]
fn eta_zero_leaves_eb() {
    let model = tiny(0.0);
    assert_eq!(model.ez_dense(), model.moments.eb_dense());
    assert!(model.net.zeta(0.1).iter().all(|z| *z == 0.0));
}

#[test]
fn mean_bound_white_four_subbands() {
    let bank = AnalysisBank::with_default_length(4).unwrap();
    let mom = estimate_moments(
        &white(1),
        &[NoiseModel::gaussian(1.0)],
        &bank,
        8,
        &no_gate(20_000),
    )
    .unwrap();
    let b = mean_step_bound(&mom, 0.0);
    // trace is exact; subband coloring spreads the eigenvalues by about 15 %
    assert!((mom.eb[0].trace() / 8.0 - 0.5).abs() < 1e-9);
    assert!((b - 4.0).abs() < 0.6, "{b}");
    let mut prev = b;
    for eta in [0.01, 0.02, 0.04, 1.0, 1e6] {
        let next = mean_step_bound(&mom, eta);
        assert!(next < prev);
        prev = next;
    }
    assert!(prev < 1e-5);
}

#[test]
fn scalar_ms_bound() {
    let z = 0.25;
    let m = single_node(z, z * z, 0.0, 0.0);
    assert!((m.ms_formula_bound().unwrap() - 2.0 / z).abs() < 1e-9);
    let b = m.ms_step_bound().unwrap();
    assert!((b.empirical - 2.0 / z).abs() < 2e-3 * 2.0 / z, "{b:?}");
    // random B: 1 - 2 mu z + mu^2 s < 1  <=>  mu < 2 z / s
    let s = 0.1;
    let m = single_node(z, s, 0.0, 0.0);
    assert!((m.ms_formula_bound().unwrap() - 2.0 * z / s).abs() < 1e-9);
    assert!((m.ms_step_bound().unwrap().empirical - 2.0 * z / s).abs() < 2e-3 * 2.0 * z / s);
}

#[test]
fn ms_bound_below_mean_bound() {
    for eta in [0.0, 0.05] {
        let model = tiny(eta);
        let b = model.ms_step_bound().unwrap();
        let mean = model.mean_step_bound();
        assert!(b.empirical <= mean * 1.001, "{b:?} vs {mean}");
        assert!(b.formula.unwrap() <= mean * 1.001);
    }
}

#[test]
fn nlms_ms_bound_scale() {
    // normalized LMS on white input is mean-square stable for mu < 2
    let mom = estimate_moments(
        &white(1),
        &[NoiseModel::gaussian(1.0)],
        &AnalysisBank::identity(),
        4,
        &no_gate(20_000),
    )
    .unwrap();
    let t = Topology::from_adjacency(&[vec![]], &[0]).unwrap();
    let targets = TargetSet::from_base(&t, vec![1.0; 4], &[0.0]).unwrap();
    let model = TheoryModel::new(
        mom,
        NetworkMatrices::new(&CombinationWeights::new(&t), &targets, 0.0).unwrap(),
    )
    .unwrap();
    let b = model.ms_step_bound().unwrap();
    assert!(b.empirical > 1.0 && b.empirical < 4.0, "{b:?}");
    assert!(b.formula.unwrap() > 1.0 && b.formula.unwrap() < 4.0);
}

#[test]
fn zero_step_keeps_initial_state() {
    let model = tiny(0.05);
    let n = model.net.nodes() as f64;
    let curve = model.transient_msd(0.0, 20).unwrap();
    let w0 = model.net.w_star.norm_squared() / n;
    assert!(curve.msd.iter().all(|x| (x - w0).abs() < 1e-12));

    // arbitrary start: mean error is G^n w
    let mut m2 = model.clone();
    m2.net.w_star = DVector::from_fn(6, |i, _| (i as f64 * 0.7).sin());
    let g = m2.net.g_dense();
    let mut expect = m2.net.w_star.clone();
    for _ in 0..5 {
        expect = &g * expect;
    }
    assert!((m2.mean_weight_error(0.0, 5) - expect).amax() < 1e-12);
}

#[test]
fn mean_error_decays_without_bias() {
    let model = tiny(0.0);
    let mu = 0.5 * model.mean_step_bound();
    assert!(model.mean_weight_error(mu, 2000).norm() < 1e-8);
}

#[test]
fn mean_fixed_point_matches_iteration() {
    let model = tiny(0.05);
    let mu = 0.2;
    let fp = model.mean_fixed_point(mu).unwrap();
    let it = model.mean_weight_error(mu, 5000);
    assert!(fp.norm() > 1e-4);
    assert!((fp - it).amax() < 1e-10);
}

#[test]
fn blockwise_operator_matches_dense() {
    let model = tiny(0.05);
    let d = model.dim();
    let x = DMatrix::from_fn(d, d, |i, j| ((i * 7 + j * 3) as f64).cos());
    let mu = 0.3;
    let lhs = vec_of(&model.apply_f(&x, mu));
    let rhs = f_dense(&model, mu) * vec_of(&x);
    assert!((lhs - rhs).amax() < 1e-12);
}

#[test]
fn transient_matches_dense_and_converges_to_steady_state() {
    let model = tiny(0.05);
    let mu = 0.3;
    let fast = model.transient_msd(mu, 400).unwrap();
    let slow = transient_msd_dense(&model, mu, 400);
    for (a, b) in fast.msd.iter().zip(&slow) {
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-12));
    }
    let ss = model.steady_state_msd(mu).unwrap();
    let long = model.transient_msd(mu, 20_000).unwrap();
    assert!(long.converged_at.is_some());
    assert!((db(*long.msd.last().unwrap()) - db(ss)).abs() < 0.1);
    assert!((ss - steady_state_msd_dense(&model, mu).unwrap()).abs() < 1e-9 * ss);
    assert!(long.msd.iter().all(|x| *x >= 0.0));
}

#[test]
fn single_task_steady_state_is_noise_driven() {
    // eta = 0 and identical targets: MSD = mu^2/N vec(I)^T (I - F)^{-1} (G ⊗ G) vec(E{TT^T})
    let t = Topology::from_edges(2, &[(0, 1)], &[0, 0]).unwrap();
    let targets = TargetSet::from_base(&t, vec![0.5, 0.5], &[0.0]).unwrap();
    let mom = estimate_moments(
        &white(2),
        &[NoiseModel::gaussian(0.3); 2],
        &AnalysisBank::identity(),
        2,
        &no_gate(3000),
    )
    .unwrap();
    let model = TheoryModel::new(
        mom,
        NetworkMatrices::new(&CombinationWeights::new(&t), &targets, 0.0).unwrap(),
    )
    .unwrap();
    let mu = 0.4;
    let d = model.dim();
    let g = model.net.g_dense();
    let rhs = crate::linalg::kron(&g, &g) * vec_of(&model.moments.ett_dense()) * (mu * mu);
    let x = (DMatrix::identity(d * d, d * d) - f_dense(&model, mu))
        .lu()
        .solve(&rhs)
        .unwrap();
    let expect = vec_of(&DMatrix::identity(d, d)).dot(&x) / 2.0;
    let got = model.steady_state_msd(mu).unwrap();
    assert!((got - expect).abs() < 1e-9 * expect);
}

#[test]
fn stability_test_agrees_with_spectral_radius() {
    let model = tiny(0.05);
    let bound = model.empirical_ms_bound(1e-4).unwrap();
    for f in [0.5, 0.95, 1.05, 1.5] {
        let mu = f * bound;
        let rho = model.spectral_radius(mu, 20_000).unwrap();
        assert_eq!(
            model.is_ms_stable(mu).unwrap(),
            rho < 1.0,
            "mu={mu} rho={rho}"
        );
    }
    assert!(matches!(
        model.steady_state_msd(1.5 * bound),
        Err(Error::NotMeanSquareStable(_))
    ));
}

#[test]
fn cap_is_enforced() {
    let mut model = tiny(0.0);
    model.cap = 10;
    assert!(matches!(
        model.transient_msd(0.1, 5),
        Err(Error::TheoryCapExceeded { dim: 36, cap: 10 })
    ));
    assert!(matches!(
        model.steady_state_msd(0.1),
        Err(Error::TheoryCapExceeded { .. })
    ));
}
