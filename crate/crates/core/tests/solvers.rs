mod common;

use common::*;
use corrsense_core::cvec::{self, C64};
use corrsense_core::models::{gen_instance, gen_instance_with, NoiseModel};
use corrsense_core::rip::{certify_uniqueness, DEFAULT_BUDGET};
use corrsense_core::solvers::{
    check_success, project_ball, recovery_error, soft_threshold, solve_irls_lp, solve_irls_lp_traced,
    solve_penalized_l1, IrlsConfig, PenalizedL1Config, SolveResult, SolveStatus,
};
use corrsense_core::{Family, LinearOperator, ModelParams, SensingModel, Setting};
use proptest::prelude::*;

fn weighted_l1(x: &[C64], z: &[C64], lambda: f64) -> f64 {
    cvec::norm1(x) + lambda * cvec::norm1(z)
}

fn fourier_model(n: usize) -> SensingModel {
    SensingModel::custom(LinearOperator::fourier(n).unwrap(), LinearOperator::identity(n)).unwrap()
}

fn residual_of(model: &SensingModel, y: &[C64], r: &SolveResult) -> f64 {
    cvec::dist2(y, &model.measure(&r.x_hat, &r.z_hat).unwrap())
}

#[test]
fn zero_measurements_give_zero_solutions() {
    let model = ModelParams::new(Family::Mtx1, 64, 32, 1).build().unwrap();
    let y = cvec::zeros(32);
    let l1 = solve_penalized_l1(&model, &y, &PenalizedL1Config::default()).unwrap();
    assert!(l1.x_hat.iter().chain(&l1.z_hat).all(|v| v.norm() == 0.0));
    assert_eq!(l1.objective, 0.0);
    let irls = solve_irls_lp(&model, &y, &IrlsConfig::default()).unwrap();
    assert!(irls.x_hat.iter().chain(&irls.z_hat).all(|v| v.norm() == 0.0));
}

#[test]
fn certified_model_recovers_every_instance() {
    let model = fourier_model(32);
    let cert = certify_uniqueness(&model, 1, 1, 1.0, DEFAULT_BUDGET).unwrap();
    assert!(cert.satisfied, "{cert:?}");
    let cfg = PenalizedL1Config::new(1.0, 0.0);
    for t in 0..20 {
        let inst = gen_instance(&model, 1, 1, Setting::Gaussian, 0.0, 1000 + t).unwrap();
        let r = solve_penalized_l1(&model, &inst.y, &cfg).unwrap();
        let err = recovery_error(&r, &inst);
        assert!(err <= 1e-6, "trial {t}: error {err}");
        assert!(check_success(&r, &inst));
        let truth = weighted_l1(&inst.x_true, &inst.z_true, 1.0);
        assert!(r.objective <= truth + 1e-6);
    }
}

#[test]
fn scaling_the_data_scales_the_solution() {
    let model = ModelParams::new(Family::Mtx1, 64, 32, 3).build().unwrap();
    let inst = gen_instance(&model, 2, 1, Setting::Gaussian, 0.01, 4).unwrap();
    let c = 7.0;
    let eps = 0.01 * 32f64.sqrt();
    let base = solve_penalized_l1(&model, &inst.y, &PenalizedL1Config::new(1.0, eps)).unwrap();
    let scaled = solve_penalized_l1(&model, &cvec::scale(&inst.y, c), &PenalizedL1Config::new(1.0, c * eps)).unwrap();
    assert_eq!((base.status, scaled.status), (SolveStatus::Converged, SolveStatus::Converged));
    let mut u = base.x_hat.clone();
    u.extend(&base.z_hat);
    let mut v = scaled.x_hat.clone();
    v.extend(&scaled.z_hat);
    let cu = cvec::scale(&u, c);
    assert!(cvec::dist2(&cu, &v) <= 1e-6 * cvec::norm2(&cu));
}

#[test]
fn converged_solves_are_feasible() {
    let model = ModelParams::new(Family::PartialCirculant, 64, 32, 5).build().unwrap();
    let mut converged_with_noise = 0;
    for seed in 0..6 {
        for amp in [0.0, 0.001, 0.02, 0.1] {
            let inst = gen_instance(&model, 3, 2, Setting::Gaussian, amp, seed).unwrap();
            let cfg = PenalizedL1Config::new(1.0, amp * 32f64.sqrt());
            let r = solve_penalized_l1(&model, &inst.y, &cfg).unwrap();
            assert!((r.residual - residual_of(&model, &inst.y, &r)).abs() <= 1e-12);
            if r.status != SolveStatus::Converged {
                continue;
            }
            if amp > 0.0 {
                assert!(r.residual <= cfg.epsilon * (1.0 + 10.0 * cfg.tol), "seed {seed}, amp {amp}");
                converged_with_noise += 1;
            } else {
                assert!(r.residual <= 1e-6 * cvec::norm2(&inst.y));
            }
        }
    }
    eprintln!("converged with noise: {converged_with_noise}");
    assert!(converged_with_noise > 0);
}

#[test]
fn irls_first_step_is_the_minimum_norm_solution() {
    let mut r = rng(6);
    let (a, h) = (rand_matrix(&mut r, 4, 4), rand_matrix(&mut r, 4, 4));
    let model = SensingModel::custom(LinearOperator::dense(a).unwrap(), LinearOperator::dense(h).unwrap()).unwrap();
    let theta = model.theta().materialize().unwrap();
    let y = rand_vec(&mut r, 4);

    let gram_inv = (&theta * theta.adjoint()).try_inverse().unwrap();
    let u_expected = mat_vec(&(theta.adjoint() * gram_inv), &y);

    let cfg = IrlsConfig { outer_max: 1, ..Default::default() };
    let res = solve_irls_lp(&model, &y, &cfg).unwrap();
    let mut u = res.x_hat.clone();
    u.extend(&res.z_hat);
    assert!(max_abs_diff(&u, &u_expected) <= 1e-8);
}

#[test]
fn irls_recovers_signal_only_instances() {
    let model = ModelParams::new(Family::PartialCirculant, 64, 32, 2).build().unwrap();
    for seed in 0..5 {
        let inst = gen_instance(&model, 1, 0, Setting::Gaussian, 0.0, seed).unwrap();
        let irls = solve_irls_lp(&model, &inst.y, &IrlsConfig::default()).unwrap();
        let l1 = solve_penalized_l1(&model, &inst.y, &PenalizedL1Config::default()).unwrap();
        assert!(recovery_error(&irls, &inst) <= 1e-5);
        let d = cvec::dist2(&irls.x_hat, &l1.x_hat) + cvec::dist2(&irls.z_hat, &l1.z_hat);
        assert!(d <= 1e-5);
    }
}

#[test]
fn irls_smoothing_schedule_is_monotone() {
    let model = ModelParams::new(Family::Mtx1, 64, 32, 9).build().unwrap();
    for (seed, amp) in [(1, 0.0), (2, 0.05)] {
        let inst = gen_instance(&model, 4, 2, Setting::Flat, amp, seed).unwrap();
        let cfg = IrlsConfig::default();
        let (res, trace) = solve_irls_lp_traced(&model, &inst.y, &cfg).unwrap();
        assert_eq!(trace.len(), res.iterations);
        assert!(trace.iter().all(|&e| e >= cfg.eps_floor));
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn solves_are_bitwise_deterministic() {
    let model = ModelParams::new(Family::CsOfdm, 64, 32, 4).build().unwrap();
    let inst = gen_instance_with(&model, 3, 2, Setting::Gaussian, 0.01, NoiseModel::Symmetric, 8).unwrap();
    let cfg = PenalizedL1Config::new(1.0, 0.01 * 32f64.sqrt());
    let (a, b) = (
        solve_penalized_l1(&model, &inst.y, &cfg).unwrap(),
        solve_penalized_l1(&model, &inst.y, &cfg).unwrap(),
    );
    assert_eq!(bits(&a.x_hat), bits(&b.x_hat));
    assert_eq!(bits(&a.z_hat), bits(&b.z_hat));
    assert_eq!((a.iterations, a.residual.to_bits()), (b.iterations, b.residual.to_bits()));
    let (a, b) = (
        solve_irls_lp(&model, &inst.y, &IrlsConfig::default()).unwrap(),
        solve_irls_lp(&model, &inst.y, &IrlsConfig::default()).unwrap(),
    );
    assert_eq!(bits(&a.x_hat), bits(&b.x_hat));
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
}

#[test]
fn invalid_inputs_are_rejected() {
    let model = ModelParams::new(Family::Mtx1, 16, 8, 0).build().unwrap();
    assert!(solve_penalized_l1(&model, &cvec::zeros(7), &PenalizedL1Config::default()).is_err());
    assert!(solve_penalized_l1(&model, &cvec::zeros(8), &PenalizedL1Config::new(0.0, 0.0)).is_err());
    assert!(solve_penalized_l1(&model, &cvec::zeros(8), &PenalizedL1Config::new(1.0, -1.0)).is_err());
    let bad = IrlsConfig { p: 1.0, ..Default::default() };
    assert!(solve_irls_lp(&model, &cvec::zeros(8), &bad).is_err());
}

proptest! {
    #[test]
    fn soft_threshold_minimizes_the_scalar_objective(seed in any::<u64>(), len in 1usize..8) {
        let mut r = rng(seed);
        let v: Vec<C64> = rand_vec(&mut r, len);
        let t: Vec<f64> = rand_vec(&mut r, len).iter().map(|c| c.re.abs()).collect();
        let out = soft_threshold(&v, &t).unwrap();
        for i in 0..len {
            let f = |x: C64| 0.5 * (x - v[i]).norm_sqr() + t[i] * x.norm();
            // The minimizer lies on the segment from 0 to v; scan it and a
            // disc around v.
            let dir = if v[i].norm() > 0.0 { v[i] / v[i].norm() } else { C64::new(1.0, 0.0) };
            let radius = v[i].norm() + 1.0;
            let mut best = f64::INFINITY;
            for g in 0..1000 {
                best = best.min(f(dir * (radius * g as f64 / 999.0)));
                let ang = std::f64::consts::TAU * g as f64 / 1000.0;
                best = best.min(f(v[i] * 0.5 + C64::from_polar(0.5 * radius, ang)));
            }
            prop_assert!(f(out[i]) <= best + 1e-4);
        }
    }

    #[test]
    fn ball_projection_lands_in_the_ball(seed in any::<u64>(), radius in 0.0..3.0f64) {
        let mut r = rng(seed);
        let (v, c) = (rand_vec(&mut r, 6), rand_vec(&mut r, 6));
        let p = project_ball(&v, &c, radius).unwrap();
        let d = cvec::dist2(&p, &c);
        prop_assert!(d <= radius * (1.0 + 1e-12) + 1e-15);
        if cvec::dist2(&v, &c) <= radius {
            prop_assert_eq!(bits(&p), bits(&v));
        }
    }
}
