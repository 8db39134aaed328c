use std::f64::consts::PI;

use smallball::asymptotics::small_ball;
use smallball::laplace::ProblemSpec;
use smallball::montecarlo::{discretized_mean, functional_mean, simulate, Integrator, SimulationPlan};
use smallball::spectrum::SpectrumModel;
use smallball::sytaya::{bm_mode_form, brownian_l2_log_cdf, sytaya_log_probability};

fn interval() -> SpectrumModel {
    SpectrumModel::DirichletInterval { length: PI }
}

fn brownian_samples() -> smallball::montecarlo::SampleSet {
    let plan = SimulationPlan::new(ProblemSpec::noise(interval(), 0.0, 1.0), 1, 1 << 10, 100_000, 5).unwrap();
    simulate(&plan).unwrap()
}

#[test]
fn brownian_small_ball_matches_the_exact_distribution() {
    let samples = brownian_samples();
    for eps in [0.05, 0.1, 0.3] {
        let est = samples.small_ball(eps).unwrap();
        assert!(est.diagnostic.is_none(), "{est:?}");
        let exact = brownian_l2_log_cdf(1.0, eps).unwrap().exp();
        assert!(
            (est.probability.estimate - exact).abs() <= 3.0 * est.probability.standard_error,
            "eps={eps}: {est:?} vs {exact}"
        );
    }
    let wide = samples.small_ball(10.0 * 0.5).unwrap();
    assert!(wide.probability.estimate > 0.9);
}

#[test]
fn sytaya_tracks_the_exact_brownian_small_ball() {
    let form = bm_mode_form(1.0, 10_000).unwrap();
    let errors: Vec<f64> = [0.05, 0.02, 0.01]
        .iter()
        .map(|&eps| {
            let exact = brownian_l2_log_cdf(1.0, eps).unwrap();
            ((sytaya_log_probability(&form, eps).unwrap() - exact) / exact).abs()
        })
        .collect();
    assert!(
        errors[0] < 0.05 && errors[1] < errors[0] && errors[2] < errors[1],
        "{errors:?}"
    );
}

#[test]
#[ignore = "the Sytaya approximation is 4.3% off the exact value at eps = 0.05, outside a 3% slack"]
fn brownian_small_ball_within_three_percent_of_sytaya() {
    let est = brownian_samples().small_ball(0.05).unwrap();
    let reference = sytaya_log_probability(&bm_mode_form(1.0, 10_000).unwrap(), 0.05).unwrap();
    let allowed = 2.0 * est.log_standard_error() + 0.03 * reference.abs();
    assert!(
        (est.log_probability() - reference).abs() <= allowed,
        "ln P̂ = {} vs {reference}",
        est.log_probability()
    );
}

#[test]
fn trapezoid_converges_at_second_order() {
    let spec = ProblemSpec::solution(interval(), 0.0, 1.0, 1.0);
    let exact = functional_mean(&spec, 4).unwrap();
    let errors: Vec<f64> = [1u64 << 8, 1 << 9, 1 << 10]
        .iter()
        .map(|&m| (discretized_mean(&spec, 4, m, Integrator::Trapezoid).unwrap() - exact).abs())
        .collect();
    let order = (errors[1] / errors[2]).log2();
    assert!((errors[0] / errors[1]).log2() >= 1.9 && order >= 1.9, "{errors:?}");
    let left: Vec<f64> = [1u64 << 8, 1 << 9]
        .iter()
        .map(|&m| (discretized_mean(&spec, 4, m, Integrator::LeftPoint).unwrap() - exact).abs())
        .collect();
    assert!(((left[0] / left[1]).log2() - 1.0).abs() < 0.05, "{left:?}");
}

#[test]
fn more_modes_move_the_laplace_estimate_within_the_bias_bound() {
    let spec = ProblemSpec::noise(interval(), 2.0, 1.0);
    let small = simulate(&SimulationPlan::new(spec.clone(), 64, 256, 20_000, 3).unwrap()).unwrap();
    let large = simulate(&SimulationPlan::new(spec, 128, 256, 20_000, 3).unwrap()).unwrap();
    let a = small.laplace(1.0).unwrap();
    let b = large.laplace(1.0).unwrap();
    assert!(b.estimate < a.estimate);
    assert!(a.estimate - b.estimate < a.truncation_bias_bound, "{a:?} {b:?}");
}

#[test]
#[ignore = "pre-asymptotic at P ≈ 1e-3: ln P̂ is about 0.65 of the asymptote and converges slowly in the mode count"]
fn heat_small_ball_sits_in_the_asymptotic_band() {
    let spec = ProblemSpec::solution(interval(), 0.0, 1.0, 1.0);
    let engine = small_ball(&spec).unwrap().asymptotic;
    // Pre-asymptotic sanity band around P ≈ 1e-3.
    let eps = (engine.constant / 1e3f64.ln()).powf(1.0 / 3.0);
    let plan = SimulationPlan::new(spec, 32, 128, 1_000_000, 17).unwrap();
    let est = simulate(&plan).unwrap().small_ball(eps).unwrap();
    assert!(est.hits >= 25, "{est:?}");
    let ratio = est.log_probability() / engine.evaluate(eps);
    assert!(
        (0.7..=1.3).contains(&ratio),
        "eps={eps}: ln P̂ = {}, ratio {ratio}",
        est.log_probability()
    );
}
