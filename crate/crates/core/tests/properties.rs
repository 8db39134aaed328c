use proptest::prelude::*;
use smallball::asymptotics::{small_ball, Regime};
use smallball::laplace::ProblemSpec;
use smallball::spectrum::{NoiseSpec, SpectrumModel};
use smallball::sytaya::{
    chebyshev_log_upper_bound, exact_log_probability, solve_r, sytaya_log_probability, QuadraticForm,
};
use smallball::tauberian::{laplace_from_small_ball, small_ball_from_laplace, Exponent, LogLaplaceAsymptotic};

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn spectrum() -> impl Strategy<Value = SpectrumModel> {
    prop_oneof![
        (0.5f64..4.0).prop_map(|length| SpectrumModel::DirichletInterval { length }),
        Just(SpectrumModel::HarmonicOscillator),
        (1u32..4, prop::sample::select(vec![0.5, 1.0, 2.0]), 0.5f64..3.0).prop_map(|(d, m, s)| {
            SpectrumModel::WeylGeneric {
                d,
                m,
                s,
                correction: 0.0,
            }
        }),
    ]
}

/// Effective decay `g = γ/d` away from the critical value.
fn decay(lo: f64) -> impl Strategy<Value = f64> {
    (lo..2.5f64).prop_filter("near critical", |g| (g - 1.0).abs() > 0.02)
}

proptest! {
    #[test]
    fn tauberian_round_trip(alpha in 1e-3f64..1e3, tau in 0.05f64..0.95, beta in 0.0f64..4.0) {
        let a = LogLaplaceAsymptotic::new(alpha, Exponent::from_f64(tau), Exponent::from_f64(beta)).unwrap();
        let back = laplace_from_small_ball(&small_ball_from_laplace(&a).unwrap()).unwrap();
        prop_assert!(rel(back.alpha, alpha) < 1e-12);
        prop_assert!((back.tau.to_f64() - tau).abs() < 1e-12 * tau);
        prop_assert!((back.beta.to_f64() - beta).abs() <= 1e-12 * beta);
    }

    #[test]
    fn tauberian_constant_increases_with_alpha(alpha in 1e-3f64..1e3, factor in 1.001f64..10.0, tau in 0.05f64..0.95) {
        let t = Exponent::from_f64(tau);
        let lo = small_ball_from_laplace(&LogLaplaceAsymptotic::new(alpha, t, Exponent::int(0)).unwrap()).unwrap();
        let hi = small_ball_from_laplace(&LogLaplaceAsymptotic::new(alpha * factor, t, Exponent::int(0)).unwrap()).unwrap();
        prop_assert!(hi.constant > lo.constant);
    }

    #[test]
    fn root_decreases_in_eps(coeffs in prop::collection::vec(0.01f64..10.0, 1..6), u in 0.01f64..0.9, v in 1.01f64..1.5) {
        let form = QuadraticForm::finite(coeffs.clone()).unwrap();
        let mass: f64 = coeffs.iter().sum();
        let e1 = u * mass;
        let e2 = (e1 * v).min(0.95 * mass);
        prop_assume!(e2 > e1);
        prop_assert!(solve_r(&form, e1).unwrap() > solve_r(&form, e2).unwrap());
    }

    #[test]
    fn chebyshev_bound_dominates_exact(a1 in 0.05f64..5.0, a2 in 0.05f64..5.0, frac in 1e-4f64..0.5, two in any::<bool>()) {
        let coeffs = if two { vec![a1, a2] } else { vec![a1] };
        let mass: f64 = coeffs.iter().sum();
        let eps = frac * mass;
        let form = QuadraticForm::finite(coeffs.clone()).unwrap();
        let bound = chebyshev_log_upper_bound(
            |p| form.series(|a| -0.5 * (2.0 * a * p).ln_1p()).unwrap().value,
            eps,
        )
        .unwrap();
        let exact = exact_log_probability(&coeffs, eps).unwrap();
        prop_assert!(bound.value >= exact - 1e-10 * exact.abs(), "{} < {}", bound.value, exact);
    }

    #[test]
    fn sytaya_matches_exact_for_small_forms(a1 in 0.01f64..10.0, ratio in 1e-3f64..1.0, two in any::<bool>()) {
        let coeffs = if two { vec![a1, a1 * ratio] } else { vec![a1] };
        let mass: f64 = coeffs.iter().sum();
        let eps = 1e-3 * mass;
        let s = sytaya_log_probability(&QuadraticForm::finite(coeffs.clone()).unwrap(), eps).unwrap();
        let e = exact_log_probability(&coeffs, eps).unwrap();
        prop_assert!(rel(s, e) < 0.05, "{coeffs:?}: {s} vs {e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn power_noise_reduction(spec in spectrum(), r in 0.5f64..2.0, g in 0.02f64..2.0, s in 0.0f64..0.75, t in 0.2f64..5.0) {
        let d = spec.d() as f64;
        let m = spec.m();
        let gamma = (g + 0.5 - r * m / d).max(0.05) * d + 2.0 * m * s;
        let reduced_gamma = gamma - 2.0 * m * s;
        prop_assume!((reduced_gamma / d - 1.0).abs() > 0.02);
        let with_q = ProblemSpec::solution(spec.clone(), gamma, r, t).with_noise(NoiseSpec::PowerOfA { s });
        let plain = ProblemSpec::solution(spec, reduced_gamma, r, t);
        let a = small_ball(&with_q).unwrap();
        let b = small_ball(&plain).unwrap();
        prop_assert_eq!(a.regime, b.regime);
        prop_assert_eq!(a.laplace, b.laplace);
        prop_assert_eq!(a.asymptotic, b.asymptotic);
    }

    #[test]
    fn horizon_scaling(spec in spectrum(), r in 0.5f64..2.0, g in decay(0.0), t in 0.2f64..5.0, noise in any::<bool>()) {
        let d = spec.d() as f64;
        let m = spec.m();
        let g = if noise { 0.55 + g } else { g.max(0.52 - r * m / d) };
        prop_assume!((g - 1.0).abs() > 0.02);
        let make = |t: f64| {
            if noise {
                ProblemSpec::noise(spec.clone(), g * d, t)
            } else {
                ProblemSpec::solution(spec.clone(), g * d, r, t)
            }
        };
        let a = small_ball(&make(t)).unwrap();
        let b = small_ball(&make(2.0 * t)).unwrap();
        let tau = a.laplace.tau.to_f64();
        let exponent = match (a.regime, noise) {
            (Regime::Supercritical | Regime::Critical, _) => 2.0,
            (Regime::Subcritical, false) => 1.0 / (1.0 - tau),
            (Regime::Subcritical, true) => 1.0 / (g * (1.0 - tau)),
            (Regime::FiniteDim, _) => unreachable!(),
        };
        prop_assert_eq!(a.asymptotic.rate, b.asymptotic.rate);
        prop_assert!(rel(b.asymptotic.constant / a.asymptotic.constant, 2f64.powf(exponent)) < 1e-12,
            "{:?} ratio {} exponent {}", a.regime, b.asymptotic.constant / a.asymptotic.constant, exponent);
    }
}
