use std::f64::consts::PI;

use dilation_core::catalog::{rank_catalog, shipped_catalog};
use dilation_core::instability::{
    norm_decay, tau_density, tau_density_multibranch, tau_min_pointset, tau_multibranch, tau_two_branch, Integrator,
    ProbeDensity,
};
use dilation_core::interferometer::{
    mz_output_intensities, squeezer_io, variance_mc_settings, variance_phi, visibility, AmplifierSpec, CoaxSpec,
    HybridSpec,
};
use dilation_core::lightclock::{
    binomial_weights, dephasing_factor, pulse_train_flat, pulse_train_superposed_exact, LightClockSpec, PulseSpec,
};
use dilation_core::numerics::montecarlo::McSettings;
use dilation_core::numerics::quadrature::integrate_breaks;
use dilation_core::numerics::Tolerance;
use dilation_core::potentials::{
    line_integral_phi, potential_at, uniform_ball_potential, Body, Branch, MassConfiguration, SuperpositionState,
};
use dilation_core::{Vec3, CODATA_2018};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::strategy::ValueTree;

fn vec3(scale: f64) -> impl Strategy<Value = Vec3> {
    (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn log_range(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn unit_vec() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, 0.0..2.0 * PI).prop_map(|(z, phi)| {
        let s = (1.0 - z * z).sqrt();
        Vec3::new(s * phi.cos(), s * phi.sin(), z)
    })
}

fn simple_body() -> impl Strategy<Value = Body> {
    (log_range(1e-6, 1e3), log_range(1e-3, 1.0), vec3(1.0), any::<bool>()).prop_map(|(m, r, c, ball)| {
        if ball {
            Body::ball(m, r, c).unwrap()
        } else {
            Body::point(m, c).unwrap()
        }
    })
}

/// Point-mass branches within 1 μm of the origin, random weights.
fn point_state(branches: usize, equal: bool) -> impl Strategy<Value = SuperpositionState> {
    (
        log_range(1e-18, 1e-12),
        prop::collection::vec((vec3(1e-6), 0.1f64..1.0), branches),
    )
        .prop_map(move |(mass, parts)| {
            let total: f64 = parts.iter().map(|p| if equal { 1.0 } else { p.1 }).sum();
            SuperpositionState::new(
                parts
                    .into_iter()
                    .map(|(c, w)| Branch {
                        weight: if equal { 1.0 } else { w } / total,
                        config: MassConfiguration::single(Body::point(mass, c).unwrap()),
                    })
                    .collect(),
            )
            .unwrap()
        })
}

fn probe_point() -> impl Strategy<Value = Vec3> {
    (unit_vec(), log_range(5e-6, 1e-3)).prop_map(|(u, r)| u * r)
}

proptest! {
    #[test]
    fn potential_is_linear(a in simple_body(), b in simple_body(), x in vec3(10.0)) {
        prop_assume!(x.distance(a.center) > 1e-6 && x.distance(b.center) > 1e-6);
        let both = MassConfiguration::new(vec![a, b]);
        prop_assume!(both.is_ok());
        let both = both.unwrap();
        let sum = a.potential_at(x).unwrap() + b.potential_at(x).unwrap();
        prop_assert_eq!(potential_at(&both, x).unwrap(), sum);
    }

    #[test]
    fn ball_potential_continuous_at_surface(gm in log_range(1e-20, 1e10), a in log_range(1e-9, 1e3)) {
        let inside = uniform_ball_potential(gm, a, a * (1.0 - f64::EPSILON));
        let outside = uniform_ball_potential(gm, a, a * (1.0 + f64::EPSILON));
        prop_assert!((inside / outside - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dephasing_factor_bounded(omega in log_range(1e6, 1e16), dta in 0.0f64..1e-9, dtb in 0.0f64..1e-9) {
        let two = dephasing_factor(omega, &[(0.5, dta), (0.5, dtb)]).norm();
        prop_assert!(two <= 1.0 + 1e-15);
        let same = dephasing_factor(omega, &[(0.5, dta), (0.5, dta)]);
        prop_assert!((same.norm() - 1.0).abs() < 1e-15);
        prop_assert!((same - Complex64::from_polar(1.0, omega * dta)).norm() < 1e-12);
    }

    #[test]
    fn binomial_weights_sum_to_one(n in 1usize..=100) {
        let s: f64 = binomial_weights(n).iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_bounded_by_one(state in (2usize..6).prop_flat_map(|n| point_state(n, false)),
                           x in probe_point(), m in log_range(1e-20, 1e-10), t in 0.0f64..1e6) {
        prop_assert_eq!(norm_decay(&state, m, x, 0.0).unwrap(), 1.0);
        prop_assert!(norm_decay(&state, m, x, t).unwrap() <= 1.0);
    }

    #[test]
    fn timescales_scale_inversely_with_probe_mass(state in point_state(2, true), x in probe_point(),
                                                  m in log_range(1e-20, 1e-10), k in 1i32..5) {
        let f = 2f64.powi(k);
        let ratio = |a: f64, b: f64| a / b;
        let two = ratio(tau_two_branch(m, &state, x).unwrap().tau.as_f64(), tau_two_branch(f * m, &state, x).unwrap().tau.as_f64());
        let multi = ratio(tau_multibranch(&state, m, x).unwrap().tau.as_f64(), tau_multibranch(&state, f * m, x).unwrap().tau.as_f64());
        let set = ratio(
            tau_min_pointset(&[(m, x)], &state).unwrap().tau.as_f64(),
            tau_min_pointset(&[(f * m, x)], &state).unwrap().tau.as_f64(),
        );
        let point = |mass| tau_density(&ProbeDensity::point(mass, x), &state, Integrator::default()).unwrap().tau.as_f64();
        prop_assert_eq!(two, f);
        prop_assert_eq!(multi, f);
        prop_assert_eq!(set, f);
        prop_assert_eq!(point(m) / point(f * m), f);
    }

    #[test]
    fn multibranch_reduces_to_two_branch(state in point_state(2, true), x in probe_point(), m in log_range(1e-20, 1e-10)) {
        let a = tau_multibranch(&state, m, x).unwrap().tau.as_f64();
        let b = tau_two_branch(m, &state, x).unwrap().tau.as_f64();
        prop_assert!((a / b - 1.0).abs() < 1e-6);
    }

    #[test]
    fn point_density_reduces_to_multibranch(state in (2usize..6).prop_flat_map(|n| point_state(n, false)),
                                            x in probe_point(), m in log_range(1e-20, 1e-10)) {
        let a = tau_density_multibranch(&ProbeDensity::point(m, x), &state, Integrator::default()).unwrap().tau.as_f64();
        let b = tau_multibranch(&state, m, x).unwrap().tau.as_f64();
        prop_assert!((a / b - 1.0).abs() < 1e-6);
    }

    #[test]
    fn adding_a_particle_never_increases_tau(state in point_state(2, true), x in probe_point(), y in probe_point(),
                                             m in log_range(1e-20, 1e-10), n in log_range(1e-20, 1e-10)) {
        let one = tau_min_pointset(&[(m, x)], &state).unwrap().tau.as_f64();
        let two = tau_min_pointset(&[(m, x), (n, y)], &state).unwrap().tau.as_f64();
        prop_assert!(two <= one);
    }

    #[test]
    fn hybrid_is_unitary(alpha in 0.0f64..2.0 * PI, dphi in -PI..PI) {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let rotated = HybridSpec {
            transmission: Complex64::from_polar(h, alpha),
            reflection: Complex64::from_polar(h, alpha + 0.5 * PI),
        };
        prop_assert!(rotated.validate().is_ok());
        let m = rotated.matrix();
        for i in 0..2 {
            for j in 0..2 {
                let dot: Complex64 = (0..2).map(|k| m[i][k] * m[j][k].conj()).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - expected).norm() < 1e-12);
            }
        }
        let d = HybridSpec::default();
        let (p6, p7) = mz_output_intensities(&d, &d, dphi);
        let (lo, hi) = ((1.0 - dphi.cos()) / 2.0, (1.0 + dphi.cos()) / 2.0);
        prop_assert!(((p6 - lo).abs() < 1e-12 && (p7 - hi).abs() < 1e-12) || ((p6 - hi).abs() < 1e-12 && (p7 - lo).abs() < 1e-12));
        prop_assert!((p6 + p7 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn squeezer_preserves_metric(gain in log_range(1.0, 1e10), theta in 0.0f64..2.0 * PI, phase in 0.0f64..2.0 * PI,
                                 a in (-1.0f64..1.0, -1.0f64..1.0)) {
        let amp = AmplifierSpec::with_gain(gain, theta).unwrap();
        let (c, s) = amp.cosh_sinh();
        // The identity holds to rounding of the individual terms.
        prop_assert!((c * c - s * s - 1.0).abs() <= 1e-12 * c * c);
        let s_hyp = amp.squeeze();
        prop_assert!((s_hyp.cosh() / c - 1.0).abs() < 1e-9);
        // Idler vacuum: |out|² - |idler out|² is conserved.
        let input = (Complex64::new(a.0, a.1), Complex64::new(0.3, -0.2));
        let (o1, o2) = squeezer_io(input, &amp, phase);
        let before = input.0.norm_sqr() - input.1.norm_sqr();
        let after = o1.norm_sqr() - o2.norm_sqr();
        prop_assert!((after - before).abs() <= 1e-9 * gain.max(1.0));
    }

    #[test]
    fn visibility_bounded_and_decreasing(b_ph in log_range(1e3, 1e9), b_a in log_range(1e3, 1e9),
                                          g in log_range(1.0, 1e6), k in 1.01f64..10.0) {
        let v = visibility(b_ph, b_a, g);
        prop_assert!(v > 1.0 / 3.0 && v <= 1.0);
        prop_assert!(visibility(b_ph, b_a, g * k) <= v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn far_field_of_every_shape(mass in log_range(1e-3, 1e3), size in log_range(1e-3, 1.0),
                                kind in 0usize..4, dir in unit_vec(), axis in unit_vec()) {
        let body = match kind {
            0 => Body::point(mass, Vec3::ZERO),
            1 => Body::ball(mass, size, Vec3::ZERO),
            2 => Body::cube(mass, size, Vec3::ZERO),
            _ => Body::cylinder(mass, 0.3 * size, size, Vec3::ZERO, axis),
        }.unwrap();
        let r = 100.0 * body.extent().max(size);
        let phi = body.potential_at(dir * r).unwrap();
        let point = -CODATA_2018.g * mass / r;
        prop_assert!(((phi - point) / point).abs() < 1e-3);
    }

    #[test]
    fn line_integral_matches_segment_quadrature(mass in log_range(1e-15, 1e3), a in log_range(1e-8, 1e-2),
                                                 ratio in log_range(4.0, 1e5)) {
        let len = a * ratio;
        let ball = Body::ball(mass, a, Vec3::ZERO).unwrap();
        let h = 0.5 * len;
        let quad = integrate_breaks(
            |x| ball.potential_at(Vec3::new(x, 0.0, 0.0)).unwrap(),
            &[-h, -a, 0.0, a, h],
            Tolerance::relative(1e-12).with_max_evals(1_000_000),
        );
        let closed = line_integral_phi(&ball, len).unwrap();
        prop_assert!((closed / quad.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn degenerate_superposition_is_the_flat_train(a in log_range(1e-7, 1e-3), t in 0.01f64..0.3, n in 1usize..50) {
        let spec = LightClockSpec::new(0.03, 1e-15, a, a, t, PulseSpec::gaussian(1e12)).unwrap();
        prop_assert_eq!(pulse_train_superposed_exact(&spec, n).unwrap(), pulse_train_flat(&spec, n).unwrap());
    }

    #[test]
    fn exact_train_orders_carry_their_amplitude(a in log_range(1e-7, 1e-4), f in 1.01f64..10.0, n in 1usize..60) {
        let spec = LightClockSpec::new(0.03, 1e-12, a, a * f, 0.1, PulseSpec::gaussian(1e12)).unwrap();
        let train = pulse_train_superposed_exact(&spec, n).unwrap();
        for order in &train.orders {
            let s: f64 = order.sub_pulses().iter().map(|p| p.weight).sum();
            prop_assert!((s / order.amplitude - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn density_invariant_under_translation(state in point_state(3, false), dir in unit_vec(),
                                           radius in log_range(1e-7, 5e-6), shift in vec3(10.0)) {
        let probe = ProbeDensity::ball(2e3, radius, dir * 2e-5);
        let a = tau_density_multibranch(&probe, &state, Integrator::default()).unwrap().tau.as_f64();
        let b = tau_density_multibranch(&probe.translated(shift), &state.translated(shift), Integrator::default())
            .unwrap()
            .tau
            .as_f64();
        prop_assert!((a / b - 1.0).abs() < 1e-6);
    }
}

#[test]
fn monte_carlo_agrees_with_adaptive_within_reported_errors() {
    let runner = &mut proptest::test_runner::TestRunner::deterministic();
    let strategy = (point_state(3, false), unit_vec(), log_range(5e-7, 5e-6));
    for i in 0..5 {
        let (state, dir, radius) = strategy.new_tree(runner).unwrap().current();
        let probe = ProbeDensity::ball(2e3, radius, dir * 2e-5);
        let mc = tau_density_multibranch(
            &probe,
            &state,
            Integrator::MonteCarlo(McSettings::new(400_000, 11 + i).with_strata(1, 400)),
        )
        .unwrap();
        let ad = tau_density_multibranch(&probe, &state, Integrator::default()).unwrap();
        let gap = (mc.denominator / ad.denominator - 1.0).abs();
        let combined = mc.quadrature_error + ad.quadrature_error;
        assert!(gap <= 4.0 * combined, "gap {gap:e} vs combined error {combined:e}");
    }
}

#[test]
fn variance_monte_carlo_agrees_with_exact_moments() {
    for gain in [10.0, 100.0, 1000.0] {
        let amp = AmplifierSpec::with_gain(gain, 0.0).unwrap();
        let r = variance_phi(&amp, &CoaxSpec::default(), Some(variance_mc_settings(2_000_000, 5))).unwrap();
        let mc = r.monte_carlo.unwrap();
        let se = r.monte_carlo_std_error.unwrap();
        assert!((mc - r.exact_moments).abs() <= 4.0 * se, "G={gain}: {mc:e} ± {se:e} vs {:e}", r.exact_moments);
        assert!((mc / r.closed_form - 1.0).abs() < 0.05, "G={gain}");
    }
}

#[test]
fn catalog_is_deterministic() {
    let entries = shipped_catalog().unwrap();
    let a = rank_catalog(&entries, Integrator::default()).unwrap();
    let b = rank_catalog(&entries, Integrator::default()).unwrap();
    assert_eq!(a, b);
}
