//! Cross-checks of every closed form against an independent route, collected
//! into a deterministic pass/fail report.

pub mod oracles;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::CODATA_2018;
use crate::display::sig6;
use crate::error::{Error, Result};
use crate::instability::{
    norm_decay, tau_density, tau_density_multibranch, tau_entangled, tau_min_pointset, tau_moving_probe,
    tau_multibranch, tau_product, tau_self, tau_two_branch, Integrator, MovingProbe, ProbeDensity,
};
use crate::interferometer::{
    critical_gain, gaussian_moment, gaussian_moment4_large_gain, gaussian_moment_exact, mz_output_intensities,
    output_flux_f6, raised_cosine_flux, squeezer_io, tau_vs_gain, variance_mc_settings, variance_phi, visibility,
    AmplifierSpec, CoaxSpec, HybridSpec, InterferometerSpec,
};
use crate::lightclock::{
    binomial_weights, cavity_response, gaussian_continuum_weight, pulse_height_asymptotic, pulse_train_flat,
    LightClockSpec, PulseSpec, TrainOrder,
};
use crate::numerics::montecarlo::{stream_rng, McSettings, DEFAULT_SEED};
use crate::numerics::quadrature::integrate_breaks;
use crate::numerics::Tolerance;
use crate::potentials::{delta_phi, line_integral_phi, Body, MassConfiguration, SuperpositionState};
use crate::vec3::Vec3;

use oracles::*;

/// How a check's discrepancy is measured against its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// |measured/reference - 1|.
    Relative,
    /// |measured - reference|.
    Absolute,
    /// max(measured/reference, reference/measured).
    Factor,
    /// |measured - reference| in units of the Monte Carlo standard error.
    Sigma,
    /// Boolean condition; discrepancy is 0 when it holds.
    Condition,
    /// Reported for information, never fails.
    Recorded,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::Relative => "relative",
            Metric::Absolute => "absolute",
            Metric::Factor => "factor",
            Metric::Sigma => "sigma",
            Metric::Condition => "condition",
            Metric::Recorded => "recorded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub metric: Metric,
    pub measured: f64,
    pub reference: f64,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub note: String,
}

impl Check {
    fn new(name: &str, metric: Metric, measured: f64, reference: f64, discrepancy: f64, tolerance: f64) -> Self {
        let passed = match metric {
            Metric::Recorded => true,
            _ => discrepancy <= tolerance,
        };
        Self {
            name: name.into(),
            metric,
            measured,
            reference,
            discrepancy,
            tolerance,
            passed,
            note: String::new(),
        }
    }

    pub fn relative(name: &str, measured: f64, reference: f64, tolerance: f64) -> Self {
        Self::new(name, Metric::Relative, measured, reference, relative_gap(measured, reference), tolerance)
    }

    pub fn absolute(name: &str, measured: f64, reference: f64, tolerance: f64) -> Self {
        Self::new(name, Metric::Absolute, measured, reference, (measured - reference).abs(), tolerance)
    }

    pub fn factor(name: &str, measured: f64, reference: f64, max_factor: f64) -> Self {
        let q = measured / reference;
        let d = if q > 0.0 { q.max(1.0 / q) } else { f64::INFINITY };
        Self::new(name, Metric::Factor, measured, reference, d, max_factor)
    }

    pub fn sigma(name: &str, measured: f64, reference: f64, std_error: f64, max_sigma: f64) -> Self {
        Self::new(name, Metric::Sigma, measured, reference, (measured - reference).abs() / std_error, max_sigma)
    }

    pub fn condition(name: &str, holds: bool, measured: f64, reference: f64) -> Self {
        Self::new(name, Metric::Condition, measured, reference, if holds { 0.0 } else { 1.0 }, 0.0)
    }

    pub fn recorded(name: &str, measured: f64, reference: f64) -> Self {
        Self::new(name, Metric::Recorded, measured, reference, relative_gap(measured, reference), f64::NAN)
    }

    /// Worst relative discrepancy over several (measured, reference) pairs.
    pub fn worst_relative(name: &str, pairs: &[(f64, f64)], tolerance: f64) -> Self {
        worst(name, pairs, tolerance, Metric::Relative, relative_gap)
    }

    /// Worst absolute discrepancy over several (measured, reference) pairs.
    pub fn worst_absolute(name: &str, pairs: &[(f64, f64)], tolerance: f64) -> Self {
        worst(name, pairs, tolerance, Metric::Absolute, |m, r| (m - r).abs())
    }

    pub fn failed(name: &str, err: &Error) -> Self {
        let mut c = Self::new(name, Metric::Condition, f64::NAN, f64::NAN, f64::INFINITY, 0.0);
        c.passed = false;
        c.note = format!("error: {err}");
        c
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

fn relative_gap(measured: f64, reference: f64) -> f64 {
    if measured == reference {
        0.0
    } else {
        (measured / reference - 1.0).abs()
    }
}

fn worst(name: &str, pairs: &[(f64, f64)], tolerance: f64, metric: Metric, gap: fn(f64, f64) -> f64) -> Check {
    let mut pick = (f64::NAN, f64::NAN, -1.0);
    for &(m, r) in pairs {
        let d = gap(m, r);
        // NaN discrepancies must surface as failures.
        if !(d <= pick.2) {
            pick = (m, r, if d.is_nan() { f64::INFINITY } else { d });
        }
    }
    Check::new(name, metric, pick.0, pick.1, pick.2, tolerance).with_note(format!("{} instances", pairs.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Sample budget of the variance Monte Carlo.
    pub mc_samples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            mc_samples: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub mc_samples: usize,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_text(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = format!("verify seed={} mc_samples={}\n", self.seed, self.mc_samples);
        for c in &self.checks {
            out.push_str(&format!(
                "{} {:width$}  measured={} reference={} {}={} tol={}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                sig6(c.measured),
                sig6(c.reference),
                c.metric.label(),
                sig6(c.discrepancy),
                sig6(c.tolerance),
            ));
            if !c.note.is_empty() {
                out.push_str(&format!("  [{}]", c.note));
            }
            out.push('\n');
        }
        let failed = self.failures().count();
        out.push_str(&format!("{} checks, {} failed\n", self.checks.len(), failed));
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,status,metric,measured,reference,discrepancy,tolerance,note\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},\"{}\"\n",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.metric.label(),
                sig6(c.measured),
                sig6(c.reference),
                sig6(c.discrepancy),
                sig6(c.tolerance),
                c.note.replace('"', "\"\""),
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&JsonReport::from(self)).expect("report serializes")
    }
}

// JSON has no NaN or infinity; those values are emitted as strings.
#[derive(Serialize)]
struct JsonReport<'a> {
    seed: u64,
    mc_samples: usize,
    passed: bool,
    checks: Vec<JsonCheck<'a>>,
}

#[derive(Serialize)]
struct JsonCheck<'a> {
    name: &'a str,
    passed: bool,
    metric: Metric,
    measured: serde_json::Value,
    reference: serde_json::Value,
    discrepancy: serde_json::Value,
    tolerance: serde_json::Value,
    note: &'a str,
}

pub fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or_else(|| serde_json::Value::String(sig6(v)))
}

impl<'a> From<&'a Report> for JsonReport<'a> {
    fn from(r: &'a Report) -> Self {
        Self {
            seed: r.seed,
            mc_samples: r.mc_samples,
            passed: r.passed(),
            checks: r
                .checks
                .iter()
                .map(|c| JsonCheck {
                    name: &c.name,
                    passed: c.passed,
                    metric: c.metric,
                    measured: json_number(c.measured),
                    reference: json_number(c.reference),
                    discrepancy: json_number(c.discrepancy),
                    tolerance: json_number(c.tolerance),
                    note: &c.note,
                })
                .collect(),
        }
    }
}

/// Runs every check with the default Monte Carlo budget.
pub fn run(seed: u64) -> Report {
    run_with(VerifyOptions {
        seed,
        ..VerifyOptions::default()
    })
}

type Group = fn(&VerifyOptions) -> Vec<Check>;

const GROUPS: [Group; 9] = [
    potentials_checks,
    cavity_checks,
    binomial_checks,
    fourier_checks,
    norm_checks,
    reduction_checks,
    geometry_checks,
    interferometer_checks,
    moment_checks,
];

pub fn run_with(options: VerifyOptions) -> Report {
    let mut groups: Vec<Vec<Check>> = GROUPS.par_iter().map(|g| g(&options)).collect();
    groups.push(variance_checks(&options));
    Report {
        seed: options.seed,
        mc_samples: options.mc_samples,
        checks: groups.into_iter().flatten().collect(),
    }
}

fn rng(options: &VerifyOptions, stream: u64) -> ChaCha8Rng {
    stream_rng(options.seed, stream)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..1.0);
    let phi: f64 = rng.random_range(0.0..2.0 * PI);
    let s = (1.0 - z * z).sqrt();
    Vec3::new(s * phi.cos(), s * phi.sin(), z)
}

/// Point-mass branches of total mass `mass` scattered within `spread` of the
/// origin, with random weights.
fn random_state(rng: &mut ChaCha8Rng, branches: usize, mass: f64, spread: f64, equal: bool) -> Result<SuperpositionState> {
    let mut configs = Vec::with_capacity(branches);
    let mut weights = Vec::with_capacity(branches);
    for _ in 0..branches {
        let c = random_direction(rng) * (spread * rng.random_range(0.0..1.0));
        configs.push(MassConfiguration::single(Body::point(mass, c)?));
        weights.push(if equal { 1.0 } else { rng.random_range(0.1..1.0) });
    }
    let total: f64 = weights.iter().sum();
    SuperpositionState::new(
        configs
            .into_iter()
            .zip(weights)
            .map(|(config, w)| crate::potentials::Branch { weight: w / total, config })
            .collect(),
    )
}

fn collect(name: &str, f: impl FnOnce() -> Result<Vec<Check>>) -> Vec<Check> {
    f().unwrap_or_else(|e| vec![Check::failed(name, &e)])
}

fn potentials_checks(o: &VerifyOptions) -> Vec<Check> {
    let mut out = collect("potentials.line_integral_vs_quadrature", || {
        let mut r = rng(o, 1);
        let mut pairs = Vec::new();
        for _ in 0..10 {
            let m = log_uniform(&mut r, 1e-15, 1e3);
            let a = log_uniform(&mut r, 1e-8, 1e-2);
            let len = a * log_uniform(&mut r, 4.0, 1e6);
            let closed = line_integral_phi(&Body::ball(m, a, Vec3::ZERO)?, len)?;
            pairs.push((closed, line_integral_quadrature(m, a, len).value));
        }
        Ok(vec![Check::worst_relative("potentials.line_integral_vs_quadrature", &pairs, 1e-8)])
    });
    out.extend(collect("potentials.box_far_field", || {
        let phi = Body::cube(1.0, 1.0, Vec3::ZERO)?.potential_at(Vec3::new(100.0, 0.0, 0.0))?;
        Ok(vec![Check::relative("potentials.box_far_field", phi, -CODATA_2018.g / 100.0, 1e-4)])
    }));
    out.extend(collect("potentials.delta_phi_direct", || {
        let m = 1e-15;
        let state = SuperpositionState::two_branch(
            MassConfiguration::single(Body::point(m, Vec3::ZERO)?),
            MassConfiguration::single(Body::point(m, Vec3::new(-1e-6, 0.0, 0.0))?),
        );
        let d = delta_phi(&state, 0, 1, Vec3::new(1e-5, 0.0, 0.0))?;
        let direct = CODATA_2018.g * m * (1.0 / 1e-5 - 1.0 / 1.1e-5);
        Ok(vec![Check::relative("potentials.delta_phi_direct", d.abs(), direct, 1e-12)])
    }));
    out
}

fn clock(transmissivity: f64) -> Result<LightClockSpec> {
    LightClockSpec::new(0.03, 1e-15, 1e-6, 2e-6, transmissivity, PulseSpec::gaussian(1e12))
}

fn cavity_checks(_: &VerifyOptions) -> Vec<Check> {
    let mut out = collect("lightclock.train_vs_recursion", || {
        let spec = clock(0.1)?;
        let train = pulse_train_flat(&spec, 200)?;
        let rec = cavity_impulse_recursion(spec.transmissivity, spec.reflectivity(), 200);
        let pairs: Vec<(f64, f64)> = train.orders.iter().zip(&rec).map(|(o, r)| (o.amplitude, *r)).collect();
        Ok(vec![Check::worst_relative("lightclock.train_vs_recursion", &pairs, 1e-12)])
    });
    out.extend(collect("lightclock.response_vs_fixed_point", || {
        let spec = clock(0.3)?;
        let (t, r) = (spec.transmissivity, spec.reflectivity());
        let dt = spec.length / CODATA_2018.c;
        let mut pairs = Vec::new();
        for x in [0.3, 1.1, 2.7, 5.0, 13.0] {
            let omega = x / dt;
            let closed = cavity_response(t, r, omega, dt);
            let iterated = cavity_fixed_point(t, r, omega, dt);
            pairs.push(((closed - iterated).norm(), 0.0));
        }
        Ok(vec![Check::worst_absolute("lightclock.response_vs_fixed_point", &pairs, 1e-12)])
    }));
    out
}

/// (continuum, exact) weight pairs over |k - n| ≤ 2√n.
fn continuum_pairs(n: usize) -> Vec<(f64, f64)> {
    let exact = binomial_by_recurrence(n);
    let reach = (2.0 * (n as f64).sqrt()).floor() as usize;
    (n - reach.min(n)..=n + reach)
        .map(|k| (gaussian_continuum_weight(n, k as f64), exact[k]))
        .collect()
}

/// Largest |gaussian - binomial| over all k.
fn continuum_abs_error(n: usize) -> f64 {
    binomial_by_recurrence(n)
        .iter()
        .enumerate()
        .map(|(k, w)| (gaussian_continuum_weight(n, k as f64) - w).abs())
        .fold(0.0, f64::max)
}

fn binomial_checks(_: &VerifyOptions) -> Vec<Check> {
    let mut pairs = Vec::new();
    for n in [1, 10, 100] {
        for (a, b) in binomial_weights(n).into_iter().zip(binomial_by_recurrence(n)) {
            pairs.push((a, b));
        }
    }
    let mut out = vec![Check::worst_relative("lightclock.binomial_vs_recurrence", &pairs, 1e-12)];
    out.push(Check::worst_relative("lightclock.continuum_weight_n50", &continuum_pairs(50), 0.05));
    let errors: Vec<f64> = [10, 20, 50, 100].iter().map(|&n| continuum_abs_error(n)).collect();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    out.push(
        Check::condition("lightclock.continuum_crossover_monotone", monotone, errors[3], errors[0]).with_note(format!(
            "max absolute error n=10,20,50,100: {}",
            errors.iter().map(|e| sig6(*e)).collect::<Vec<_>>().join(" ")
        )),
    );
    out
}

fn fourier_checks(_: &VerifyOptions) -> Vec<Check> {
    let mut out = Vec::new();
    // Direct binomial superposition against the Fourier synthesis, Δω = 1.
    let (n, x) = (100, 0.1);
    let (times, field) = fourier_superposed_pulse(n, x, 8);
    let order = TrainOrder {
        n,
        amplitude: 1.0,
        delay: 0.0,
        spacing: x,
        split: true,
    };
    let subs = order.sub_pulses();
    let pulse = PulseSpec::gaussian(1.0);
    let reach = 10.0 * ((n as f64).sqrt() * x + 1.0);
    let mut gap: f64 = 0.0;
    for (t, f) in times.iter().zip(&field) {
        if t.abs() <= reach {
            let direct: f64 = subs.iter().map(|p| p.weight * pulse.amplitude(t - p.delay)).sum();
            gap = gap.max((direct - f).abs());
        }
    }
    let p = peak(&field);
    out.push(Check::new("lightclock.fourier_vs_binomial_n100", Metric::Absolute, gap / p, 0.0, gap / p, 1e-9));

    // Peak height against the asymptotic law. The law assumes many sub-pulses
    // per pulse width, n(ΔωΔt)² ≳ 1; points outside are recorded only.
    for (n, x) in [(1000, 0.1), (3000, 0.1), (10_000, 0.1), (10_000, 0.01), (1000, 0.01), (10_000, 0.001)] {
        let (_, field) = fourier_superposed_pulse(n, x, 8);
        let measured = peak(&field);
        let asymptotic = pulse_height_asymptotic(1.0, x, 1.0, 2.0 * n as f64);
        let name = format!("lightclock.asymptotic_height_n{n}_x{x}");
        let regime = n as f64 * x * x;
        let c = if regime >= 1.0 {
            Check::factor(&name, measured, asymptotic, 2.0)
        } else {
            Check::recorded(&name, measured, asymptotic)
        };
        out.push(c.with_note(format!("n(dw*dt)^2={}", sig6(regime))));
    }
    out
}

fn norm_checks(o: &VerifyOptions) -> Vec<Check> {
    let m_p = 1e-16;
    let x_p = Vec3::new(1e-5, 0.0, 0.0);
    let mut out = collect("instability.norm_two_branch_cosine", || {
        let mut r = rng(o, 2);
        let mut pairs = Vec::new();
        for _ in 0..5 {
            let state = random_state(&mut r, 2, 1e-15, 2e-6, true)?;
            let tau = tau_two_branch(m_p, &state, x_p)?.tau.as_f64();
            let phi = state.potentials_at(x_p)?;
            for u in [0.1, 0.5, 0.9, 1.0] {
                let t = u * tau;
                let expected = (m_p * (phi[0] - phi[1]) * t / (2.0 * CODATA_2018.hbar)).cos().abs();
                pairs.push((norm_decay(&state, m_p, x_p, t)?, expected));
            }
        }
        Ok(vec![Check::worst_absolute("instability.norm_two_branch_cosine", &pairs, 1e-12)])
    });
    out.extend(collect("instability.norm_vs_double_sum", || {
        let mut r = rng(o, 3);
        let mut pairs = Vec::new();
        for _ in 0..10 {
            let state = random_state(&mut r, 4, 1e-15, 2e-6, false)?;
            let tau = tau_multibranch(&state, m_p, x_p)?.tau.as_f64();
            let t = tau * r.random_range(0.05..1.5);
            let phi = state.potentials_at(x_p)?;
            pairs.push((norm_decay(&state, m_p, x_p, t)?, norm_double_sum(&state.weights(), &phi, m_p, t)));
        }
        Ok(vec![Check::worst_absolute("instability.norm_vs_double_sum", &pairs, 1e-12)])
    }));
    out.extend(collect("instability.curvature_vs_multibranch", || {
        let mut r = rng(o, 4);
        let mut pairs = Vec::new();
        for _ in 0..20 {
            let branches = r.random_range(2..=6);
            let state = random_state(&mut r, branches, 1e-15, 2e-6, false)?;
            pairs.push(tau_curvature_check(&state, m_p, x_p)?);
        }
        Ok(vec![Check::worst_relative("instability.curvature_vs_multibranch", &pairs, 1e-4)])
    }));
    out
}

fn reduction_checks(o: &VerifyOptions) -> Vec<Check> {
    let mut out = collect("instability.multibranch_reduces_to_two_branch", || {
        let mut r = rng(o, 5);
        let mut pairs = Vec::new();
        for _ in 0..100 {
            let mass = log_uniform(&mut r, 1e-20, 1e3);
            let state = random_state(&mut r, 2, mass, 1.0, true)?;
            let m_p = log_uniform(&mut r, 1e-27, 1.0);
            let x_p = random_direction(&mut r) * log_uniform(&mut r, 2.0, 100.0);
            pairs.push((
                tau_multibranch(&state, m_p, x_p)?.tau.as_f64(),
                tau_two_branch(m_p, &state, x_p)?.tau.as_f64(),
            ));
        }
        Ok(vec![Check::worst_relative("instability.multibranch_reduces_to_two_branch", &pairs, 1e-6)])
    });
    out.extend(collect("instability.density_multibranch_reduces_to_density", || {
        let mut r = rng(o, 6);
        let mut pairs = Vec::new();
        for _ in 0..5 {
            let state = random_state(&mut r, 2, 1e-15, 1e-6, true)?;
            let probe = ProbeDensity::ball(2e3, log_uniform(&mut r, 1e-7, 5e-6), random_direction(&mut r) * 2e-5);
            pairs.push((
                tau_density_multibranch(&probe, &state, Integrator::default())?.tau.as_f64(),
                tau_density(&probe, &state, Integrator::default())?.tau.as_f64(),
            ));
        }
        Ok(vec![Check::worst_relative("instability.density_multibranch_reduces_to_density", &pairs, 1e-6)])
    }));
    out.extend(collect("instability.small_ball_probe_limit", || {
        let mut r = rng(o, 7);
        let mut pairs = Vec::new();
        for _ in 0..5 {
            let state = random_state(&mut r, 2, 1e-15, 1e-6, true)?;
            let x_p = random_direction(&mut r) * 1e-5;
            let radius = 1e-3 * x_p.norm();
            let m_p = 1e-16;
            let density = m_p / (4.0 / 3.0 * PI * radius.powi(3));
            let probe = ProbeDensity::ball(density, radius, x_p);
            pairs.push((
                tau_density(&probe, &state, Integrator::default())?.tau.as_f64(),
                tau_two_branch(m_p, &state, x_p)?.tau.as_f64(),
            ));
        }
        Ok(vec![Check::worst_relative("instability.small_ball_probe_limit", &pairs, 1e-3)])
    }));
    out.extend(collect("instability.min_pointset_vs_enumeration", || {
        let mut r = rng(o, 8);
        let mut pairs = Vec::new();
        for _ in 0..20 {
            let state = random_state(&mut r, 2, 1e-15, 1e-6, true)?;
            // Heavier particle farther away.
            let near = random_direction(&mut r) * log_uniform(&mut r, 5e-6, 2e-5);
            let far = random_direction(&mut r) * log_uniform(&mut r, 2e-5, 1e-4);
            let particles = [(1e-16, near), (1e-16 * log_uniform(&mut r, 1.0, 100.0), far)];
            pairs.push((
                tau_min_pointset(&particles, &state)?.tau.as_f64(),
                min_tau_enumeration(&particles, &state)?,
            ));
        }
        Ok(vec![Check::worst_relative("instability.min_pointset_vs_enumeration", &pairs, 1e-12)])
    }));
    out
}

fn geometry_checks(o: &VerifyOptions) -> Vec<Check> {
    let (mass, m_p, edge) = (1e-15, 1e-16, 1e-6);
    let mut out = collect("instability.cube_scaling_distance", || {
        let state = cube_delocalization(mass, edge, 3)?;
        let distances: Vec<f64> = (0..10).map(|i| edge * 10f64.powf(1.0 + i as f64 / 9.0)).collect();
        let taus = distances
            .iter()
            .map(|&a| Ok(tau_multibranch(&state, m_p, Vec3::new(a, 0.0, 0.0))?.tau.as_f64()))
            .collect::<Result<Vec<f64>>>()?;
        let slope = log_log_slope(&distances, &taus);
        Ok(vec![Check::absolute("instability.cube_scaling_distance", slope, 2.0, 0.1)])
    });
    out.extend(collect("instability.cube_scaling_edge", || {
        let a = 20.0 * edge;
        let edges: Vec<f64> = (0..10).map(|i| a / 10f64.powf(1.0 + i as f64 / 9.0)).collect();
        let taus = edges
            .iter()
            .map(|&l| {
                let state = cube_delocalization(mass, l, 3)?;
                Ok(tau_multibranch(&state, m_p, Vec3::new(a, 0.0, 0.0))?.tau.as_f64())
            })
            .collect::<Result<Vec<f64>>>()?;
        let slope = log_log_slope(&edges, &taus);
        Ok(vec![Check::absolute("instability.cube_scaling_edge", slope, -1.0, 0.1)])
    }));
    out.extend(collect("instability.moving_probe_ramp", || {
        let mut r = rng(o, 9);
        let mut pairs = Vec::new();
        for _ in 0..5 {
            let m_p = log_uniform(&mut r, 1e-20, 1e-10);
            let beta = log_uniform(&mut r, 1e-30, 1e-10);
            let expected = (2.0 * PI * CODATA_2018.hbar / (m_p * beta)).sqrt();
            let t_max = expected * log_uniform(&mut r, 2.0, 100.0);
            match tau_moving_probe(m_p, |t| beta * t, t_max)? {
                MovingProbe::Solved { tau } => pairs.push((tau, expected)),
                MovingProbe::NotReached { .. } => pairs.push((f64::NAN, expected)),
            }
        }
        Ok(vec![Check::worst_relative("instability.moving_probe_ramp", &pairs, 1e-8)])
    }));
    out.extend(collect("instability.entangled_symmetric_ratio", || {
        let (m_p, delta) = (1e-16, 3e-22);
        let e = tau_entangled(m_p, 0.0, delta, 0.0, delta).tau.as_f64();
        let p = tau_product(m_p, 0.0, delta, 0.0, delta).tau.as_f64();
        let anti_e = tau_entangled(m_p, 0.0, delta, 0.0, -delta).tau;
        let anti_p = tau_product(m_p, 0.0, delta, 0.0, -delta).tau;
        let anti = anti_e.is_infinite() && !anti_p.is_infinite();
        Ok(vec![
            Check::relative("instability.entangled_symmetric_ratio", p / e, 2f64.sqrt(), 1e-12),
            Check::relative(
                "instability.entangled_symmetric_value",
                e,
                PI * CODATA_2018.hbar / (2.0 * m_p * delta),
                1e-12,
            ),
            Check::condition("instability.entangled_antialigned_infinite", anti, anti_p.as_f64(), f64::INFINITY),
        ])
    }));
    out.extend(collect("instability.self_ball_closed_form", || {
        let mut r = rng(o, 10);
        let mut pairs = Vec::new();
        for _ in 0..5 {
            let m = log_uniform(&mut r, 1e-18, 1e-6);
            let radius = log_uniform(&mut r, 1e-8, 1e-4);
            let d = radius * r.random_range(2.1..50.0);
            let state = SuperpositionState::two_branch(
                MassConfiguration::single(Body::ball(m, radius, Vec3::ZERO)?),
                MassConfiguration::single(Body::ball(m, radius, Vec3::new(d, 0.0, 0.0))?),
            );
            let dphi = CODATA_2018.g * m * (1.5 / radius - 1.0 / d).abs();
            pairs.push((tau_self(&state)?.tau.as_f64(), PI * CODATA_2018.hbar / (m * dphi)));
        }
        Ok(vec![Check::worst_relative("instability.self_ball_closed_form", &pairs, 1e-10)])
    }));
    out.extend(collect("instability.monte_carlo_vs_adaptive", || {
        let mut r = rng(o, 11);
        let mut pairs = Vec::new();
        for i in 0..5 {
            let state = random_state(&mut r, 3, 1e-15, 1e-6, false)?;
            let probe = ProbeDensity::ball(2e3, 3e-6, random_direction(&mut r) * 2e-5);
            let mc = Integrator::MonteCarlo(McSettings::new(400_000, o.seed ^ i).with_strata(1, 400));
            pairs.push((
                tau_density_multibranch(&probe, &state, mc)?.tau.as_f64(),
                tau_density_multibranch(&probe, &state, Integrator::default())?.tau.as_f64(),
            ));
        }
        Ok(vec![Check::worst_relative("instability.monte_carlo_vs_adaptive", &pairs, 1e-2)])
    }));
    out
}

fn interferometer_checks(o: &VerifyOptions) -> Vec<Check> {
    let (b_ph, b_a) = (2.0 * PI * 1e7, 2.0 * PI * 300.0);
    let mut out = vec![
        Check::absolute("interferometer.visibility_unit_gain", visibility(b_ph, b_a, 1.0), 1.0, 0.0),
        Check::relative(
            "interferometer.visibility_gain_1e4",
            visibility(b_ph, b_a, 1e4),
            (1e7 + 300.0 * 9999.0) / (1e7 + 900.0 * 9999.0),
            1e-12,
        ),
    ];
    out.extend(collect("interferometer.signal_photon_count", || {
        let (gain, dphi) = (5.0, 1.0);
        let spec = InterferometerSpec {
            amplifier: AmplifierSpec::new(gain, 0.0, 2.0 * b_ph)?,
            hybrids: [HybridSpec::default(); 2],
            photon_bandwidth: b_ph,
            phase_difference: dphi,
            coax: CoaxSpec::default(),
        };
        let floor = spec.amplifier.bandwidth / (2.0 * PI) * (gain - 1.0);
        // f₁ over whole periods of B_ph t, plus the 1/(πB t²) tail beyond.
        let periods = 10_000;
        let end = 2.0 * PI * periods as f64 / b_ph;
        let points: Vec<f64> = (0..=periods).map(|k| 2.0 * PI * k as f64 / b_ph).collect();
        let mut err = None;
        let r = integrate_breaks(
            |t| match output_flux_f6(&spec, |t| raised_cosine_flux(b_ph, t), t) {
                Ok(v) => v - floor,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            },
            &points,
            Tolerance::relative(1e-12).with_max_evals(5_000_000),
        );
        if let Some(e) = err {
            return Err(e);
        }
        let signal = 0.5 * gain * (1.0 - dphi.cos());
        let total = 2.0 * (r.value + signal / (PI * b_ph * end));
        Ok(vec![Check::relative("interferometer.signal_photon_count", total, signal, 1e-6)])
    }));
    out.extend(collect("interferometer.squeezer_opposite_phase_identity", || {
        let mut r = rng(o, 12);
        let mut pairs = Vec::new();
        for _ in 0..20 {
            let gain = log_uniform(&mut r, 1.0, 1e4);
            let theta = r.random_range(0.0..2.0 * PI);
            let first = AmplifierSpec::with_gain(gain, theta)?;
            let second = AmplifierSpec::with_gain(gain, theta + PI)?;
            let a = Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
            let b = Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
            let (a2, b2) = squeezer_io(squeezer_io((a, b), &first, 0.0), &second, 0.0);
            pairs.push((((a2 - a).norm() + (b2 - b).norm()) / (a.norm() + b.norm()), 0.0));
        }
        Ok(vec![Check::worst_absolute("interferometer.squeezer_opposite_phase_identity", &pairs, 1e-9)])
    }));
    out.extend(collect("interferometer.hybrid_power_conservation", || {
        let h = HybridSpec::default();
        h.validate()?;
        let pairs: Vec<(f64, f64)> = (0..16)
            .map(|k| {
                let (p6, p7) = mz_output_intensities(&h, &h, k as f64 * PI / 8.0);
                (p6 + p7, 1.0)
            })
            .collect();
        Ok(vec![Check::worst_absolute("interferometer.hybrid_power_conservation", &pairs, 1e-12)])
    }));
    out.extend(collect("interferometer.critical_gain_round_trip", || {
        let coax = CoaxSpec::default();
        let db = critical_gain(1e-6, &coax)?;
        let tau = tau_vs_gain(10f64.powf(db / 10.0), &coax)?.tau.as_f64();
        Ok(vec![Check::relative("interferometer.critical_gain_round_trip", tau, 1e-6, 1e-9)])
    }));
    out.extend(collect("interferometer.overlap_normalization", || {
        let mut checks = Vec::new();
        for gain in [1.0, 2.0] {
            let r = overlap_norm_quadrature(&AmplifierSpec::with_gain(gain, 0.3)?, 1e-6);
            checks.push(Check::relative(
                &format!("interferometer.overlap_normalization_g{gain}"),
                r.value,
                1.0,
                1e-4,
            ));
        }
        Ok(checks)
    }));
    out
}

fn moment_checks(_: &VerifyOptions) -> Vec<Check> {
    let mut out = Vec::new();
    for gain in [1.0, 2.0, 10.0, 1e4] {
        out.extend(collect(&format!("interferometer.moments_g{gain}"), || {
            let amp = AmplifierSpec::with_gain(gain, 0.7)?;
            let i0 = gaussian_moment(0, &amp)?;
            let i2 = gaussian_moment(2, &amp)?;
            let i4 = gaussian_moment(4, &amp)?;
            let mut checks = vec![
                Check::relative(&format!("interferometer.moment0_g{gain}"), i0, gain.sqrt(), 1e-6),
                Check::relative(&format!("interferometer.moment2_g{gain}"), i2, gain.powf(1.5), 1e-6),
                Check::relative(
                    &format!("interferometer.moment4_exact_g{gain}"),
                    i4,
                    gaussian_moment_exact(4, gain),
                    1e-6,
                ),
            ];
            let large = gaussian_moment4_large_gain(gain);
            let name = format!("interferometer.moment4_vs_3g52_g{gain}");
            checks.push(if gain >= 1e4 {
                Check::relative(&name, i4, large, 1e-3)
            } else {
                Check::recorded(&name, i4, large)
            });
            Ok(checks)
        }));
    }
    out
}

fn variance_checks(o: &VerifyOptions) -> Vec<Check> {
    collect("interferometer.variance_monte_carlo", || {
        let gain = 100.0;
        let report = variance_phi(
            &AmplifierSpec::with_gain(gain, 0.0)?,
            &CoaxSpec::default(),
            Some(variance_mc_settings(o.mc_samples, o.seed)),
        )?;
        let mc = report.monte_carlo.unwrap_or(f64::NAN);
        let se = report.monte_carlo_std_error.unwrap_or(f64::NAN);
        Ok(vec![
            Check::relative("interferometer.variance_mc_vs_16g", mc, report.closed_form, 0.05),
            Check::sigma("interferometer.variance_mc_vs_exact_moments", mc, report.exact_moments, se, 4.0)
                .with_note(format!("std_error={}", sig6(se))),
        ])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_picks_largest_gap() {
        let c = Check::worst_relative("x", &[(1.0, 1.0), (1.1, 1.0), (0.95, 1.0)], 0.2);
        assert!((c.discrepancy - 0.1).abs() < 1e-12);
        assert!(c.passed);
        let c = Check::worst_relative("x", &[(f64::NAN, 1.0), (1.0, 1.0)], 0.2);
        assert!(!c.passed);
    }

    #[test]
    fn recorded_never_fails() {
        assert!(Check::recorded("x", 1.0, 100.0).passed);
        assert!(!Check::factor("x", 1.0, 3.0, 2.0).passed);
        assert!(Check::factor("x", 3.0, 2.0, 2.0).passed);
    }

    #[test]
    fn report_renders_every_format() {
        let report = Report {
            seed: 7,
            mc_samples: 10,
            checks: vec![Check::relative("a", 1.0, 1.0, 1e-6), Check::recorded("b", f64::INFINITY, 2.0)],
        };
        assert!(report.passed());
        assert!(report.to_text().contains("PASS a"));
        assert_eq!(report.to_csv().lines().count(), 3);
        let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(v["checks"][1]["measured"], "inf");
    }
}
