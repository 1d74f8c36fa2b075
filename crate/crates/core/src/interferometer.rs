//! Gain-tunable microwave Mach–Zehnder interferometer: hybrid and
//! parametric-amplifier input–output relations, output flux and visibility,
//! the coherent-state description of the amplified single photon, and the
//! resulting instability time as a function of gain.
//!
//! Amplitudes are complex analytic signals; physical voltages are their real
//! parts.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{PhysicalConstants, CODATA_2018};
use crate::error::{Error, Result};
use crate::instability::{Formula, InstabilityResult, Timescale};
use crate::lightclock::raised_cosine;
use crate::numerics::montecarlo::{stratified, McEstimate, McSettings};
use crate::numerics::quadrature::integrate_real_line;
use crate::numerics::Tolerance;

/// Largest relative Monte Carlo error accepted for the variance integral.
pub const ACCEPTED_MC_ERROR: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplifierSpec {
    /// Power gain 𝒢 = cosh²|s| ≥ 1.
    pub gain: f64,
    /// Squeeze phase ϑ, rad.
    #[serde(default)]
    pub theta: f64,
    /// Amplifier bandwidth B_a, rad/s.
    pub bandwidth: f64,
    /// Pump frequency ω_p, rad/s.
    #[serde(default)]
    pub pump_frequency: f64,
}

impl AmplifierSpec {
    pub fn new(gain: f64, theta: f64, bandwidth: f64) -> Result<Self> {
        let amp = Self {
            gain,
            theta,
            bandwidth,
            pump_frequency: 0.0,
        };
        amp.validate()?;
        Ok(amp)
    }

    /// Unit-bandwidth amplifier with the given gain and phase, for the
    /// quantities that only depend on 𝒢 and ϑ.
    pub fn with_gain(gain: f64, theta: f64) -> Result<Self> {
        Self::new(gain, theta, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_gain(self.gain)?;
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!("amplifier bandwidth must be > 0, got {}", self.bandwidth)));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidInput("squeeze phase must be finite".into()));
        }
        Ok(())
    }

    /// Squeeze magnitude |s| with cosh²|s| = 𝒢.
    pub fn squeeze(&self) -> f64 {
        self.gain.sqrt().acosh()
    }

    /// (cosh|s|, sinh|s|) = (sqrt 𝒢, sqrt(𝒢 - 1)).
    pub fn cosh_sinh(&self) -> (f64, f64) {
        (self.gain.sqrt(), (self.gain - 1.0).max(0.0).sqrt())
    }

    /// Squeezing factor sqrt((𝒢 - 1)/𝒢) appearing in the coherent-state overlap.
    pub fn squeezing_factor(&self) -> f64 {
        ((self.gain - 1.0) / self.gain).max(0.0).sqrt()
    }
}

fn check_gain(gain: f64) -> Result<()> {
    if gain >= 1.0 && gain.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("gain must be >= 1, got {gain}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridSpec {
    pub transmission: Complex64,
    pub reflection: Complex64,
}

impl Default for HybridSpec {
    /// Standard quadrature hybrid 𝒯 = -1/√2, ℛ = -i/√2.
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            transmission: Complex64::new(-h, 0.0),
            reflection: Complex64::new(0.0, -h),
        }
    }
}

impl HybridSpec {
    pub fn validate(&self) -> Result<()> {
        let power = self.transmission.norm_sqr() + self.reflection.norm_sqr();
        let cross = (self.transmission * self.reflection.conj() + self.reflection * self.transmission.conj()).norm();
        if (power - 1.0).abs() > 1e-12 || cross > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "hybrid is not unitary: |T|² + |R|² = {power}, |TR* + RT*| = {cross:e}"
            )));
        }
        Ok(())
    }

    /// Scattering matrix [[𝒯, ℛ], [ℛ, 𝒯]] acting on the two input ports.
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        [[self.transmission, self.reflection], [self.reflection, self.transmission]]
    }

    pub fn apply(&self, a: [Complex64; 2]) -> [Complex64; 2] {
        let m = self.matrix();
        [m[0][0] * a[0] + m[0][1] * a[1], m[1][0] * a[0] + m[1][1] * a[1]]
    }
}

/// Intensities at the two output ports of two cascaded hybrids for a unit
/// input at port 1 and arm phases (0, Δφ), without amplification.
pub fn mz_output_intensities(first: &HybridSpec, second: &HybridSpec, delta_phi: f64) -> (f64, f64) {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let [upper, lower] = first.apply([one, zero]);
    let arms = [upper, lower * Complex64::from_polar(1.0, delta_phi)];
    let [out6, out7] = second.apply(arms);
    (out6.norm_sqr(), out7.norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoaxSpec {
    /// Cable radius r, m.
    pub radius: f64,
    /// Cable length ℓ, m.
    pub length: f64,
    pub eps_r: f64,
    /// Dielectric density ρ_d, kg/m³.
    pub dielectric_density: f64,
    /// Signal angular frequency ω_s, rad/s.
    pub signal_frequency: f64,
}

impl Default for CoaxSpec {
    fn default() -> Self {
        Self {
            radius: 1e-3,
            length: 3.0,
            eps_r: 20.0,
            dielectric_density: 1e4,
            signal_frequency: 2.0 * PI * 1e9,
        }
    }
}

impl CoaxSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("radius", self.radius),
            ("length", self.length),
            ("eps_r", self.eps_r),
            ("dielectric_density", self.dielectric_density),
            ("signal_frequency", self.signal_frequency),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("coax {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Dielectric mass ρ_d π r² ℓ, kg.
    pub fn mass(&self) -> f64 {
        self.dielectric_density * PI * self.radius * self.radius * self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerSpec {
    /// Shared by both arms.
    pub amplifier: AmplifierSpec,
    #[serde(default = "default_hybrids")]
    pub hybrids: [HybridSpec; 2],
    /// Photon bandwidth B_ph, rad/s.
    pub photon_bandwidth: f64,
    /// Arm phase difference Δφ, rad.
    #[serde(default)]
    pub phase_difference: f64,
    #[serde(default)]
    pub coax: CoaxSpec,
}

fn default_hybrids() -> [HybridSpec; 2] {
    [HybridSpec::default(); 2]
}

impl InterferometerSpec {
    pub fn validate(&self) -> Result<()> {
        self.amplifier.validate()?;
        for h in &self.hybrids {
            h.validate()?;
        }
        if !(self.photon_bandwidth > 0.0 && self.photon_bandwidth.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "photon bandwidth must be > 0, got {}",
                self.photon_bandwidth
            )));
        }
        self.coax.validate()
    }
}

/// (B_ph + B_a(𝒢-1)) / (B_ph + 3B_a(𝒢-1)).
pub fn visibility(photon_bandwidth: f64, amp_bandwidth: f64, gain: f64) -> f64 {
    let noise = amp_bandwidth * (gain - 1.0);
    (photon_bandwidth + noise) / (photon_bandwidth + 3.0 * noise)
}

/// Unit-photon raised-cosine flux (1 - cos Bt)/(πBt²).
pub fn raised_cosine_flux(bandwidth: f64, t: f64) -> f64 {
    raised_cosine(bandwidth, t)
}

/// Photon flux at output 6, ½𝒢(1 - cos Δφ)f₁(t) + (B_a/2π)(𝒢 - 1). Only valid
/// when the amplifier is broader than the photon; otherwise use [`visibility`].
pub fn output_flux_f6<F: Fn(f64) -> f64>(spec: &InterferometerSpec, f1: F, t: f64) -> Result<f64> {
    spec.validate()?;
    let amp = &spec.amplifier;
    if amp.bandwidth < spec.photon_bandwidth {
        return Err(Error::Regime(format!(
            "amplifier bandwidth {} rad/s is below the photon bandwidth {} rad/s; the flux formula needs \
             B_a >= B_ph, use the visibility for the narrow-amplifier case",
            amp.bandwidth, spec.photon_bandwidth
        )));
    }
    let g = amp.gain;
    Ok(0.5 * g * (1.0 - spec.phase_difference.cos()) * f1(t) + amp.bandwidth / (2.0 * PI) * (g - 1.0))
}

/// Parametric amplifier acting on a (signal, idler) amplitude pair:
/// out = e^{iφ}(cosh|s|·a - e^{iϑ} sinh|s|·b*), and symmetrically for the idler.
pub fn squeezer_io(input: (Complex64, Complex64), amp: &AmplifierSpec, arm_phase: f64) -> (Complex64, Complex64) {
    let (c, s) = amp.cosh_sinh();
    let phase = Complex64::from_polar(1.0, arm_phase);
    let pump = Complex64::from_polar(1.0, amp.theta);
    let (a, b) = input;
    (
        phase * (c * a - pump * s * b.conj()),
        phase * (c * b - pump * s * a.conj()),
    )
}

/// Conversion factor 4πGε₀ε_r m_e/|q_e| from volts to J/kg.
pub fn potential_per_volt(eps_r: f64, k: &PhysicalConstants) -> f64 {
    4.0 * PI * k.g * k.eps0 * eps_r * k.m_e / k.q_e
}

/// Gravitational potential Φ_e = 4πGε₀ε_r(m_e/|q_e|)V.
pub fn phi_from_voltage(voltage: f64, eps_r: f64) -> f64 {
    potential_per_volt(eps_r, &CODATA_2018) * voltage
}

/// Single-quantum voltage sqrt(ħω/(2ε₀ε_r)).
pub fn voltage_per_quantum(omega: f64, eps_r: f64, k: &PhysicalConstants) -> f64 {
    (k.hbar * omega / (2.0 * k.eps0 * eps_r)).sqrt()
}

/// Voltage of a coherent state, sqrt(ħω/(2ε₀ε_r))·α·e^{-i(ωt - kx)}, k = ω√ε_r/c.
pub fn coherent_voltage(alpha: Complex64, omega: f64, eps_r: f64, x: f64, t: f64) -> Complex64 {
    let k = omega * eps_r.sqrt() / CODATA_2018.c;
    voltage_per_quantum(omega, eps_r, &CODATA_2018) * alpha * Complex64::from_polar(1.0, -(omega * t - k * x))
}

/// Overlap ⟨0|D†_L D†_R|ψ⟩ of the amplified single-photon state with the
/// coherent state α_L ⊗ α_R, in the displayed form
/// (1/𝒢)(α_L* + α_R*) exp(-½(|α_L|² + |α_R|²) - ½(α_L*² + α_R*²) e^{iϑ} sqrt((𝒢-1)/𝒢)).
///
/// This form lacks the 1/√2 of the state, so |overlap|² integrates to 2
/// over d²α_L d²α_R/π²; see [`overlap_amplitude_normalized`].
pub fn overlap_amplitude(alpha_l: Complex64, alpha_r: Complex64, amp: &AmplifierSpec) -> Complex64 {
    let (l, r) = (alpha_l.conj(), alpha_r.conj());
    let pump = Complex64::from_polar(1.0, amp.theta);
    let exponent = -0.5 * (alpha_l.norm_sqr() + alpha_r.norm_sqr()) - 0.5 * (l * l + r * r) * pump * amp.squeezing_factor();
    (l + r) * exponent.exp() / amp.gain
}

/// [`overlap_amplitude`] divided by √2, normalized to unit total weight.
pub fn overlap_amplitude_normalized(alpha_l: Complex64, alpha_r: Complex64, amp: &AmplifierSpec) -> Complex64 {
    overlap_amplitude(alpha_l, alpha_r, amp) * std::f64::consts::FRAC_1_SQRT_2
}

/// Real exponent -|α|² - ½(α² e^{-iϑ} + α*² e^{iϑ}) sqrt((𝒢-1)/𝒢) at α = x + iy.
fn moment_exponent(x: f64, y: f64, s: f64, theta: f64) -> f64 {
    let (sin, cos) = theta.sin_cos();
    -(x * x + y * y) - s * ((x * x - y * y) * cos + 2.0 * x * y * sin)
}

/// I_p = (1/π)∫d²α |α|^p exp(-|α|² - ½(α²e^{-iϑ} + α*²e^{iϑ}) sqrt((𝒢-1)/𝒢)),
/// by nested adaptive quadrature over the real and imaginary parts.
pub fn gaussian_moment(power: u32, amp: &AmplifierSpec) -> Result<f64> {
    if ![0, 2, 4].contains(&power) {
        return Err(Error::InvalidInput(format!("moment power must be 0, 2 or 4, got {power}")));
    }
    check_gain(amp.gain)?;
    let s = amp.squeezing_factor();
    let theta = amp.theta;
    let (sin, cos) = theta.sin_cos();
    // Exponent is -(a x² + 2b xy + c y²).
    let (a, b, c) = (1.0 + s * cos, s * sin, 1.0 - s * cos);
    let inner_tol = Tolerance::relative(1e-11).with_max_evals(200_000);
    let outer_tol = Tolerance::relative(1e-10).with_max_evals(200_000);
    let half_p = power as i32 / 2;
    let mut worst: f64 = 0.0;
    let mut peak: f64 = f64::MIN_POSITIVE;
    let mut converged = true;
    let (inner_axis_c, outer_axis_a) = if c >= a { (c, a) } else { (a, c) };
    let swap = c < a;
    let det = a * c - b * b;
    let outer = integrate_real_line(
        |u| {
            // Integrate over the stiffer coordinate v at fixed u, centred on
            // the exponent's maximum along v.
            let centre = -b * u / inner_axis_c;
            let width = 1.0 / inner_axis_c.sqrt();
            let r = integrate_real_line(
                |w| {
                    let v = centre + w;
                    let (x, y) = if swap { (v, u) } else { (u, v) };
                    (x * x + y * y).powi(half_p) * moment_exponent(x, y, s, theta).exp()
                },
                width,
                inner_tol,
            );
            // Tail slices are judged against the largest slice seen so far.
            peak = peak.max(r.value.abs());
            let rel = r.error / peak;
            worst = worst.max(rel);
            converged &= r.converged || rel < 1e-10;
            r.value
        },
        (inner_axis_c / det).sqrt().max(1.0 / outer_axis_a.sqrt()),
        outer_tol,
    );
    let value = outer.value / PI;
    let rel = outer.relative_error().max(worst);
    if !(outer.converged && converged) || !(rel < 1e-8) {
        return Err(Error::NonConvergence {
            estimate: rel,
            limit: 1e-8,
            evaluations: outer.evaluations,
        });
    }
    Ok(value)
}

/// Closed forms of the moments: I₀ = 𝒢^{1/2}, I₂ = 𝒢^{3/2},
/// I₄ = (2 + (𝒢-1)/𝒢)𝒢^{5/2}.
pub fn gaussian_moment_exact(power: u32, gain: f64) -> f64 {
    let s2 = (gain - 1.0) / gain;
    match power {
        0 => gain.sqrt(),
        2 => gain.powf(1.5),
        4 => (2.0 + s2) * gain.powf(2.5),
        _ => f64::NAN,
    }
}

/// The large-gain value 3𝒢^{5/2} for I₄.
pub fn gaussian_moment4_large_gain(gain: f64) -> f64 {
    3.0 * gain.powf(2.5)
}

/// (4πGε₀ε_r m_e/|q_e|)² ħω_s/(2ε₀ε_r), in (J/kg)².
pub fn variance_prefactor(coax: &CoaxSpec, k: &PhysicalConstants) -> f64 {
    let per_volt = potential_per_volt(coax.eps_r, k);
    let v = voltage_per_quantum(coax.signal_frequency, coax.eps_r, k);
    (per_volt * v).powi(2)
}

/// Branch spread Σ|c_n|²|c_m|²(Φ_n - Φ_m)² in the large-gain form 16𝒢·prefactor.
pub fn variance_closed_form(gain: f64, coax: &CoaxSpec) -> f64 {
    variance_closed_form_with(gain, coax, &CODATA_2018)
}

pub fn variance_closed_form_with(gain: f64, coax: &CoaxSpec, k: &PhysicalConstants) -> f64 {
    16.0 * gain * variance_prefactor(coax, k)
}

/// The same integral with the exact fourth moment: (16𝒢 - 4)·prefactor.
pub fn variance_exact_moments(gain: f64, coax: &CoaxSpec) -> f64 {
    variance_exact_moments_with(gain, coax, &CODATA_2018)
}

pub fn variance_exact_moments_with(gain: f64, coax: &CoaxSpec, k: &PhysicalConstants) -> f64 {
    let i0 = gaussian_moment_exact(0, gain);
    let i2 = gaussian_moment_exact(2, gain);
    let i4 = gaussian_moment_exact(4, gain);
    4.0 * (i4 * i0 + i2 * i2) / (gain * gain) * variance_prefactor(coax, k)
}

/// Importance-sampling proposal width relative to the integrand's own Gaussian.
const PROPOSAL_WIDENING: f64 = 1.3;

/// Eight-dimensional Monte Carlo of the dimensionless double coherent-state
/// integral
/// ∫d²α_L d²α_R d²α'_L d²α'_R/π⁴ |overlap(α)|²|overlap(α')|²|α_L - α'_L|².
///
/// Each α is drawn from a Gaussian λ times wider than the integrand's own
/// envelope exp(-|α|² - ...), which keeps the importance weights bounded.
pub fn variance_integral_mc(amp: &AmplifierSpec, settings: McSettings) -> Result<McEstimate> {
    check_gain(amp.gain)?;
    let g = amp.gain;
    let s = amp.squeezing_factor();
    let (sin, cos) = amp.theta.sin_cos();
    let (a, b, c) = (1.0 + s * cos, s * sin, 1.0 - s * cos);
    let det = a * c - b * b;
    let lambda = PROPOSAL_WIDENING;
    // Proposal covariance (λ/2)A⁻¹ and its Cholesky factor.
    let scale = 0.5 * lambda / det;
    let (s11, s12, s22) = (scale * c, -scale * b, scale * a);
    let l11 = s11.sqrt();
    let l21 = s12 / l11;
    let l22 = (s22 - l21 * l21).max(0.0).sqrt();
    // Π_i (w_i / q_i) / π⁴ times the 1/𝒢⁴ of the two squared overlaps.
    let norm = (lambda / det.sqrt()).powi(4) / g.powi(4);
    let excess = 1.0 - 1.0 / lambda;
    let f = |u: &[f64]| {
        let mut alpha = [Complex64::new(0.0, 0.0); 4];
        let mut log_w = 0.0;
        for (i, al) in alpha.iter_mut().enumerate() {
            let r = (-2.0 * u[2 * i].ln()).sqrt();
            let (sn, cs) = (2.0 * PI * u[2 * i + 1]).sin_cos();
            let (z1, z2) = (r * cs, r * sn);
            let x = l11 * z1;
            let y = l21 * z1 + l22 * z2;
            *al = Complex64::new(x, y);
            log_w += moment_exponent(x, y, s, amp.theta);
        }
        let [l, r, lp, rp] = alpha;
        let poly = (l + r).norm_sqr() * (lp + rp).norm_sqr() * (l - lp).norm_sqr();
        norm * poly * (excess * log_w).exp()
    };
    let est = stratified(f, 8, settings);
    if !(est.relative_error() <= ACCEPTED_MC_ERROR) {
        return Err(Error::NonConvergence {
            estimate: est.relative_error(),
            limit: ACCEPTED_MC_ERROR,
            evaluations: est.samples,
        });
    }
    Ok(est)
}

/// Default Monte Carlo settings for the variance integral.
pub fn variance_mc_settings(samples: usize, seed: u64) -> McSettings {
    McSettings::new(samples, seed).with_strata(2, 100)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub gain: f64,
    /// 16𝒢·prefactor, (J/kg)².
    pub closed_form: f64,
    /// (16𝒢 - 4)·prefactor, (J/kg)².
    pub exact_moments: f64,
    /// Monte Carlo of the integral times the prefactor, (J/kg)².
    pub monte_carlo: Option<f64>,
    pub monte_carlo_std_error: Option<f64>,
}

/// Branch spread of the amplified photon's gravitational potential, by the
/// closed forms and optionally by Monte Carlo.
pub fn variance_phi(amp: &AmplifierSpec, coax: &CoaxSpec, mc: Option<McSettings>) -> Result<VarianceReport> {
    check_gain(amp.gain)?;
    coax.validate()?;
    let pref = variance_prefactor(coax, &CODATA_2018);
    let (monte_carlo, monte_carlo_std_error) = match mc {
        Some(settings) => {
            let est = variance_integral_mc(amp, settings)?;
            (Some(est.value * pref), Some(est.std_error * pref))
        }
        None => (None, None),
    };
    Ok(VarianceReport {
        gain: amp.gain,
        closed_form: variance_closed_form(amp.gain, coax),
        exact_moments: variance_exact_moments(amp.gain, coax),
        monte_carlo,
        monte_carlo_std_error,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceModel {
    /// 16𝒢, the large-gain form.
    #[default]
    ClosedForm,
    /// 16𝒢 - 4, from the exact fourth moment.
    ExactMoments,
}

/// τ_p = πħ/(M_coax sqrt(2·variance)) with M_coax = ρ_d π r² ℓ.
pub fn tau_vs_gain(gain: f64, coax: &CoaxSpec) -> Result<InstabilityResult> {
    tau_vs_gain_model(gain, coax, VarianceModel::ClosedForm)
}

pub fn tau_vs_gain_model(gain: f64, coax: &CoaxSpec, model: VarianceModel) -> Result<InstabilityResult> {
    check_gain(gain)?;
    coax.validate()?;
    let variance = match model {
        VarianceModel::ClosedForm => variance_closed_form(gain, coax),
        VarianceModel::ExactMoments => variance_exact_moments(gain, coax),
    };
    let denominator = coax.mass() * (2.0 * variance).sqrt();
    Ok(InstabilityResult {
        tau: Timescale::from_denominator(denominator),
        denominator,
        formula: Formula::Interferometer,
        quadrature_error: 0.0,
    })
}

/// Gain in dB, 10 log₁₀ 𝒢.
pub fn gain_to_db(gain: f64) -> f64 {
    10.0 * gain.log10()
}

pub fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Gain (in dB) at which [`tau_vs_gain`] equals `target_tau`.
pub fn critical_gain(target_tau: f64, coax: &CoaxSpec) -> Result<f64> {
    if !(target_tau > 0.0 && target_tau.is_finite()) {
        return Err(Error::InvalidInput(format!("target time must be > 0, got {target_tau}")));
    }
    let unit = tau_vs_gain(1.0, coax)?.tau.as_f64();
    // τ ∝ 𝒢^{-1/2}.
    Ok(20.0 * (unit / target_tau).log10())
}
