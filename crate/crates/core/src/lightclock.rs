//! Two-mirror light clock with a transparent massive ball between the
//! mirrors: Shapiro-type traversal times, the pulse trains emitted by the
//! cavity with and without a superposition of ball radii, and the time after
//! which the superposed clock visibly dephases.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::CODATA_2018;
use crate::error::{Error, Result};
use crate::potentials::{line_integral_phi, Body};
use crate::vec3::Vec3;

/// Largest round-trip order supported by the exact binomial expansion.
pub const MAX_EXACT_ORDER: usize = 10_000;
/// Upper bound on |𝒯| (the |𝒯| ≪ 1 regime).
pub const MAX_TRANSMISSIVITY: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum PulseShape {
    /// ξ(t) = exp(-Δω² t²).
    Gaussian { bandwidth: f64 },
    /// f(t) = (1 - cos Bt)/(π B t²), equal to B/(2π) at t = 0.
    RaisedCosine { bandwidth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    #[serde(flatten)]
    pub shape: PulseShape,
    #[serde(default)]
    pub center_time: f64,
}

impl PulseSpec {
    pub fn gaussian(bandwidth: f64) -> Self {
        Self {
            shape: PulseShape::Gaussian { bandwidth },
            center_time: 0.0,
        }
    }

    pub fn raised_cosine(bandwidth: f64) -> Self {
        Self {
            shape: PulseShape::RaisedCosine { bandwidth },
            center_time: 0.0,
        }
    }

    pub fn bandwidth(&self) -> f64 {
        match self.shape {
            PulseShape::Gaussian { bandwidth } | PulseShape::RaisedCosine { bandwidth } => bandwidth,
        }
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        let tau = t - self.center_time;
        match self.shape {
            PulseShape::Gaussian { bandwidth } => (-(bandwidth * tau).powi(2)).exp(),
            PulseShape::RaisedCosine { bandwidth } => raised_cosine(bandwidth, tau),
        }
    }
}

/// (1 - cos Bt)/(π B t²) with the removable singularity filled in.
pub fn raised_cosine(bandwidth: f64, t: f64) -> f64 {
    let x = bandwidth * t;
    if x.abs() < 1e-4 {
        // 1 - cos x = x²/2 - x⁴/24 + ...
        bandwidth / (2.0 * std::f64::consts::PI) * (1.0 - x * x / 12.0)
    } else {
        // 1 - cos x = 2 sin²(x/2), no cancellation.
        2.0 * (0.5 * x).sin().powi(2) / (std::f64::consts::PI * bandwidth * t * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightClockSpec {
    /// Mirror spacing L, m.
    pub length: f64,
    /// Ball mass M, kg.
    pub mass: f64,
    /// Smaller ball radius a, m.
    pub radius_a: f64,
    /// Larger ball radius b, m.
    pub radius_b: f64,
    /// Amplitude transmissivity 𝒯 of the bottom mirror (real, reflection phase neglected).
    pub transmissivity: f64,
    pub pulse: PulseSpec,
}

impl LightClockSpec {
    pub fn new(length: f64, mass: f64, radius_a: f64, radius_b: f64, transmissivity: f64, pulse: PulseSpec) -> Result<Self> {
        let spec = Self {
            length,
            mass,
            radius_a,
            radius_b,
            transmissivity,
            pulse,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius_a > 0.0 && self.radius_a <= self.radius_b && self.radius_b < 0.5 * self.length) {
            return Err(Error::Geometry(format!(
                "need 0 < a <= b < L/2, got a = {}, b = {}, L = {}",
                self.radius_a, self.radius_b, self.length
            )));
        }
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidInput(format!("ball mass must be >= 0, got {}", self.mass)));
        }
        if !(self.transmissivity > 0.0 && self.transmissivity <= MAX_TRANSMISSIVITY) {
            return Err(Error::InvalidInput(format!(
                "|T| must lie in (0, {MAX_TRANSMISSIVITY}], got {}",
                self.transmissivity
            )));
        }
        if !(self.pulse.bandwidth() > 0.0) {
            return Err(Error::InvalidInput("pulse bandwidth must be > 0".into()));
        }
        Ok(())
    }

    /// |ℛ| = sqrt(1 - |𝒯|²).
    pub fn reflectivity(&self) -> f64 {
        (1.0 - self.transmissivity * self.transmissivity).sqrt()
    }

    fn ball(&self, radius: f64) -> Result<Body> {
        Body::ball(self.mass, radius, Vec3::ZERO)
    }

    /// (d̄t, Δt) = ((dt(a) + dt(b))/2, (dt(a) - dt(b))/2).
    pub fn mean_and_half_difference(&self) -> Result<(f64, f64)> {
        let ta = traversal_time(self, self.radius_a)?;
        let tb = traversal_time(self, self.radius_b)?;
        Ok((0.5 * (ta + tb), 0.5 * superposition_delay(self)))
    }
}

/// One-way traversal time with the ball of the given radius between the
/// mirrors: `L/c + (2GM/c³)(ln(L/2a) + 4/3)`.
pub fn traversal_time(spec: &LightClockSpec, radius: f64) -> Result<f64> {
    Ok(spec.length / CODATA_2018.c + traversal_excess(spec, radius)?)
}

/// Gravitational part of the traversal time, `-(1/c³)∫Φ dx`. Kept separate
/// because it is usually far below one ulp of L/c.
pub fn traversal_excess(spec: &LightClockSpec, radius: f64) -> Result<f64> {
    let line = line_integral_phi(&spec.ball(radius)?, spec.length)?;
    Ok(-line / CODATA_2018.c.powi(3))
}

/// Maximal arrival-time spread 2Δt = (4GM/c³) ln(b/a).
pub fn superposition_delay(spec: &LightClockSpec) -> f64 {
    let k = CODATA_2018;
    4.0 * k.g * spec.mass / k.c.powi(3) * (spec.radius_b / spec.radius_a).ln()
}

/// Per-traverse field factor Σ_n |c_n|² e^{iω dt(n)} for branches `(weight, dt)`.
pub fn dephasing_factor(omega: f64, branches: &[(f64, f64)]) -> Complex64 {
    branches
        .iter()
        .map(|&(w, dt)| Complex64::from_polar(w, omega * dt))
        .sum()
}

/// Closed cavity response 𝒯 e^{2iωdt} / (1 - ℛ e^{2iωdt}).
pub fn cavity_response(transmissivity: f64, reflectivity: f64, omega: f64, dt: f64) -> Complex64 {
    let z = Complex64::from_polar(1.0, 2.0 * omega * dt);
    transmissivity * z / (1.0 - reflectivity * z)
}

/// Binomial weights C(2n, k)/4ⁿ for k = 0..=2n, accumulated in log space.
pub fn binomial_weights(n: usize) -> Vec<f64> {
    let two_n = 2 * n;
    let ln4n = n as f64 * 4f64.ln();
    let mut log_c = 0.0;
    let mut out = Vec::with_capacity(two_n + 1);
    for k in 0..=two_n {
        out.push((log_c - ln4n).exp());
        if k < two_n {
            log_c += ((two_n - k) as f64).ln() - ((k + 1) as f64).ln();
        }
    }
    out
}

/// Continuum (large-n) replacement e^{-(k-n)²/n}/sqrt(πn) of C(2n, k)/4ⁿ.
pub fn gaussian_continuum_weight(n: usize, k: f64) -> f64 {
    let n = n as f64;
    (-(k - n).powi(2) / n).exp() / (std::f64::consts::PI * n).sqrt()
}

/// Pulses emitted at round-trip order `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOrder {
    pub n: usize,
    /// Cavity amplitude 𝒯ℛ^{n-1}.
    pub amplitude: f64,
    /// Central delay 2n·d̄t.
    pub delay: f64,
    /// Sub-pulse spacing Δt; zero for a single pulse.
    pub spacing: f64,
    /// Whether the order splits into 2n+1 binomial sub-pulses.
    pub split: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubPulse {
    pub delay: f64,
    pub weight: f64,
}

impl TrainOrder {
    /// Sub-pulses at delays 2n·d̄t + (n - k)Δt with weights
    /// 𝒯ℛ^{n-1}·C(2n, k)/4ⁿ.
    pub fn sub_pulses(&self) -> Vec<SubPulse> {
        if !self.split {
            return vec![SubPulse {
                delay: self.delay,
                weight: self.amplitude,
            }];
        }
        let n = self.n as f64;
        binomial_weights(self.n)
            .into_iter()
            .enumerate()
            .map(|(k, w)| SubPulse {
                delay: self.delay + (n - k as f64) * self.spacing,
                weight: self.amplitude * w,
            })
            .collect()
    }
}

/// Analytic pulse-train descriptor, one entry per round-trip order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    pub orders: Vec<TrainOrder>,
}

impl PulseTrain {
    /// Output field ξ_out(t) = Σ weight·ξ_in(t - delay).
    pub fn field_at(&self, pulse: &PulseSpec, t: f64) -> Complex64 {
        let mut acc = 0.0;
        for order in &self.orders {
            for p in order.sub_pulses() {
                acc += p.weight * pulse.amplitude(t - p.delay);
            }
        }
        Complex64::new(acc, 0.0)
    }

    /// Uniformly sampled output field over `[start, end]` with at least
    /// `samples_per_width` samples per 1/bandwidth (minimum 8).
    pub fn synthesize(&self, pulse: &PulseSpec, start: f64, end: f64, samples_per_width: usize) -> Vec<(f64, Complex64)> {
        let per = samples_per_width.max(8) as f64;
        let step = 1.0 / (pulse.bandwidth() * per);
        let count = (((end - start) / step).ceil() as usize).max(1) + 1;
        let subs: Vec<SubPulse> = self.orders.iter().flat_map(|o| o.sub_pulses()).collect();
        (0..count)
            .map(|i| {
                let t = start + i as f64 * step;
                let v: f64 = subs.iter().map(|p| p.weight * pulse.amplitude(t - p.delay)).sum();
                (t, Complex64::new(v, 0.0))
            })
            .collect()
    }
}

fn check_orders(n_max: usize) -> Result<()> {
    if n_max == 0 {
        return Err(Error::InvalidInput("n_max must be >= 1".into()));
    }
    if n_max > MAX_EXACT_ORDER {
        return Err(Error::Overflow {
            requested: n_max,
            max: MAX_EXACT_ORDER,
        });
    }
    Ok(())
}

fn build_train(spec: &LightClockSpec, n_max: usize, dt: f64, spacing: f64, split: bool) -> PulseTrain {
    let t = spec.transmissivity;
    let r = spec.reflectivity();
    let orders = (1..=n_max)
        .map(|n| TrainOrder {
            n,
            amplitude: t * r.powi(n as i32 - 1),
            delay: 2.0 * n as f64 * dt,
            spacing,
            split,
        })
        .collect();
    PulseTrain { orders }
}

/// Train emitted by a clock whose ball has the single radius `a`: one pulse
/// per order at delay 2n·dt(a).
pub fn pulse_train_flat(spec: &LightClockSpec, n_max: usize) -> Result<PulseTrain> {
    check_orders(n_max)?;
    let dt = traversal_time(spec, spec.radius_a)?;
    Ok(build_train(spec, n_max, dt, 0.0, false))
}

/// Train emitted with the ball in an equal superposition of radii a and b,
/// expanded exactly in binomial sub-pulses. Equal radii give the flat train.
pub fn pulse_train_superposed_exact(spec: &LightClockSpec, n_max: usize) -> Result<PulseTrain> {
    check_orders(n_max)?;
    let (dtbar, half_diff) = spec.mean_and_half_difference()?;
    let split = half_diff != 0.0;
    Ok(build_train(spec, n_max, dtbar, half_diff, split))
}

/// Large-time pulse height 1/(Δω Δt sqrt(t / 2d̄t)).
pub fn pulse_height_asymptotic(bandwidth: f64, half_diff: f64, dtbar: f64, t: f64) -> f64 {
    1.0 / (bandwidth * half_diff * (t / (2.0 * dtbar)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Time in seconds at which the asymptotic height reaches the threshold.
    Finite(f64),
    /// Δt = 0: the clock never dephases.
    NoHorizon,
}

/// Height at which the clock counts as visibly dephased.
pub const DEFAULT_HORIZON_HEIGHT: f64 = 1.0;

/// Time t at which the asymptotic pulse height falls to 1: 2d̄t/(ΔωΔt)².
pub fn coherence_horizon(bandwidth: f64, half_diff: f64, dtbar: f64) -> Horizon {
    coherence_horizon_at(bandwidth, half_diff, dtbar, DEFAULT_HORIZON_HEIGHT)
}

/// Time at which the asymptotic height reaches `height`.
pub fn coherence_horizon_at(bandwidth: f64, half_diff: f64, dtbar: f64, height: f64) -> Horizon {
    if half_diff == 0.0 {
        return Horizon::NoHorizon;
    }
    Horizon::Finite(2.0 * dtbar / (bandwidth * half_diff * height).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::integrate_breaks;
    use crate::numerics::Tolerance;
    use crate::potentials::uniform_ball_potential;

    fn clock(mass: f64) -> LightClockSpec {
        LightClockSpec::new(0.03, mass, 1e-6, 2e-6, 0.1, PulseSpec::gaussian(1e12)).unwrap()
    }

    #[test]
    fn zero_mass_traverses_in_l_over_c() {
        let spec = clock(0.0);
        assert_eq!(traversal_time(&spec, 1e-6).unwrap(), 0.03 / CODATA_2018.c);
    }

    #[test]
    fn traversal_correction_example() {
        let spec = clock(1e-15);
        let dt = traversal_time(&spec, 1e-6).unwrap();
        let excess = traversal_excess(&spec, 1e-6).unwrap();
        let base = 0.03 / CODATA_2018.c;
        let k = CODATA_2018;
        let correction = 2.0 * k.g * 1e-15 / k.c.powi(3) * ((0.03f64 / 2e-6).ln() + 4.0 / 3.0);
        assert!((correction - 5.4e-50).abs() < 0.05e-50);
        assert!(((excess - correction) / correction).abs() < 1e-12);
        assert!((base - 1.0007e-10).abs() < 1e-13);
        assert_eq!(dt, base + correction);
    }

    #[test]
    fn traversal_matches_line_integral() {
        let spec = clock(3.0);
        let gm = CODATA_2018.g * 3.0;
        let a = 1e-6;
        let line = integrate_breaks(
            |x| uniform_ball_potential(gm, a, x.abs()),
            &[-0.015, -a, 0.0, a, 0.015],
            Tolerance::relative(1e-12),
        );
        let excess = traversal_excess(&spec, a).unwrap();
        let expected = -line.value / CODATA_2018.c.powi(3);
        assert!(((excess - expected) / expected).abs() < 1e-6);
        assert!(traversal_time(&spec, 0.02).is_err());
    }

    #[test]
    fn delay_examples() {
        let spec = LightClockSpec::new(0.03, 1e-12, 0.95e-6, 1e-6, 0.1, PulseSpec::gaussian(1e12)).unwrap();
        let d = superposition_delay(&spec);
        assert!((d - 5.1e-49).abs() < 0.1e-49, "{d:e}");
        let doubled = LightClockSpec { mass: 2e-12, ..spec };
        assert_eq!(superposition_delay(&doubled), 2.0 * d);
        let same = LightClockSpec { radius_a: 1e-6, ..spec };
        assert_eq!(superposition_delay(&same), 0.0);
    }

    #[test]
    fn spec_validation() {
        let p = PulseSpec::gaussian(1.0);
        assert!(LightClockSpec::new(1.0, 1.0, 0.2, 0.1, 0.1, p).is_err());
        assert!(LightClockSpec::new(1.0, 1.0, 0.1, 0.5, 0.1, p).is_err());
        assert!(LightClockSpec::new(1.0, 1.0, 0.1, 0.2, 0.5, p).is_err());
        assert!(LightClockSpec::new(1.0, 1.0, 0.1, 0.2, 0.3, p).is_ok());
    }

    #[test]
    fn binomial_first_order() {
        assert_eq!(binomial_weights(1), vec![0.25, 0.5, 0.25]);
        let spec = clock(1e-12);
        let train = pulse_train_superposed_exact(&spec, 1).unwrap();
        let (dtbar, dt) = spec.mean_and_half_difference().unwrap();
        let subs = train.orders[0].sub_pulses();
        let amp = spec.transmissivity;
        assert_eq!(subs.len(), 3);
        assert_eq!(subs[0].delay, 2.0 * dtbar + dt);
        assert_eq!(subs[1].delay, 2.0 * dtbar);
        assert_eq!(subs[2].delay, 2.0 * dtbar - dt);
        assert_eq!(subs.iter().map(|s| s.weight).collect::<Vec<_>>(), vec![amp / 4.0, amp / 2.0, amp / 4.0]);
    }

    #[test]
    fn binomial_weights_sum_to_one() {
        for n in 1..=100 {
            let s: f64 = binomial_weights(n).iter().sum();
            assert!((s - 1.0).abs() < 1e-13, "n = {n}: {s}");
        }
        let s: f64 = binomial_weights(MAX_EXACT_ORDER).iter().sum();
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn order_limits() {
        let spec = clock(1e-12);
        assert!(matches!(pulse_train_superposed_exact(&spec, 0), Err(Error::InvalidInput(_))));
        assert!(matches!(
            pulse_train_superposed_exact(&spec, MAX_EXACT_ORDER + 1),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn degenerate_superposition_is_flat_train() {
        let spec = LightClockSpec {
            radius_b: 1e-6,
            ..clock(1e-12)
        };
        let flat = pulse_train_flat(&spec, 20).unwrap();
        let sup = pulse_train_superposed_exact(&spec, 20).unwrap();
        assert_eq!(flat, sup);
        assert_eq!(flat.orders[0].sub_pulses().len(), 1);
    }

    #[test]
    fn dephasing_factor_bounds() {
        let f = dephasing_factor(3.0, &[(0.5, 1.0), (0.5, 1.0)]);
        assert!((f.norm() - 1.0).abs() < 1e-15);
        let g = dephasing_factor(3.0, &[(0.5, 1.0), (0.5, 1.2)]);
        assert!(g.norm() < 1.0);
        // Equal modulo 2π/ω.
        let h = dephasing_factor(2.0, &[(0.5, 1.0), (0.5, 1.0 + std::f64::consts::PI)]);
        assert!((h.norm() - 1.0).abs() < 1e-12);
        // Degenerate branches reduce to a single phase factor.
        let single = Complex64::from_polar(1.0, 3.0 * 0.7);
        let multi = dephasing_factor(3.0, &[(0.2, 0.7), (0.3, 0.7), (0.5, 0.7)]);
        assert!((multi - single).norm() < 1e-15);
    }

    #[test]
    fn asymptotic_height_scaling_and_example() {
        let h1 = pulse_height_asymptotic(1.0, 1.0, 1.0, 4.0);
        let h2 = pulse_height_asymptotic(1.0, 1.0, 1.0, 16.0);
        assert_eq!(h2, h1 / 2.0);
        let h = pulse_height_asymptotic(1e12, 1e-49, 1e-13, 1e60);
        assert!(h > 0.1 && h < 10.0, "{h}");
    }

    #[test]
    fn horizon_examples() {
        let Horizon::Finite(t) = coherence_horizon(1e12, 1e-49, 1e-13) else {
            panic!()
        };
        assert!((t / 2e61 - 1.0).abs() < 1e-12);
        assert!((t.log10() - 60.0).abs() <= 1.5);
        assert_eq!(coherence_horizon(1e12, 0.0, 1e-13), Horizon::NoHorizon);
        let Horizon::Finite(t4) = coherence_horizon(4e12, 1e-49, 1e-13) else {
            panic!()
        };
        assert!((t / t4 - 16.0).abs() < 1e-12);
    }

    #[test]
    fn raised_cosine_center_and_continuity() {
        let b = 2.0;
        assert_eq!(raised_cosine(b, 0.0), b / (2.0 * std::f64::consts::PI));
        let near = raised_cosine(b, 0.99e-4 / b);
        let far = raised_cosine(b, 1.01e-4 / b);
        assert!((near - far).abs() < 1e-9);
    }
}
