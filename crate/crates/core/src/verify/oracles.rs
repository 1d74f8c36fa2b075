//! Independent reference computations. Each one reaches its answer by a
//! different route than the module it checks: brute-force sums, recursion,
//! Fourier synthesis, finite differences, plain quadrature, or fitting.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::constants::CODATA_2018;
use crate::error::Result;
use crate::interferometer::{overlap_amplitude_normalized, AmplifierSpec};
use crate::instability::{norm_deficit, tau_multibranch};
use crate::numerics::cubature::cubature;
use crate::numerics::quadrature::integrate_breaks;
use crate::numerics::{Integral, Tolerance};
use crate::potentials::{uniform_ball_potential, Body, MassConfiguration, SuperpositionState};
use crate::vec3::Vec3;

/// ∫Φ dx along a segment of length `length` through the centre of a uniform
/// ball, by adaptive quadrature of the piecewise interior/exterior potential.
pub fn line_integral_quadrature(mass: f64, radius: f64, length: f64) -> Integral {
    let gm = CODATA_2018.g * mass;
    let h = 0.5 * length;
    integrate_breaks(
        |x| uniform_ball_potential(gm, radius, x.abs()),
        &[-h, -radius, 0.0, radius, h],
        Tolerance::relative(1e-12).with_max_evals(1_000_000),
    )
}

/// Pulse amplitudes leaving the cavity, from iterating the field relations
/// round trip by round trip for a unit impulse: the circulating field is
/// emitted once per round trip and reflected back with ℛ.
pub fn cavity_impulse_recursion(transmissivity: f64, reflectivity: f64, orders: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(orders);
    let mut circulating = transmissivity;
    for _ in 0..orders {
        out.push(circulating);
        circulating *= reflectivity;
    }
    out
}

/// Steady-state field a₄ for input a₀ = 1 at frequency ω, by iterating
/// a₁ ← 𝒯a₀ + ℛa₄, a₄ ← e^{2iωdt}a₁ until the change is negligible.
pub fn cavity_fixed_point(transmissivity: f64, reflectivity: f64, omega: f64, dt: f64) -> Complex64 {
    let z = Complex64::from_polar(1.0, 2.0 * omega * dt);
    let mut a4 = Complex64::new(0.0, 0.0);
    for _ in 0..200_000 {
        let a1 = transmissivity + reflectivity * a4;
        let next = z * a1;
        if (next - a4).norm() <= 1e-17 {
            return next;
        }
        a4 = next;
    }
    a4
}

/// C(2n, k)/4ⁿ by exact multiplicative recurrence from the centre, k = 0..=2n.
pub fn binomial_by_recurrence(n: usize) -> Vec<f64> {
    // Centre value C(2n, n)/4ⁿ = Π_{j=1}^{n} (2j - 1)/(2j).
    let mut centre = 1.0;
    for j in 1..=n {
        centre *= (2 * j - 1) as f64 / (2 * j) as f64;
    }
    let mut w = vec![0.0; 2 * n + 1];
    w[n] = centre;
    for k in n..2 * n {
        w[k + 1] = w[k] * (2 * n - k) as f64 / (k + 1) as f64;
    }
    for k in 0..n {
        w[k] = w[2 * n - k];
    }
    w
}

/// Order-n superposed pulse envelope by Fourier synthesis: the Gaussian input
/// spectrum times cos^{2n}(ωΔt/2), transformed back with an FFT. Returns
/// (time offsets from the order's centre, field), in units where Δω = 1.
pub fn fourier_superposed_pulse(n: usize, dw_dt: f64, samples_per_width: usize) -> (Vec<f64>, Vec<f64>) {
    let dt = 1.0 / samples_per_width.max(8) as f64;
    let spread = (n as f64).sqrt() * dw_dt + 1.0;
    let window = 32.0 * spread;
    let len = ((window / dt).ceil() as usize).next_power_of_two();
    let d_omega = 2.0 * PI / (len as f64 * dt);
    let mut spectrum: Vec<Complex64> = (0..len)
        .map(|j| {
            let index = if j < len / 2 { j as f64 } else { j as f64 - len as f64 };
            let omega = index * d_omega;
            let input = PI.sqrt() * (-0.25 * omega * omega).exp();
            let c = (0.5 * omega * dw_dt).cos();
            Complex64::new(input * (c * c).powi(n as i32), 0.0)
        })
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(len).process(&mut spectrum);
    let scale = 1.0 / (len as f64 * dt);
    let mut times = Vec::with_capacity(len);
    let mut field = Vec::with_capacity(len);
    for (k, v) in spectrum.iter().enumerate() {
        let index = if k < len / 2 { k as f64 } else { k as f64 - len as f64 };
        times.push(index * dt);
        field.push(v.re * scale);
    }
    (times, field)
}

/// Largest |value| of a sampled field.
pub fn peak(field: &[f64]) -> f64 {
    field.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Norm of the probe state by the explicit double sum
/// sqrt(Σ_n Σ_m w_n w_m cos(m_p(Φ_n - Φ_m)t/ħ)).
pub fn norm_double_sum(weights: &[f64], phis: &[f64], m_p: f64, t: f64) -> f64 {
    let mut s = 0.0;
    for (wn, pn) in weights.iter().zip(phis) {
        for (wm, pm) in weights.iter().zip(phis) {
            s += wn * wm * (m_p * (pn - pm) * t / CODATA_2018.hbar).cos();
        }
    }
    s.max(0.0).sqrt()
}

/// τ from the curvature of the norm at t = 0, π/(2 sqrt(-N''(0))), with a
/// central second difference of step `step`.
pub fn tau_from_norm_curvature(state: &SuperpositionState, m_p: f64, x_p: Vec3, step: f64) -> Result<f64> {
    // N(±h) - 2N(0) = -(deficit(h) + deficit(-h)).
    let second = -(norm_deficit(state, m_p, x_p, step)? + norm_deficit(state, m_p, x_p, -step)?) / (step * step);
    Ok(PI / (2.0 * (-second).sqrt()))
}

/// Finite-difference τ with the step tied to the analytic τ as τ/10⁶.
pub fn tau_curvature_check(state: &SuperpositionState, m_p: f64, x_p: Vec3) -> Result<(f64, f64)> {
    let analytic = tau_multibranch(state, m_p, x_p)?.tau.as_f64();
    let fd = tau_from_norm_curvature(state, m_p, x_p, analytic * 1e-6)?;
    Ok((fd, analytic))
}

/// Least-squares slope of log y against log x.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Mass M delocalized with equal weights over an N³ grid filling a cube of
/// edge `edge` centred at the origin: one point-mass branch per grid site.
pub fn cube_delocalization(mass: f64, edge: f64, per_axis: usize) -> Result<SuperpositionState> {
    let step = if per_axis > 1 { edge / (per_axis - 1) as f64 } else { 0.0 };
    let offset = 0.5 * edge * (per_axis > 1) as u8 as f64;
    let mut configs = Vec::new();
    for i in 0..per_axis {
        for j in 0..per_axis {
            for k in 0..per_axis {
                let c = Vec3::new(i as f64 * step - offset, j as f64 * step - offset, k as f64 * step - offset);
                configs.push(MassConfiguration::single(Body::point(mass, c)?));
            }
        }
    }
    SuperpositionState::uniform(configs)
}

/// ∫|overlap|² d²α_L d²α_R/π² of the normalized overlap by 4-D cubature.
pub fn overlap_norm_quadrature(amp: &AmplifierSpec, tol: f64) -> Integral {
    let half = 8.0 * amp.gain.sqrt().max(1.0);
    let lo = [-half; 4];
    let hi = [half; 4];
    let r = cubature(
        |p| {
            let l = Complex64::new(p[0], p[1]);
            let r = Complex64::new(p[2], p[3]);
            overlap_amplitude_normalized(l, r, amp).norm_sqr()
        },
        &lo,
        &hi,
        Tolerance::relative(tol).with_max_evals(20_000_000),
    );
    Integral {
        value: r.value / (PI * PI),
        error: r.error / (PI * PI),
        ..r
    }
}

/// Minimum of πħ/(m_i|ΔΦ(x_i)|) by explicit enumeration.
pub fn min_tau_enumeration(particles: &[(f64, Vec3)], state: &SuperpositionState) -> Result<f64> {
    let mut best = f64::INFINITY;
    for &(m, x) in particles {
        let phi = state.potentials_at(x)?;
        let d = (phi[0] - phi[1]).abs();
        if d > 0.0 {
            best = best.min(PI * CODATA_2018.hbar / (m * d));
        }
    }
    Ok(best)
}
