//! Instability timescales of a probe that feels a superposition of
//! gravitational potentials: the time after which its superposed phase
//! evolutions dephase by π.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::CODATA_2018;
use crate::error::{Error, Result};
use crate::numerics::cubature::cubature_regions;
use crate::numerics::montecarlo::{stratified, McSettings};
use crate::numerics::quadrature::integrate;
use crate::numerics::roots::brent;
use crate::numerics::Tolerance;
use crate::potentials::{Shape, SuperpositionState};
use crate::vec3::Vec3;

/// Largest relative quadrature error for which a result is returned.
pub const ACCEPTED_QUADRATURE_ERROR: f64 = 1e-3;

/// A timescale that may diverge. `Infinite` means the probe never dephases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timescale {
    Finite(f64),
    Infinite,
}

impl Timescale {
    /// πħ / denominator, infinite when the denominator vanishes.
    pub fn from_denominator(denominator: f64) -> Self {
        if denominator == 0.0 {
            Timescale::Infinite
        } else {
            Timescale::Finite(PI * CODATA_2018.hbar / denominator)
        }
    }

    pub fn seconds(self) -> Option<f64> {
        match self {
            Timescale::Finite(t) => Some(t),
            Timescale::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Timescale::Infinite)
    }

    /// Seconds with `f64::INFINITY` for the sentinel, for ordering only.
    pub fn as_f64(self) -> f64 {
        self.seconds().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    TwoBranch,
    Density,
    Multibranch,
    DensityMultibranch,
    MinPointset,
    Entangled,
    Product,
    SelfInstability,
    MovingProbe,
    Interferometer,
}

impl Formula {
    pub fn tag(self) -> &'static str {
        match self {
            Formula::TwoBranch => "two_branch",
            Formula::Density => "density",
            Formula::Multibranch => "multibranch",
            Formula::DensityMultibranch => "density_multibranch",
            Formula::MinPointset => "min_pointset",
            Formula::Entangled => "entangled",
            Formula::Product => "product",
            Formula::SelfInstability => "self",
            Formula::MovingProbe => "moving_probe",
            Formula::Interferometer => "interferometer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstabilityResult {
    pub tau: Timescale,
    /// Energy scale E with τ = πħ/E, in joules (m·|ΔΦ| or its integral).
    pub denominator: f64,
    pub formula: Formula,
    /// Relative error estimate of the denominator.
    pub quadrature_error: f64,
}

impl InstabilityResult {
    fn exact(denominator: f64, formula: Formula) -> Self {
        Self {
            tau: Timescale::from_denominator(denominator),
            denominator,
            formula,
            quadrature_error: 0.0,
        }
    }

    /// Flat record for tabular output; `inputs` is hashed into the digest.
    pub fn record<T: Serialize + ?Sized>(&self, inputs: &T) -> InstabilityRecord {
        InstabilityRecord {
            formula: self.formula.tag().to_string(),
            tau_s: self.tau.seconds(),
            denominator_j: self.denominator,
            quadrature_error: self.quadrature_error,
            inputs_digest: inputs_digest(inputs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstabilityRecord {
    pub formula: String,
    /// `None` encodes the infinite sentinel.
    pub tau_s: Option<f64>,
    pub denominator_j: f64,
    pub quadrature_error: f64,
    pub inputs_digest: String,
}

/// First 16 hex digits of the SHA-256 of the JSON encoding of `inputs`.
pub fn inputs_digest<T: Serialize + ?Sized>(inputs: &T) -> String {
    let json = serde_json::to_vec(inputs).unwrap_or_default();
    let digest = Sha256::digest(&json);
    hex::encode(&digest[..8])
}

/// Mass density of the probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ProbeDensity {
    Point {
        mass: f64,
        position: Vec3,
    },
    /// Rectangular slab: `thickness` along `normal`, `height` along
    /// `height_dir`, `width` along `normal × height_dir`.
    Slab {
        density: f64,
        thickness: f64,
        height: f64,
        width: f64,
        center: Vec3,
        #[serde(default = "default_normal")]
        normal: Vec3,
        #[serde(default = "default_height_dir")]
        height_dir: Vec3,
    },
    Cylinder {
        density: f64,
        radius: f64,
        length: f64,
        center: Vec3,
        #[serde(default = "default_normal")]
        axis: Vec3,
    },
    Ball {
        density: f64,
        radius: f64,
        center: Vec3,
    },
}

fn default_normal() -> Vec3 {
    Vec3::Z
}

fn default_height_dir() -> Vec3 {
    Vec3::X
}

fn unit(v: Vec3, what: &str) -> Result<Vec3> {
    v.normalized()
        .ok_or_else(|| Error::Geometry(format!("{what} must be a non-zero finite vector")))
}

impl ProbeDensity {
    pub fn point(mass: f64, position: Vec3) -> Self {
        ProbeDensity::Point { mass, position }
    }

    pub fn ball(density: f64, radius: f64, center: Vec3) -> Self {
        ProbeDensity::Ball {
            density,
            radius,
            center,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Geometry(format!("probe {name} must be > 0 and finite, got {v}")))
            }
        };
        match *self {
            ProbeDensity::Point { mass, position } => {
                positive("mass", mass)?;
                if !position.is_finite() {
                    return Err(Error::Geometry("probe position must be finite".into()));
                }
            }
            ProbeDensity::Slab {
                density,
                thickness,
                height,
                width,
                ..
            } => {
                positive("density", density)?;
                positive("thickness", thickness)?;
                positive("height", height)?;
                positive("width", width)?;
                self.slab_frame()?;
            }
            ProbeDensity::Cylinder {
                density,
                radius,
                length,
                axis,
                ..
            } => {
                positive("density", density)?;
                positive("radius", radius)?;
                positive("length", length)?;
                unit(axis, "cylinder axis")?;
            }
            ProbeDensity::Ball { density, radius, .. } => {
                positive("density", density)?;
                positive("radius", radius)?;
            }
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        match *self {
            ProbeDensity::Point { mass, .. } => mass,
            ProbeDensity::Slab {
                density,
                thickness,
                height,
                width,
                ..
            } => density * thickness * height * width,
            ProbeDensity::Cylinder {
                density, radius, length, ..
            } => density * PI * radius * radius * length,
            ProbeDensity::Ball { density, radius, .. } => density * 4.0 / 3.0 * PI * radius.powi(3),
        }
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        let mut out = *self;
        match &mut out {
            ProbeDensity::Point { position, .. } => *position = *position + offset,
            ProbeDensity::Slab { center, .. }
            | ProbeDensity::Cylinder { center, .. }
            | ProbeDensity::Ball { center, .. } => *center = *center + offset,
        }
        out
    }

    /// Orthonormal (normal, height, width) directions of a slab.
    fn slab_frame(&self) -> Result<(Vec3, Vec3, Vec3)> {
        let ProbeDensity::Slab { normal, height_dir, .. } = *self else {
            unreachable!("slab_frame on a non-slab probe")
        };
        let n = unit(normal, "slab normal")?;
        let h = unit(height_dir - n * height_dir.dot(n), "slab height direction (must not be parallel to the normal)")?;
        Ok((n, h, n.cross(h)))
    }

    /// Whether `x` lies in the closed probe volume.
    pub fn contains(&self, x: Vec3) -> bool {
        match *self {
            ProbeDensity::Point { position, .. } => x == position,
            ProbeDensity::Slab {
                thickness,
                height,
                width,
                center,
                ..
            } => {
                let Ok((n, h, w)) = self.slab_frame() else { return false };
                let d = x - center;
                d.dot(n).abs() <= 0.5 * thickness && d.dot(h).abs() <= 0.5 * height && d.dot(w).abs() <= 0.5 * width
            }
            ProbeDensity::Cylinder {
                radius,
                length,
                center,
                axis,
                ..
            } => {
                let Ok(a) = unit(axis, "") else { return false };
                let d = x - center;
                let s = d.dot(a);
                s.abs() <= 0.5 * length && (d - a * s).norm() <= radius
            }
            ProbeDensity::Ball { radius, center, .. } => x.distance(center) <= radius,
        }
    }
}

/// Map from a parameter box to the probe volume with its mass Jacobian.
struct Chart {
    lower: [f64; 3],
    upper: [f64; 3],
    kind: ChartKind,
}

enum ChartKind {
    Slab { center: Vec3, frame: (Vec3, Vec3, Vec3), density: f64 },
    Ball { center: Vec3, density: f64 },
    Cylinder { center: Vec3, frame: (Vec3, Vec3, Vec3), density: f64 },
}

impl Chart {
    fn new(probe: &ProbeDensity) -> Result<Option<Self>> {
        Ok(Some(match *probe {
            ProbeDensity::Point { .. } => return Ok(None),
            ProbeDensity::Slab {
                density,
                thickness,
                height,
                width,
                center,
                ..
            } => Chart {
                lower: [-0.5 * thickness, -0.5 * height, -0.5 * width],
                upper: [0.5 * thickness, 0.5 * height, 0.5 * width],
                kind: ChartKind::Slab {
                    center,
                    frame: probe.slab_frame()?,
                    density,
                },
            },
            ProbeDensity::Ball { density, radius, center } => Chart {
                lower: [0.0, -1.0, 0.0],
                upper: [radius, 1.0, 2.0 * PI],
                kind: ChartKind::Ball { center, density },
            },
            ProbeDensity::Cylinder {
                density,
                radius,
                length,
                center,
                axis,
            } => {
                let a = unit(axis, "cylinder axis")?;
                let (e1, e2) = a.orthonormal_complement();
                Chart {
                    lower: [0.0, 0.0, -0.5 * length],
                    upper: [radius, 2.0 * PI, 0.5 * length],
                    kind: ChartKind::Cylinder {
                        center,
                        frame: (a, e1, e2),
                        density,
                    },
                }
            }
        }))
    }

    /// Position and mass element density·|J| at parameter `p`.
    fn map(&self, p: &[f64]) -> (Vec3, f64) {
        match self.kind {
            ChartKind::Slab {
                center,
                frame: (n, h, w),
                density,
            } => (center + n * p[0] + h * p[1] + w * p[2], density),
            ChartKind::Ball { center, density } => {
                let (r, mu, phi) = (p[0], p[1], p[2]);
                let sin = (1.0 - mu * mu).max(0.0).sqrt();
                let x = center + Vec3::new(r * sin * phi.cos(), r * sin * phi.sin(), r * mu);
                (x, density * r * r)
            }
            ChartKind::Cylinder {
                center,
                frame: (a, e1, e2),
                density,
            } => {
                let (r, phi, s) = (p[0], p[1], p[2]);
                (center + a * s + e1 * (r * phi.cos()) + e2 * (r * phi.sin()), density * r)
            }
        }
    }

    /// Initial subdivision: for slabs, breakpoints graded geometrically
    /// towards each source so that sharply peaked integrands are resolved.
    fn regions(&self, sources: &[(Vec3, f64)]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let ChartKind::Slab {
            center,
            frame: (n, h, w),
            ..
        } = self.kind
        else {
            return vec![(self.lower.to_vec(), self.upper.to_vec())];
        };
        let axes = [n, h, w];
        let mut breaks: [Vec<f64>; 3] = std::array::from_fn(|i| vec![self.lower[i], self.upper[i]]);
        for &(source, size) in sources {
            let local: [f64; 3] = std::array::from_fn(|i| (source - center).dot(axes[i]));
            let outside: f64 = (0..3)
                .map(|i| (local[i].abs() - self.upper[i]).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt();
            for i in 0..3 {
                let (lo, hi) = (self.lower[i], self.upper[i]);
                let span = hi - lo;
                let step = outside.max(0.5 * size).max(1e-9 * span);
                let c = local[i].clamp(lo, hi);
                breaks[i].push(c);
                let mut d = step;
                while d < span {
                    for x in [c - d, c + d] {
                        if x > lo && x < hi {
                            breaks[i].push(x);
                        }
                    }
                    d *= 2.0;
                }
            }
        }
        for (i, b) in breaks.iter_mut().enumerate() {
            b.sort_by(f64::total_cmp);
            let min_gap = 1e-12 * (self.upper[i] - self.lower[i]);
            b.dedup_by(|x, y| (*x - *y).abs() <= min_gap);
        }
        let mut out = Vec::new();
        for u in breaks[0].windows(2) {
            for v in breaks[1].windows(2) {
                for s in breaks[2].windows(2) {
                    out.push((vec![u[0], v[0], s[0]], vec![u[1], v[1], s[1]]));
                }
            }
        }
        out
    }
}

/// How volume integrals over the probe are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Integrator {
    Adaptive { rel_tol: f64, max_evals: usize },
    MonteCarlo(McSettings),
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator::Adaptive {
            rel_tol: 1e-6,
            max_evals: 3_000_000,
        }
    }
}

impl Integrator {
    pub fn adaptive(rel_tol: f64) -> Self {
        match Self::default() {
            Integrator::Adaptive { max_evals, .. } => Integrator::Adaptive { rel_tol, max_evals },
            other => other,
        }
    }
}

/// Rejects probes whose volume contains a point mass of any branch.
fn check_point_masses(probe: &ProbeDensity, state: &SuperpositionState) -> Result<()> {
    if matches!(probe, ProbeDensity::Point { .. }) {
        return Ok(());
    }
    for branch in &state.branches {
        for (index, body) in branch.config.point_masses() {
            if probe.contains(body.center) {
                return Err(Error::Singularity {
                    body: index,
                    point: body.center.into(),
                });
            }
        }
    }
    Ok(())
}

fn sources(state: &SuperpositionState) -> Vec<(Vec3, f64)> {
    let mut out: Vec<(Vec3, f64)> = Vec::new();
    let mut mean = Vec3::ZERO;
    let mut count = 0usize;
    for branch in &state.branches {
        for body in &branch.config.bodies {
            mean = mean + body.center;
            count += 1;
            if !out.iter().any(|(c, _)| *c == body.center) {
                out.push((body.center, body.extent()));
            }
        }
    }
    if out.len() > 1 && out.len() <= 8 {
        out.push((mean * (1.0 / count as f64), 0.0));
    }
    // Dense branch sets (delocalized clouds) get one focus at their centroid.
    if out.len() > 9 {
        let size = out.iter().map(|(c, _)| c.distance(mean * (1.0 / count as f64))).fold(0.0, f64::max);
        out = vec![(mean * (1.0 / count as f64), 2.0 * size)];
    }
    out
}

/// ∫ ρ_p(x) g(x) d³x with its relative error.
fn integrate_probe<G>(probe: &ProbeDensity, state: &SuperpositionState, g: G, integrator: Integrator) -> Result<(f64, f64)>
where
    G: Fn(Vec3) -> Result<f64> + Sync,
{
    probe.validate()?;
    check_point_masses(probe, state)?;
    let Some(chart) = Chart::new(probe)? else {
        let ProbeDensity::Point { mass, position } = *probe else { unreachable!() };
        return Ok((mass * g(position)?, 0.0));
    };
    let failure: OnceLock<Error> = OnceLock::new();
    let integrand = |p: &[f64]| {
        let (x, element) = chart.map(p);
        match g(x) {
            Ok(v) => element * v,
            Err(e) => {
                let _ = failure.set(e);
                0.0
            }
        }
    };
    let (value, rel) = match integrator {
        Integrator::Adaptive { rel_tol, max_evals } => {
            let tol = Tolerance::relative(rel_tol).with_max_evals(max_evals);
            let r = cubature_regions(integrand, &chart.regions(&sources(state)), tol);
            (r.value, r.relative_error())
        }
        Integrator::MonteCarlo(settings) => {
            let span: [f64; 3] = std::array::from_fn(|i| chart.upper[i] - chart.lower[i]);
            let volume: f64 = span.iter().product();
            let est = stratified(
                |u| {
                    let p: [f64; 3] = std::array::from_fn(|i| chart.lower[i] + u[i] * span[i]);
                    integrand(&p)
                },
                3,
                settings,
            );
            (est.value * volume, est.relative_error())
        }
    };
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    if value == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(rel <= ACCEPTED_QUADRATURE_ERROR) {
        return Err(Error::NonConvergence {
            estimate: rel,
            limit: ACCEPTED_QUADRATURE_ERROR,
            evaluations: 0,
        });
    }
    Ok((value, rel))
}

fn require_two(state: &SuperpositionState) -> Result<()> {
    if state.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "formula needs exactly two branches, got {}",
            state.len()
        )));
    }
    Ok(())
}

fn check_mass(m: f64) -> Result<()> {
    if m >= 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("probe mass must be >= 0, got {m}")))
    }
}

/// τ = πħ/(m|Φ₁(x) - Φ₂(x)|).
pub fn tau_two_branch(m_p: f64, state: &SuperpositionState, x_p: Vec3) -> Result<InstabilityResult> {
    require_two(state)?;
    check_mass(m_p)?;
    let phi = state.potentials_at(x_p)?;
    Ok(InstabilityResult::exact(m_p * (phi[0] - phi[1]).abs(), Formula::TwoBranch))
}

/// τ = πħ / ∫ρ_p|Φ₁ - Φ₂| d³x.
pub fn tau_density(probe: &ProbeDensity, state: &SuperpositionState, integrator: Integrator) -> Result<InstabilityResult> {
    require_two(state)?;
    let (value, rel) = integrate_probe(
        probe,
        state,
        |x| {
            let phi = state.potentials_at(x)?;
            Ok((phi[0] - phi[1]).abs())
        },
        integrator,
    )?;
    Ok(InstabilityResult {
        tau: Timescale::from_denominator(value),
        denominator: value,
        formula: Formula::Density,
        quadrature_error: rel,
    })
}

/// √(2 Σ_{n,m} w_n w_m (Φ_n - Φ_m)²), evaluated as 2·sqrt(Σ w_n (Φ_n - Φ̄)²).
pub fn branch_spread(weights: &[f64], phis: &[f64]) -> f64 {
    assert_eq!(weights.len(), phis.len());
    let Some(&reference) = phis.first() else { return 0.0 };
    let d: Vec<f64> = phis.iter().map(|p| p - reference).collect();
    let total: f64 = weights.iter().sum();
    let mean = weights.iter().zip(&d).map(|(w, x)| w * x).sum::<f64>() / total;
    let var: f64 = weights.iter().zip(&d).map(|(w, x)| w * (x - mean).powi(2)).sum::<f64>() / total;
    2.0 * var.sqrt()
}

/// τ = πħ/(m √(2 Σ_{n,m} |c_n|²|c_m|²(Φ_n - Φ_m)²)).
pub fn tau_multibranch(state: &SuperpositionState, m_p: f64, x_p: Vec3) -> Result<InstabilityResult> {
    check_mass(m_p)?;
    if state.len() == 1 {
        return Ok(InstabilityResult::exact(0.0, Formula::Multibranch));
    }
    let phi = state.potentials_at(x_p)?;
    Ok(InstabilityResult::exact(
        m_p * branch_spread(&state.weights(), &phi),
        Formula::Multibranch,
    ))
}

/// Density-weighted multibranch timescale.
pub fn tau_density_multibranch(
    probe: &ProbeDensity,
    state: &SuperpositionState,
    integrator: Integrator,
) -> Result<InstabilityResult> {
    if state.len() == 1 {
        probe.validate()?;
        return Ok(InstabilityResult::exact(0.0, Formula::DensityMultibranch));
    }
    let weights = state.weights();
    let (value, rel) = integrate_probe(
        probe,
        state,
        |x| Ok(branch_spread(&weights, &state.potentials_at(x)?)),
        integrator,
    )?;
    Ok(InstabilityResult {
        tau: Timescale::from_denominator(value),
        denominator: value,
        formula: Formula::DensityMultibranch,
        quadrature_error: rel,
    })
}

fn phases(state: &SuperpositionState, m_p: f64, x_p: Vec3, t: f64) -> Result<Vec<f64>> {
    let phi = state.potentials_at(x_p)?;
    let reference = phi[0];
    let scale = m_p * t / CODATA_2018.hbar;
    Ok(phi.iter().map(|p| (p - reference) * scale).collect())
}

/// Norm sqrt(Σ_{n,m}|c_n|²|c_m|² cos(m(Φ_n - Φ_m)t/ħ)) = |Σ_n |c_n|² e^{iθ_n}|.
pub fn norm_decay(state: &SuperpositionState, m_p: f64, x_p: Vec3, t: f64) -> Result<f64> {
    let theta = phases(state, m_p, x_p, t)?;
    let (mut re, mut im, mut total) = (0.0, 0.0, 0.0);
    for (w, th) in state.weights().iter().zip(&theta) {
        re += w * th.cos();
        im += w * th.sin();
        total += w;
    }
    Ok((re.hypot(im) / total).min(1.0))
}

/// 1 - norm_decay, computed without cancellation for small t.
pub fn norm_deficit(state: &SuperpositionState, m_p: f64, x_p: Vec3, t: f64) -> Result<f64> {
    let theta = phases(state, m_p, x_p, t)?;
    let w = state.weights();
    let mut d = 0.0;
    for n in 0..w.len() {
        for m in 0..n {
            d += 4.0 * w[n] * w[m] * (0.5 * (theta[n] - theta[m])).sin().powi(2);
        }
    }
    let d = d.min(1.0);
    Ok(d / (1.0 + (1.0 - d).sqrt()))
}

/// Minimum of the two-branch timescale over a set of point particles.
pub fn tau_min_pointset(particles: &[(f64, Vec3)], state: &SuperpositionState) -> Result<InstabilityResult> {
    if particles.is_empty() {
        return Err(Error::InvalidInput("particle list is empty".into()));
    }
    let mut best = 0.0f64;
    for &(m, x) in particles {
        best = best.max(tau_two_branch(m, state, x)?.denominator);
    }
    Ok(InstabilityResult::exact(best, Formula::MinPointset))
}

/// Two superposed bodies a and b entangled with each other:
/// τ = πħ/(m|Φ_a1 - Φ_a2 + Φ_b1 - Φ_b2|).
pub fn tau_entangled(m_p: f64, phi_a1: f64, phi_a2: f64, phi_b1: f64, phi_b2: f64) -> InstabilityResult {
    InstabilityResult::exact(m_p * ((phi_a1 - phi_a2) + (phi_b1 - phi_b2)).abs(), Formula::Entangled)
}

/// Independent superpositions of a and b:
/// τ = πħ/(m sqrt((Φ_a1 - Φ_a2)² + (Φ_b1 - Φ_b2)²)).
pub fn tau_product(m_p: f64, phi_a1: f64, phi_a2: f64, phi_b1: f64, phi_b2: f64) -> InstabilityResult {
    InstabilityResult::exact(m_p * (phi_a1 - phi_a2).hypot(phi_b1 - phi_b2), Formula::Product)
}

/// A single extended body acting as its own probe: τ = πħ/(M|Φ₁(x₁) - Φ₂(x₁)|),
/// where branch n holds the body centred at x_n.
pub fn tau_self(state: &SuperpositionState) -> Result<InstabilityResult> {
    require_two(state)?;
    let body = |i: usize| {
        let config = &state.branches[i].config;
        if config.bodies.len() != 1 {
            return Err(Error::InvalidInput("self-instability needs one body per branch".into()));
        }
        Ok(config.bodies[0])
    };
    let (b1, b2) = (body(0)?, body(1)?);
    if b1.mass != b2.mass || b1.shape != b2.shape {
        return Err(Error::InvalidInput("both branches must hold the same body".into()));
    }
    if matches!(b1.shape, Shape::Point) {
        return Err(Error::Singularity {
            body: 0,
            point: b1.center.into(),
        });
    }
    let at_first = delta_at(state, b1.center)?;
    let at_second = delta_at(state, b2.center)?;
    let scale = at_first.abs().max(at_second.abs());
    if scale > 0.0 && (at_first.abs() - at_second.abs()).abs() > 1e-6 * scale {
        return Err(Error::Geometry(format!(
            "self-potential differences at the two centres disagree: {at_first:e} vs {at_second:e}"
        )));
    }
    Ok(InstabilityResult::exact(b1.mass * at_first.abs(), Formula::SelfInstability))
}

fn delta_at(state: &SuperpositionState, x: Vec3) -> Result<f64> {
    let phi = state.potentials_at(x)?;
    Ok(phi[0] - phi[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MovingProbe {
    /// τ solving m∫₀^τ|ΔΦ(t)|dt = πħ.
    Solved { tau: f64 },
    /// The accumulated phase at `t_max` is still below π.
    NotReached { accumulated_phase: f64 },
}

/// Self-consistent timescale for a probe whose potential difference varies
/// in time: solves m_p ∫₀^τ |ΔΦ(t)| dt = πħ on [0, t_max].
pub fn tau_moving_probe<F: Fn(f64) -> f64>(m_p: f64, delta_phi_of_t: F, t_max: f64) -> Result<MovingProbe> {
    check_mass(m_p)?;
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidInput(format!("t_max must be > 0, got {t_max}")));
    }
    let hbar = CODATA_2018.hbar;
    let tol = Tolerance::relative(1e-13);
    let accumulated = |tau: f64| -> Result<f64> {
        if tau <= 0.0 {
            return Ok(0.0);
        }
        let r = integrate(|t| delta_phi_of_t(t).abs(), 0.0, tau, tol);
        if !r.value.is_finite() || !(r.relative_error() <= 1e-8) {
            return Err(Error::NonConvergence {
                estimate: r.relative_error(),
                limit: 1e-8,
                evaluations: r.evaluations,
            });
        }
        Ok(m_p * r.value / hbar)
    };
    let total = accumulated(t_max)?;
    if total < PI {
        return Ok(MovingProbe::NotReached {
            accumulated_phase: total,
        });
    }
    let failure: OnceLock<Error> = OnceLock::new();
    let tau = brent(
        |tau| match accumulated(tau) {
            Ok(v) => v - PI,
            Err(e) => {
                let _ = failure.set(e);
                f64::NAN
            }
        },
        0.0,
        t_max,
        1e-15 * t_max,
        500,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(MovingProbe::Solved { tau: tau? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{Body, MassConfiguration};

    const HBAR: f64 = CODATA_2018.hbar;

    fn displaced_ball(mass: f64, radius: f64, d: f64) -> SuperpositionState {
        SuperpositionState::two_branch(
            MassConfiguration::single(Body::ball(mass, radius, Vec3::ZERO).unwrap()),
            MassConfiguration::single(Body::ball(mass, radius, Vec3::new(d, 0.0, 0.0)).unwrap()),
        )
    }

    #[test]
    fn worked_probe_example() {
        let s = displaced_ball(1e-15, 1e-7, -1e-6);
        let r = tau_two_branch(1e-16, &s, Vec3::new(10e-6, 0.0, 0.0)).unwrap();
        let tau = r.tau.seconds().unwrap();
        let g = CODATA_2018.g;
        let expected = PI * HBAR / (1e-16 * g * 1e-15 * (1.0 / 10e-6 - 1.0 / 11e-6));
        assert!((tau / expected - 1.0).abs() < 1e-12);
        assert!((1e3..=1e4).contains(&tau), "{tau}");
        let doubled = tau_two_branch(2e-16, &s, Vec3::new(10e-6, 0.0, 0.0)).unwrap();
        assert_eq!(doubled.tau.seconds().unwrap(), tau / 2.0);
    }

    #[test]
    fn identical_branches_are_infinite() {
        let s = displaced_ball(1.0, 0.1, 0.0);
        assert!(tau_two_branch(1.0, &s, Vec3::new(1.0, 0.0, 0.0)).unwrap().tau.is_infinite());
        let probe = ProbeDensity::ball(1e3, 0.2, Vec3::new(2.0, 0.0, 0.0));
        assert!(tau_density(&probe, &s, Integrator::default()).unwrap().tau.is_infinite());
        let single = SuperpositionState::new(vec![crate::potentials::Branch {
            weight: 1.0,
            config: s.branches[0].config.clone(),
        }])
        .unwrap();
        assert!(tau_multibranch(&single, 1.0, Vec3::new(1.0, 0.0, 0.0)).unwrap().tau.is_infinite());
    }

    #[test]
    fn small_ball_probe_matches_point_probe() {
        let s = displaced_ball(1.0, 0.01, 0.05);
        let x = Vec3::new(0.3, 0.1, -0.05);
        let radius = 1e-3 * x.norm();
        let probe = ProbeDensity::ball(1.0, radius, x);
        let m = probe.total_mass();
        let dens = tau_density(&probe, &s, Integrator::default()).unwrap();
        let point = tau_two_branch(m, &s, x).unwrap();
        let ratio = dens.tau.seconds().unwrap() / point.tau.seconds().unwrap();
        assert!((ratio - 1.0).abs() < 1e-3, "{ratio}");
    }

    #[test]
    fn probe_containing_point_mass_is_rejected() {
        let s = SuperpositionState::two_branch(
            MassConfiguration::single(Body::point(1.0, Vec3::ZERO).unwrap()),
            MassConfiguration::single(Body::point(1.0, Vec3::new(0.1, 0.0, 0.0)).unwrap()),
        );
        let probe = ProbeDensity::ball(1.0, 0.05, Vec3::new(0.12, 0.0, 0.0));
        assert!(matches!(
            tau_density(&probe, &s, Integrator::default()),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn two_equal_branches_norm() {
        let s = displaced_ball(1e-15, 1e-7, -1e-6);
        let x = Vec3::new(10e-6, 0.0, 0.0);
        let tau = tau_two_branch(1e-16, &s, x).unwrap().tau.seconds().unwrap();
        assert_eq!(norm_decay(&s, 1e-16, x, 0.0).unwrap(), 1.0);
        assert!(norm_decay(&s, 1e-16, x, tau).unwrap() < 1e-12);
        let dphi = s.potentials_at(x).unwrap();
        for t in [0.1 * tau, 0.37 * tau, 0.9 * tau] {
            let expected = (1e-16 * (dphi[0] - dphi[1]) * t / (2.0 * HBAR)).cos().abs();
            assert!((norm_decay(&s, 1e-16, x, t).unwrap() - expected).abs() < 1e-12);
            let def = norm_deficit(&s, 1e-16, x, t).unwrap();
            assert!((1.0 - def - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn multibranch_reduces_to_two_branch() {
        let s = displaced_ball(2.0, 0.1, 0.7);
        let x = Vec3::new(-0.4, 0.9, 0.3);
        let a = tau_two_branch(0.3, &s, x).unwrap().tau.seconds().unwrap();
        let b = tau_multibranch(&s, 0.3, x).unwrap().tau.seconds().unwrap();
        assert!((a / b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spread_matches_double_sum() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let p: [f64; 4] = [-1.0, 2.5, 0.25, -3.0];
        let mut s = 0.0;
        for n in 0..4 {
            for m in 0..4 {
                s += w[n] * w[m] * (p[n] - p[m]).powi(2);
            }
        }
        assert!((branch_spread(&w, &p) - (2.0 * s).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn entangled_and_product() {
        let m = 1e-3;
        let d = 1e-9;
        let e = tau_entangled(m, d, 0.0, d, 0.0).tau.seconds().unwrap();
        let ne = tau_product(m, d, 0.0, d, 0.0).tau.seconds().unwrap();
        assert!((e - PI * HBAR / (2.0 * m * d)).abs() < 1e-12 * e);
        assert!((ne / e - 2f64.sqrt()).abs() < 1e-12);
        assert!(tau_entangled(m, d, 0.0, -d, 0.0).tau.is_infinite());
        assert!(!tau_product(m, d, 0.0, -d, 0.0).tau.is_infinite());
        let single = tau_entangled(m, d, 0.0, 5.0, 5.0).tau;
        assert_eq!(single, tau_product(m, d, 0.0, 5.0, 5.0).tau);
        assert_eq!(single, Timescale::from_denominator(m * d));
    }

    #[test]
    fn self_instability_of_ball() {
        let (m, r, d) = (2.0, 0.1, 0.5);
        let s = displaced_ball(m, r, d);
        let res = tau_self(&s).unwrap();
        let g = CODATA_2018.g;
        let expected = PI * HBAR / (m * g * m * (1.5 / r - 1.0 / d));
        assert!((res.tau.seconds().unwrap() / expected - 1.0).abs() < 1e-12);
        assert!(tau_self(&displaced_ball(0.0, r, d)).unwrap().tau.is_infinite());
        let points = SuperpositionState::two_branch(
            MassConfiguration::single(Body::point(1.0, Vec3::ZERO).unwrap()),
            MassConfiguration::single(Body::point(1.0, Vec3::X).unwrap()),
        );
        assert!(matches!(tau_self(&points), Err(Error::Singularity { .. })));
    }

    #[test]
    fn moving_probe_cases() {
        let m = 1e-20;
        let c = 1e-12;
        let constant = tau_moving_probe(m, |_| c, 1e3).unwrap();
        let MovingProbe::Solved { tau } = constant else { panic!() };
        let expected = PI * HBAR / (m * c);
        assert!((tau / expected - 1.0).abs() < 1e-10, "{tau} {expected}");

        let beta = 1e-14;
        let MovingProbe::Solved { tau } = tau_moving_probe(m, |t| beta * t, 1e4).unwrap() else {
            panic!()
        };
        let expected = (2.0 * PI * HBAR / (m * beta)).sqrt();
        assert!((tau / expected - 1.0).abs() < 1e-8);

        let pulse = |t: f64| if t < 1.0 { 1e-16 } else { 0.0 };
        assert!(matches!(
            tau_moving_probe(m, pulse, 100.0).unwrap(),
            MovingProbe::NotReached { .. }
        ));
    }

    #[test]
    fn digest_is_stable() {
        let a = inputs_digest(&[1.0, 2.0]);
        assert_eq!(a, inputs_digest(&[1.0, 2.0]));
        assert_ne!(a, inputs_digest(&[1.0, 2.5]));
        assert_eq!(a.len(), 16);
    }
}
