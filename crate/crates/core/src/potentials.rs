//! Weak-field Newtonian potentials of rigid bodies, mass configurations and
//! weighted superpositions of configurations.
//!
//! All quantities are SI: metres, kilograms, J/kg for potentials. Uniform
//! balls use the closed interior/exterior forms; boxes and cylinders are
//! integrated numerically over their volume.

use serde::{Deserialize, Serialize};

use crate::constants::CODATA_2018;
use crate::error::{Error, Result};
use crate::numerics::cubature::cubature_regions;
use crate::numerics::{Integral, Tolerance};
use crate::vec3::Vec3;

/// Relative tolerance for volume-integrated body potentials.
pub const BODY_POTENTIAL_TOLERANCE: f64 = 1e-8;
const BODY_POTENTIAL_MAX_EVALS: usize = 3_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Point,
    UniformBall {
        radius: f64,
    },
    /// Axis-aligned cube.
    Box {
        edge: f64,
    },
    Cylinder {
        radius: f64,
        length: f64,
        #[serde(default = "default_axis")]
        axis: Vec3,
    },
}

fn default_axis() -> Vec3 {
    Vec3::Z
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Body {
    #[serde(flatten)]
    pub shape: Shape,
    pub mass: f64,
    pub center: Vec3,
}

impl Body {
    pub fn new(shape: Shape, mass: f64, center: Vec3) -> Result<Self> {
        let body = Self { shape, mass, center };
        body.validate()?;
        Ok(body)
    }

    pub fn point(mass: f64, center: Vec3) -> Result<Self> {
        Self::new(Shape::Point, mass, center)
    }

    pub fn ball(mass: f64, radius: f64, center: Vec3) -> Result<Self> {
        Self::new(Shape::UniformBall { radius }, mass, center)
    }

    pub fn cube(mass: f64, edge: f64, center: Vec3) -> Result<Self> {
        Self::new(Shape::Box { edge }, mass, center)
    }

    pub fn cylinder(mass: f64, radius: f64, length: f64, center: Vec3, axis: Vec3) -> Result<Self> {
        Self::new(Shape::Cylinder { radius, length, axis }, mass, center)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass >= 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidInput(format!("body mass must be finite and >= 0, got {}", self.mass)));
        }
        if !self.center.is_finite() {
            return Err(Error::InvalidInput("body center must be finite".into()));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Geometry(format!("{name} must be > 0, got {v}")))
            }
        };
        match self.shape {
            Shape::Point => Ok(()),
            Shape::UniformBall { radius } => positive("ball radius", radius),
            Shape::Box { edge } => positive("box edge", edge),
            Shape::Cylinder { radius, length, axis } => {
                positive("cylinder radius", radius)?;
                positive("cylinder length", length)?;
                if (axis.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::Geometry("cylinder axis must be a unit vector".into()));
                }
                Ok(())
            }
        }
    }

    /// Largest linear dimension (0 for a point).
    pub fn extent(&self) -> f64 {
        match self.shape {
            Shape::Point => 0.0,
            Shape::UniformBall { radius } => 2.0 * radius,
            Shape::Box { edge } => edge * 3f64.sqrt(),
            Shape::Cylinder { radius, length, .. } => (4.0 * radius * radius + length * length).sqrt(),
        }
    }

    /// Whether `x` lies in the closed volume of the body.
    pub fn contains(&self, x: Vec3) -> bool {
        let d = x - self.center;
        match self.shape {
            Shape::Point => d.norm() == 0.0,
            Shape::UniformBall { radius } => d.norm() <= radius,
            Shape::Box { edge } => [d.x, d.y, d.z].iter().all(|c| c.abs() <= 0.5 * edge),
            Shape::Cylinder { radius, length, axis } => {
                let s = d.dot(axis);
                s.abs() <= 0.5 * length && (d - axis * s).norm() <= radius
            }
        }
    }

    /// Potential of this body alone at `x` using gravitational constant `g`.
    /// `index` names the body in singularity errors.
    pub fn potential_with(&self, x: Vec3, g: f64, index: usize) -> Result<f64> {
        if self.mass == 0.0 {
            return Ok(0.0);
        }
        let gm = g * self.mass;
        let d = x - self.center;
        match self.shape {
            Shape::Point => {
                let r = d.norm();
                if r == 0.0 {
                    Err(Error::Singularity {
                        body: index,
                        point: x.into(),
                    })
                } else {
                    Ok(-gm / r)
                }
            }
            Shape::UniformBall { radius } => Ok(uniform_ball_potential(gm, radius, d.norm())),
            Shape::Box { edge } => {
                let density = self.mass / edge.powi(3);
                let integral = inverse_distance_box(d, 0.5 * edge)?;
                Ok(-g * density * integral.value)
            }
            Shape::Cylinder { radius, length, axis } => {
                let density = self.mass / (std::f64::consts::PI * radius * radius * length);
                let integral = inverse_distance_cylinder(d, radius, length, axis)?;
                Ok(-g * density * integral.value)
            }
        }
    }

    pub fn potential_at(&self, x: Vec3) -> Result<f64> {
        self.potential_with(x, CODATA_2018.g, 0)
    }
}

/// `-GM(3a² - r²)/(2a³)` inside, `-GM/r` outside.
pub fn uniform_ball_potential(gm: f64, radius: f64, r: f64) -> f64 {
    if r >= radius {
        -gm / r
    } else {
        -gm * (3.0 * radius * radius - r * r) / (2.0 * radius.powi(3))
    }
}

/// One piece of a Duffy decomposition: a parameter box with the singular
/// point at one of its vertices.
struct CornerBox {
    lo: [f64; 3],
    hi: [f64; 3],
    corner: [f64; 3],
}

/// Splits `[lo, hi]` at `p` (clamped) so every piece has `p` as a vertex.
fn split_at(lo: [f64; 3], hi: [f64; 3], p: [f64; 3]) -> Vec<CornerBox> {
    let mut ranges: Vec<Vec<(f64, f64, f64)>> = Vec::with_capacity(3);
    for i in 0..3 {
        let c = p[i].clamp(lo[i], hi[i]);
        let mut axis = Vec::new();
        if c > lo[i] {
            axis.push((lo[i], c, c));
        }
        if c < hi[i] {
            axis.push((c, hi[i], c));
        }
        ranges.push(axis);
    }
    let mut out = Vec::new();
    for a in &ranges[0] {
        for b in &ranges[1] {
            for c in &ranges[2] {
                out.push(CornerBox {
                    lo: [a.0, b.0, c.0],
                    hi: [a.1, b.1, c.1],
                    corner: [a.2, b.2, c.2],
                });
            }
        }
    }
    out
}

/// Integrates `weight(q) / |x - y(q)|` over the parameter pieces, where
/// `map(q) = (y, jacobian)`. Each piece is cut into three pyramids with apex
/// at the singular vertex and the Duffy substitution removes the 1/r
/// singularity.
fn duffy_inverse_distance<M>(pieces: &[CornerBox], x: Vec3, map: M) -> Result<Integral>
where
    M: Fn([f64; 3]) -> (Vec3, f64),
{
    let mut boxes = Vec::with_capacity(pieces.len() * 3);
    for k in 0..pieces.len() * 3 {
        boxes.push((vec![k as f64, 0.0, 0.0], vec![k as f64 + 1.0, 1.0, 1.0]));
    }
    let integrand = |v: &[f64]| {
        let k = (v[0].floor() as usize).min(pieces.len() * 3 - 1);
        let t = v[0] - k as f64;
        let piece = &pieces[k / 3];
        let main = k % 3;
        let (j, l) = ((main + 1) % 3, (main + 2) % 3);
        let mut delta = [0.0; 3];
        for i in 0..3 {
            delta[i] = if piece.corner[i] == piece.lo[i] {
                piece.hi[i] - piece.lo[i]
            } else {
                piece.lo[i] - piece.hi[i]
            };
        }
        let mut q = piece.corner;
        q[main] += t * delta[main];
        q[j] += t * v[1] * delta[j];
        q[l] += t * v[2] * delta[l];
        let (y, jac) = map(q);
        let r = (x - y).norm();
        let duffy = (delta[0] * delta[1] * delta[2]).abs() * t * t;
        if r == 0.0 {
            0.0
        } else {
            duffy * jac / r
        }
    };
    let result = cubature_regions(
        integrand,
        &boxes,
        Tolerance::relative(BODY_POTENTIAL_TOLERANCE).with_max_evals(BODY_POTENTIAL_MAX_EVALS),
    );
    if result.relative_error() > 1e-5 {
        return Err(Error::NonConvergence {
            estimate: result.relative_error(),
            limit: BODY_POTENTIAL_TOLERANCE,
            evaluations: result.evaluations,
        });
    }
    Ok(result)
}

/// ∫ d³y / |d - y| over the cube `[-half, half]³` centred at the origin.
fn inverse_distance_box(d: Vec3, half: f64) -> Result<Integral> {
    let lo = [-half; 3];
    let hi = [half; 3];
    let pieces = split_at(lo, hi, d.into());
    duffy_inverse_distance(&pieces, d, |q| (Vec3::from(q), 1.0))
}

/// ∫ d³y / |d - y| over a cylinder centred at the origin with the given axis.
fn inverse_distance_cylinder(d: Vec3, radius: f64, length: f64, axis: Vec3) -> Result<Integral> {
    use std::f64::consts::PI;
    let (e1, e2) = axis.orthonormal_complement();
    let s0 = d.dot(axis);
    let radial = d - axis * s0;
    let r0 = radial.norm();
    let phi0 = radial.dot(e2).atan2(radial.dot(e1));
    let half = 0.5 * length;
    let mut pieces = Vec::new();
    for (plo, phi, corner_phi) in [(phi0, phi0 + PI, phi0), (phi0 + PI, phi0 + 2.0 * PI, phi0 + 2.0 * PI)] {
        for mut piece in split_at([0.0, plo, -half], [radius, phi, half], [r0, corner_phi, s0]) {
            piece.corner[1] = corner_phi;
            pieces.push(piece);
        }
    }
    duffy_inverse_distance(&pieces, d, |q| {
        let (r, phi, s) = (q[0], q[1], q[2]);
        let y = axis * s + e1 * (r * phi.cos()) + e2 * (r * phi.sin());
        (y, r)
    })
}

/// A set of bodies forming one classical gravitational configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfiguration")]
pub struct MassConfiguration {
    pub bodies: Vec<Body>,
}

#[derive(Deserialize)]
struct RawConfiguration {
    bodies: Vec<Body>,
}

impl TryFrom<RawConfiguration> for MassConfiguration {
    type Error = Error;
    fn try_from(raw: RawConfiguration) -> Result<Self> {
        MassConfiguration::new(raw.bodies)
    }
}

impl MassConfiguration {
    pub fn new(bodies: Vec<Body>) -> Result<Self> {
        if bodies.is_empty() {
            return Err(Error::InvalidInput("mass configuration needs at least one body".into()));
        }
        for b in &bodies {
            b.validate()?;
        }
        // Point masses may not overlap any other body; extended bodies
        // superpose freely.
        for (i, a) in bodies.iter().enumerate() {
            if a.shape != Shape::Point {
                continue;
            }
            for (j, b) in bodies.iter().enumerate() {
                if i != j && b.contains(a.center) {
                    return Err(Error::Geometry(format!("point mass {i} overlaps body {j}")));
                }
            }
        }
        Ok(Self { bodies })
    }

    pub fn single(body: Body) -> Self {
        Self { bodies: vec![body] }
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    /// Rigidly shifted copy.
    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            bodies: self
                .bodies
                .iter()
                .map(|b| Body {
                    center: b.center + offset,
                    ..*b
                })
                .collect(),
        }
    }

    pub fn point_masses(&self) -> impl Iterator<Item = (usize, &Body)> {
        self.bodies.iter().enumerate().filter(|(_, b)| b.shape == Shape::Point)
    }

    pub fn potential_with(&self, x: Vec3, g: f64) -> Result<f64> {
        let mut phi = 0.0;
        for (i, b) in self.bodies.iter().enumerate() {
            phi += b.potential_with(x, g, i)?;
        }
        Ok(phi)
    }
}

/// Newtonian potential of `config` at `x`, in J/kg.
pub fn potential_at(config: &MassConfiguration, x: Vec3) -> Result<f64> {
    config.potential_with(x, CODATA_2018.g)
}

/// ∫₀ᴸ Φ dx along a diameter of a uniform ball centred on a segment of
/// length `length`: `2GM(ln(2a/L) - 4/3)`.
pub fn line_integral_phi(ball: &Body, length: f64) -> Result<f64> {
    let Shape::UniformBall { radius } = ball.shape else {
        return Err(Error::Geometry("line integral requires a uniform ball".into()));
    };
    if !(length > 0.0) || radius >= 0.5 * length {
        return Err(Error::Geometry(format!(
            "ball radius {radius} must be smaller than half the segment length {length}"
        )));
    }
    Ok(2.0 * CODATA_2018.g * ball.mass * ((2.0 * radius / length).ln() - 4.0 / 3.0))
}

/// One branch of a superposition: a classical configuration with weight |c|².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub weight: f64,
    #[serde(flatten)]
    pub config: MassConfiguration,
}

/// Weighted superposition of mass configurations. Only |c_n|² enters any
/// downstream formula, so complex amplitudes are not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawState")]
pub struct SuperpositionState {
    pub branches: Vec<Branch>,
}

#[derive(Deserialize)]
struct RawState {
    branches: Vec<Branch>,
}

impl TryFrom<RawState> for SuperpositionState {
    type Error = Error;
    fn try_from(raw: RawState) -> Result<Self> {
        SuperpositionState::new(raw.branches)
    }
}

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

impl SuperpositionState {
    pub fn new(branches: Vec<Branch>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidInput("superposition needs at least one branch".into()));
        }
        for (i, b) in branches.iter().enumerate() {
            if !(0.0..=1.0).contains(&b.weight) {
                return Err(Error::InvalidInput(format!("branch {i} weight {} outside [0, 1]", b.weight)));
            }
        }
        let sum: f64 = branches.iter().map(|b| b.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!("branch weights sum to {sum}, expected 1")));
        }
        Ok(Self { branches })
    }

    /// Equal-weight superposition.
    pub fn uniform(configs: Vec<MassConfiguration>) -> Result<Self> {
        let w = 1.0 / configs.len().max(1) as f64;
        Self::new(configs.into_iter().map(|config| Branch { weight: w, config }).collect())
    }

    pub fn two_branch(first: MassConfiguration, second: MassConfiguration) -> Self {
        Self {
            branches: vec![
                Branch {
                    weight: 0.5,
                    config: first,
                },
                Branch {
                    weight: 0.5,
                    config: second,
                },
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.weight).collect()
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            branches: self
                .branches
                .iter()
                .map(|b| Branch {
                    weight: b.weight,
                    config: b.config.translated(offset),
                })
                .collect(),
        }
    }

    /// Per-branch potentials at `x`.
    pub fn potentials_at(&self, x: Vec3) -> Result<Vec<f64>> {
        self.branches.iter().map(|b| potential_at(&b.config, x)).collect()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Φ_n(x) - Φ_m(x).
pub fn delta_phi(state: &SuperpositionState, n: usize, m: usize, x: Vec3) -> Result<f64> {
    let branch = |i: usize| {
        state
            .branches
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("branch index {i} out of range ({})", state.len())))
    };
    let (a, b) = (branch(n)?, branch(m)?);
    Ok(potential_at(&a.config, x)? - potential_at(&b.config, x)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: f64 = CODATA_2018.g;

    fn unit_ball() -> Body {
        Body::ball(1.0, 1.0, Vec3::ZERO).unwrap()
    }

    #[test]
    fn ball_exterior_matches_point_mass() {
        let phi = unit_ball().potential_at(Vec3::new(2.0, 0.0, 0.0)).unwrap();
        assert_eq!(phi, -G / 2.0);
    }

    #[test]
    fn ball_center_value() {
        let phi = unit_ball().potential_at(Vec3::ZERO).unwrap();
        assert!((phi + 1.5 * G).abs() < 1e-15 * G);
    }

    #[test]
    fn ball_continuous_at_surface() {
        let gm = 3.0;
        let inside = uniform_ball_potential(gm, 2.0, 2.0 * (1.0 - 1e-15));
        let outside = uniform_ball_potential(gm, 2.0, 2.0);
        assert!(((inside - outside) / outside).abs() < 1e-12);
    }

    #[test]
    fn point_mass_singularity_names_body() {
        let cfg = MassConfiguration::new(vec![
            Body::ball(1.0, 0.5, Vec3::new(5.0, 0.0, 0.0)).unwrap(),
            Body::point(1.0, Vec3::ZERO).unwrap(),
        ])
        .unwrap();
        match potential_at(&cfg, Vec3::ZERO) {
            Err(Error::Singularity { body, .. }) => assert_eq!(body, 1),
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn box_far_field() {
        let cube = Body::cube(1.0, 1.0, Vec3::ZERO).unwrap();
        let x = Vec3::new(100.0, 0.0, 0.0);
        let phi = cube.potential_at(x).unwrap();
        let point = -G / 100.0;
        assert!(((phi - point) / point).abs() < 1e-4, "{phi} vs {point}");
    }

    #[test]
    fn cube_center_potential() {
        // ∫ dV / r over the unit cube about its centre, from an independent
        // high-precision evaluation: 2.3800773639795535...
        let cube = Body::cube(1.0, 1.0, Vec3::ZERO).unwrap();
        let phi = cube.potential_at(Vec3::ZERO).unwrap();
        let expected = -G * 2.380_077_363_979_553_5;
        assert!(((phi - expected) / expected).abs() < 1e-7, "{phi} vs {expected}");
    }

    #[test]
    fn cylinder_far_field_and_axis_point() {
        let cyl = Body::cylinder(2.0, 0.1, 0.4, Vec3::ZERO, Vec3::Z).unwrap();
        let x = Vec3::new(0.0, 0.0, 40.0);
        let phi = cyl.potential_at(x).unwrap();
        assert!(((phi + 2.0 * G / 40.0) / (2.0 * G / 40.0)).abs() < 1e-3);
        // Centre of a cylinder: closed form from on-axis disk integration,
        // 2πGρ[ h√(R²+h²) - h² + R² ln((h+√(R²+h²))/R) ] with h = L/2.
        let (r, h) = (0.1f64, 0.2f64);
        let rho = 2.0 / (std::f64::consts::PI * r * r * 0.4);
        let s = (r * r + h * h).sqrt();
        let expected = -2.0 * std::f64::consts::PI * G * rho * (h * s - h * h + r * r * ((h + s) / r).ln());
        let center = cyl.potential_at(Vec3::ZERO).unwrap();
        assert!(((center - expected) / expected).abs() < 1e-7, "{center} vs {expected}");
    }

    #[test]
    fn line_integral_example() {
        let ball = Body::ball(1.0, 1e-6, Vec3::ZERO).unwrap();
        let v = line_integral_phi(&ball, 1.0).unwrap();
        let expected = 2.0 * G * ((2e-6f64).ln() - 4.0 / 3.0);
        assert!((v - expected).abs() < 1e-15 * expected.abs());
        assert!((v + 1.930e-9).abs() < 1e-12);
    }

    #[test]
    fn line_integral_zero_mass_and_geometry_error() {
        let ball = Body::ball(0.0, 0.1, Vec3::ZERO).unwrap();
        assert_eq!(line_integral_phi(&ball, 1.0).unwrap(), 0.0);
        let big = Body::ball(1.0, 0.5, Vec3::ZERO).unwrap();
        assert!(matches!(line_integral_phi(&big, 1.0), Err(Error::Geometry(_))));
        let point = Body::point(1.0, Vec3::ZERO).unwrap();
        assert!(line_integral_phi(&point, 1.0).is_err());
    }

    #[test]
    fn delta_phi_worked_example() {
        let m = 1e-15;
        let state = SuperpositionState::two_branch(
            MassConfiguration::single(Body::point(m, Vec3::ZERO).unwrap()),
            MassConfiguration::single(Body::point(m, Vec3::new(-1e-6, 0.0, 0.0)).unwrap()),
        );
        let x = Vec3::new(10e-6, 0.0, 0.0);
        let d = delta_phi(&state, 1, 0, x).unwrap();
        // Direct evaluation: GM(1/(10 µm) - 1/(11 µm)).
        let expected = G * m * (1.0 / 10e-6 - 1.0 / 11e-6);
        assert!((d - expected).abs() < 1e-12 * expected);
        assert!((d - 6.07e-22).abs() < 0.01e-22);
        assert_eq!(delta_phi(&state, 0, 1, x).unwrap(), -d);
        assert_eq!(delta_phi(&state, 0, 0, x).unwrap(), 0.0);
        assert!(delta_phi(&state, 0, 2, x).is_err());
    }

    #[test]
    fn state_validation() {
        let cfg = MassConfiguration::single(unit_ball());
        assert!(SuperpositionState::new(vec![]).is_err());
        assert!(SuperpositionState::new(vec![Branch { weight: 0.7, config: cfg.clone() }]).is_err());
        assert!(SuperpositionState::new(vec![
            Branch { weight: 1.5, config: cfg.clone() },
            Branch { weight: -0.5, config: cfg.clone() },
        ])
        .is_err());
        assert!(SuperpositionState::uniform(vec![cfg.clone(), cfg.clone(), cfg]).is_ok());
    }

    #[test]
    fn point_inside_ball_is_rejected() {
        let r = MassConfiguration::new(vec![unit_ball(), Body::point(1.0, Vec3::new(0.5, 0.0, 0.0)).unwrap()]);
        assert!(matches!(r, Err(Error::Geometry(_))));
        let overlapping_balls = MassConfiguration::new(vec![unit_ball(), unit_ball()]);
        assert!(overlapping_balls.is_ok());
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            [[branches]]
            weight = 0.25
            [[branches.bodies]]
            shape = "uniform_ball"
            radius = 1e-6
            mass = 1e-15
            center = [0.0, 0.0, 0.0]

            [[branches]]
            weight = 0.75
            [[branches.bodies]]
            shape = "cylinder"
            radius = 1e-3
            length = 1e-2
            mass = 2.0
            center = [1.0, 0.0, 0.0]
            [[branches.bodies]]
            shape = "point"
            mass = 1.0
            center = [0.0, 5.0, 0.0]
        "#;
        let state = SuperpositionState::from_toml_str(text).unwrap();
        assert_eq!(state.len(), 2);
        assert_eq!(state.branches[1].config.bodies.len(), 2);
        let again = SuperpositionState::from_toml_str(&toml::to_string(&state).unwrap()).unwrap();
        assert_eq!(state, again);
        let bad = text.replace("0.75", "0.5");
        assert!(matches!(SuperpositionState::from_toml_str(&bad), Err(Error::Config(_))));
    }
}
