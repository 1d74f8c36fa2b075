use std::f64::consts::PI;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use dilation_core::catalog::{ordering_matches, rank_catalog, shipped_catalog, ExperimentEntry};
use dilation_core::instability::{
    tau_density, tau_density_multibranch, tau_multibranch, tau_two_branch, InstabilityResult, Integrator, ProbeDensity,
};
use dilation_core::interferometer::{
    db_to_gain, tau_vs_gain, variance_mc_settings, variance_phi, visibility, AmplifierSpec, CoaxSpec,
};
use dilation_core::lightclock::{
    coherence_horizon, pulse_train_superposed_exact, traversal_excess, Horizon, LightClockSpec, PulseShape, PulseSpec,
};
use dilation_core::potentials::{Body, MassConfiguration, SuperpositionState};
use dilation_core::verify::{run_with, VerifyOptions};
use dilation_core::{Vec3, CODATA_2018};

use crate::output::{Cell, Format, Table};
use crate::sweep::{Sweep, Usage};

pub const TOLERANCE_VAR: &str = "DILATION_QUAD_TOL";
const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Settings shared by every subcommand.
pub struct RunContext {
    pub seed: u64,
    pub config: Option<std::path::PathBuf>,
    pub sweep: Option<Sweep>,
}

/// Relative tolerance of the adaptive integrator, overridable from the
/// environment.
pub fn quadrature_tolerance() -> Result<f64> {
    match std::env::var(TOLERANCE_VAR) {
        Err(_) => Ok(DEFAULT_TOLERANCE),
        Ok(text) => match text.trim().parse::<f64>() {
            Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
            _ => Err(Usage(format!("{TOLERANCE_VAR} must be a number in (0, 1), got `{text}`")).into()),
        },
    }
}

fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).map_err(|e| anyhow!("malformed config {}: {}", path.display(), e.to_string().trim_end()))
}

fn load_or<T: DeserializeOwned + Default>(ctx: &RunContext) -> Result<T> {
    match &ctx.config {
        Some(path) => load(path),
        None => Ok(T::default()),
    }
}

fn no_sweep(ctx: &RunContext, command: &str) -> Result<()> {
    if ctx.sweep.is_some() {
        return Err(Usage(format!("`{command}` does not take --sweep")).into());
    }
    Ok(())
}

/// Evaluates `f` at every sweep point in parallel, keeping sweep order.
fn sweep_rows<F>(sweep: &Sweep, f: F) -> Result<Vec<Vec<Cell>>>
where
    F: Fn(f64) -> Result<Vec<Cell>> + Sync,
{
    sweep
        .values()
        .par_iter()
        .map(|&v| f(v).with_context(|| format!("at {} = {v}", sweep.name)))
        .collect()
}

pub fn constants(ctx: &RunContext) -> Result<Table> {
    no_sweep(ctx, "constants")?;
    let mut t = Table::new(&["name", "value", "unit"]);
    for (name, value, unit) in CODATA_2018.table() {
        t.push(vec![name.into(), value.into(), unit.into()]);
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LightClockConfig {
    pub length: f64,
    pub mass: f64,
    pub radius_a: f64,
    pub radius_b: f64,
    pub transmissivity: f64,
    pub pulse: PulseSpec,
    pub n_max: usize,
    pub samples_per_width: usize,
}

impl Default for LightClockConfig {
    fn default() -> Self {
        Self {
            length: 0.03,
            mass: 1e-12,
            radius_a: 0.95e-6,
            radius_b: 1e-6,
            transmissivity: 0.1,
            pulse: PulseSpec::gaussian(1e12),
            n_max: 3,
            samples_per_width: 8,
        }
    }
}

impl LightClockConfig {
    fn spec(&self) -> Result<LightClockSpec> {
        Ok(LightClockSpec::new(
            self.length,
            self.mass,
            self.radius_a,
            self.radius_b,
            self.transmissivity,
            self.pulse,
        )?)
    }

    fn set(&mut self, name: &str, value: f64) {
        match name {
            "mass" => self.mass = value,
            "radius_a" => self.radius_a = value,
            "radius_b" => self.radius_b = value,
            "length" => self.length = value,
            "transmissivity" => self.transmissivity = value,
            "bandwidth" => {
                self.pulse.shape = match self.pulse.shape {
                    PulseShape::Gaussian { .. } => PulseShape::Gaussian { bandwidth: value },
                    PulseShape::RaisedCosine { .. } => PulseShape::RaisedCosine { bandwidth: value },
                }
            }
            _ => unreachable!("sweep parameter checked before use"),
        }
    }
}

const LIGHTCLOCK_SWEEP: [(&str, &str); 6] = [
    ("mass", "kg"),
    ("radius_a", "m"),
    ("radius_b", "m"),
    ("length", "m"),
    ("transmissivity", ""),
    ("bandwidth", "rad_s"),
];

fn lightclock_summary(config: &LightClockConfig) -> Result<Vec<Cell>> {
    let spec = config.spec()?;
    let (dtbar, half_diff) = spec.mean_and_half_difference()?;
    let horizon = match coherence_horizon(spec.pulse.bandwidth(), half_diff, dtbar) {
        Horizon::Finite(t) => t,
        Horizon::NoHorizon => f64::INFINITY,
    };
    Ok(vec![
        dtbar.into(),
        traversal_excess(&spec, spec.radius_a)?.into(),
        (2.0 * half_diff).into(),
        horizon.into(),
    ])
}

pub fn lightclock(ctx: &RunContext, summary: bool) -> Result<Table> {
    let base: LightClockConfig = load_or(ctx)?;
    let columns = ["dtbar_s", "traversal_excess_s", "superposition_delay_s", "horizon_s"];
    if let Some(sweep) = &ctx.sweep {
        let label = sweep.require(&LIGHTCLOCK_SWEEP)?;
        let mut header = vec![label.as_str()];
        header.extend(columns);
        let mut t = Table::new(&header);
        t.rows = sweep_rows(sweep, |v| {
            let mut c = base.clone();
            c.set(&sweep.name, v);
            let mut row = vec![Cell::Num(v)];
            row.extend(lightclock_summary(&c)?);
            Ok(row)
        })?;
        return Ok(t);
    }
    if summary {
        let mut t = Table::new(&columns);
        t.push(lightclock_summary(&base)?);
        return Ok(t);
    }
    let spec = base.spec()?;
    let train = pulse_train_superposed_exact(&spec, base.n_max)?;
    let pad = 6.0 / spec.pulse.bandwidth();
    let mut windows: Vec<(f64, f64)> = train
        .orders
        .iter()
        .map(|o| {
            let half = o.n as f64 * o.spacing + pad;
            (spec.pulse.center_time + o.delay - half, spec.pulse.center_time + o.delay + half)
        })
        .collect();
    windows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for w in windows {
        match merged.last_mut() {
            Some(last) if w.0 <= last.1 => last.1 = last.1.max(w.1),
            _ => merged.push(w),
        }
    }
    let mut t = Table::new(&["time_s", "re", "im", "modulus"]);
    for (start, end) in merged {
        for (time, v) in train.synthesize(&spec.pulse, start, end, base.samples_per_width) {
            t.push(vec![time.into(), v.re.into(), v.im.into(), v.norm().into()]);
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstabilityConfig {
    pub superposition: SuperpositionState,
    pub probe: ProbeDensity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<Integrator>,
}

impl Default for InstabilityConfig {
    fn default() -> Self {
        let point = |x: f64| MassConfiguration::single(Body::point(1e-15, Vec3::new(x, 0.0, 0.0)).expect("valid point mass"));
        Self {
            superposition: SuperpositionState::two_branch(point(0.0), point(-1e-6)),
            probe: ProbeDensity::point(1e-16, Vec3::new(1e-5, 0.0, 0.0)),
            integrator: None,
        }
    }
}

fn probe_anchor(probe: &ProbeDensity) -> Vec3 {
    match *probe {
        ProbeDensity::Point { position, .. } => position,
        ProbeDensity::Slab { center, .. } | ProbeDensity::Cylinder { center, .. } | ProbeDensity::Ball { center, .. } => {
            center
        }
    }
}

fn with_probe_mass(probe: &ProbeDensity, mass: f64) -> ProbeDensity {
    let scale = mass / probe.total_mass();
    let mut out = *probe;
    match &mut out {
        ProbeDensity::Point { mass: m, .. } => *m = mass,
        ProbeDensity::Slab { density, .. } | ProbeDensity::Cylinder { density, .. } | ProbeDensity::Ball { density, .. } => {
            *density *= scale
        }
    }
    out
}

impl InstabilityConfig {
    fn evaluate(&self, seed: u64) -> Result<InstabilityResult> {
        self.probe.validate()?;
        let integrator = match self.integrator {
            None => Integrator::adaptive(quadrature_tolerance()?),
            Some(Integrator::MonteCarlo(mut mc)) => {
                mc.seed = seed;
                Integrator::MonteCarlo(mc)
            }
            Some(other) => other,
        };
        let two = self.superposition.len() == 2;
        Ok(match self.probe {
            ProbeDensity::Point { mass, position } if two => tau_two_branch(mass, &self.superposition, position)?,
            ProbeDensity::Point { mass, position } => tau_multibranch(&self.superposition, mass, position)?,
            _ if two => tau_density(&self.probe, &self.superposition, integrator)?,
            _ => tau_density_multibranch(&self.probe, &self.superposition, integrator)?,
        })
    }

    fn row(&self, seed: u64) -> Result<Vec<Cell>> {
        let record = self.evaluate(seed)?.record(self);
        Ok(vec![
            record.formula.into(),
            record.tau_s.unwrap_or(f64::INFINITY).into(),
            record.denominator_j.into(),
            record.quadrature_error.into(),
            record.inputs_digest.into(),
        ])
    }
}

const INSTABILITY_SWEEP: [(&str, &str); 2] = [("probe_mass", "kg"), ("probe_x", "m")];

pub fn instability(ctx: &RunContext) -> Result<Table> {
    let base: InstabilityConfig = load_or(ctx)?;
    let columns = ["formula", "tau_s", "denominator_J", "quadrature_error", "inputs_digest"];
    let Some(sweep) = &ctx.sweep else {
        let mut t = Table::new(&columns);
        t.push(base.row(ctx.seed)?);
        return Ok(t);
    };
    let label = sweep.require(&INSTABILITY_SWEEP)?;
    let mut header = vec![label.as_str()];
    header.extend(columns);
    let mut t = Table::new(&header);
    t.rows = sweep_rows(sweep, |v| {
        let mut c = base.clone();
        c.probe = match sweep.name.as_str() {
            "probe_mass" => with_probe_mass(&c.probe, v),
            _ => c.probe.translated(Vec3::new(v - probe_anchor(&c.probe).x, 0.0, 0.0)),
        };
        let mut row = vec![Cell::Num(v)];
        row.extend(c.row(ctx.seed)?);
        Ok(row)
    })?;
    Ok(t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferometerConfig {
    pub gain_db: f64,
    /// B_ph, rad/s.
    pub photon_bandwidth: f64,
    /// B_a, rad/s.
    pub amp_bandwidth: f64,
    pub theta: f64,
    pub coax: CoaxSpec,
    /// Runs the variance Monte Carlo with this many samples when set.
    pub monte_carlo_samples: Option<usize>,
}

impl Default for InterferometerConfig {
    fn default() -> Self {
        Self {
            gain_db: 200.0,
            photon_bandwidth: 2.0 * PI * 1e7,
            amp_bandwidth: 2.0 * PI * 300.0,
            theta: 0.0,
            coax: CoaxSpec::default(),
            monte_carlo_samples: None,
        }
    }
}

impl InterferometerConfig {
    fn check(&self) -> Result<()> {
        for (name, v) in [("photon_bandwidth", self.photon_bandwidth), ("amp_bandwidth", self.amp_bandwidth)] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be > 0, got {v}");
            }
        }
        Ok(())
    }
}

pub fn interferometer(ctx: &RunContext) -> Result<Table> {
    let base: InterferometerConfig = load_or(ctx)?;
    base.check()?;
    if let Some(sweep) = &ctx.sweep {
        sweep.require(&[("gain_db", "dB")])?;
        let mut t = Table::new(&["gain_dB", "visibility", "tau_s"]);
        t.rows = sweep_rows(sweep, |db| {
            let gain = db_to_gain(db);
            let tau = tau_vs_gain(gain, &base.coax)?.tau.as_f64();
            Ok(vec![db.into(), visibility(base.photon_bandwidth, base.amp_bandwidth, gain).into(), tau.into()])
        })?;
        return Ok(t);
    }
    let gain = db_to_gain(base.gain_db);
    let amp = AmplifierSpec::new(gain, base.theta, base.amp_bandwidth)?;
    let mc = base.monte_carlo_samples.map(|n| variance_mc_settings(n, ctx.seed));
    let report = variance_phi(&amp, &base.coax, mc)?;
    let mut t = Table::new(&[
        "gain_dB",
        "gain",
        "visibility",
        "tau_s",
        "variance_closed_form_J2_kg2",
        "variance_exact_moments_J2_kg2",
        "variance_monte_carlo_J2_kg2",
        "variance_monte_carlo_error_J2_kg2",
    ]);
    t.push(vec![
        base.gain_db.into(),
        gain.into(),
        visibility(base.photon_bandwidth, base.amp_bandwidth, gain).into(),
        tau_vs_gain(gain, &base.coax)?.tau.as_f64().into(),
        report.closed_form.into(),
        report.exact_moments.into(),
        report.monte_carlo.into(),
        report.monte_carlo_std_error.into(),
    ]);
    Ok(t)
}

/// Factor within which a computed τ counts as reproducing its reference.
const COMPARABLE_WITHIN: f64 = 10.0;

fn catalog_entries(path: &Path) -> Result<Vec<ExperimentEntry>> {
    let files = if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .with_context(|| format!("cannot list {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    files
        .iter()
        .map(|f| {
            let text = std::fs::read_to_string(f).with_context(|| format!("cannot read {}", f.display()))?;
            ExperimentEntry::from_toml_str(&text).map_err(|e| anyhow!("malformed catalog entry {}: {e}", f.display()))
        })
        .collect()
}

pub fn catalog(ctx: &RunContext) -> Result<Table> {
    no_sweep(ctx, "catalog")?;
    let entries = match &ctx.config {
        Some(path) => catalog_entries(path)?,
        None => shipped_catalog()?,
    };
    let rows = rank_catalog(&entries, Integrator::adaptive(quadrature_tolerance()?))?;
    let mut t = Table::new(&[
        "rank",
        "name",
        "tau_s",
        "table_tau_s",
        "ratio",
        "flight_time_s",
        "verdict",
        "quadrature_error",
    ]);
    for (i, r) in rows.iter().enumerate() {
        t.push(vec![
            Cell::Int(i as i64 + 1),
            r.name.as_str().into(),
            r.result.tau.as_f64().into(),
            r.table_tau.into(),
            r.ratio.into(),
            r.flight_time.into(),
            r.verdict.label().into(),
            r.result.quadrature_error.into(),
        ]);
    }
    let ordered = ordering_matches(&rows, COMPARABLE_WITHIN);
    t.footer.push(format!(
        "ordering of entries within a factor {COMPARABLE_WITHIN} of their reference: {}",
        if ordered { "matches" } else { "differs" }
    ));
    Ok(t)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    mc_samples: Option<usize>,
}

/// Runs every oracle check; returns the rendered report and whether all
/// checks passed.
pub fn verify(ctx: &RunContext, format: Format) -> Result<(String, bool)> {
    no_sweep(ctx, "verify")?;
    let config: VerifyConfig = load_or(ctx)?;
    let mut options = VerifyOptions {
        seed: ctx.seed,
        ..VerifyOptions::default()
    };
    if let Some(n) = config.mc_samples {
        options.mc_samples = n;
    }
    let report = run_with(options);
    let text = match format {
        Format::Table => report.to_text(),
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    };
    Ok((text, report.passed()))
}
