//! Declarative experiment entries and the batch ranking of their
//! instability times.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instability::{tau_density, tau_density_multibranch, InstabilityResult, Integrator, ProbeDensity, Timescale};
use crate::interferometer::{db_to_gain, tau_vs_gain, CoaxSpec};
use crate::potentials::SuperpositionState;

/// How an entry's timescale is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryModel {
    /// Superposed masses probed by an apparatus mass density.
    Geometry {
        superposition: SuperpositionState,
        probe: ProbeDensity,
    },
    /// Amplified single photon in the microwave Mach–Zehnder interferometer.
    MicrowaveInterferometer {
        gain_db: f64,
        #[serde(default)]
        coax: CoaxSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentEntry {
    pub name: String,
    #[serde(flatten)]
    pub model: EntryModel,
    /// Coherence duration of the experiment, s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flight_time: Option<f64>,
    /// Reference value the entry is compared against, s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_tau: Option<f64>,
    /// Which parameters are measured and which are assumed.
    #[serde(default)]
    pub provenance_notes: String,
}

impl ExperimentEntry {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.table_tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("{}: table_tau must be > 0", self.name)));
            }
        }
        if let Some(t) = self.flight_time {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("{}: flight_time must be > 0", self.name)));
            }
        }
        if self.provenance_notes.trim().is_empty() {
            return Err(Error::Config(format!("{}: provenance_notes must not be empty", self.name)));
        }
        if let EntryModel::Geometry { probe, .. } = &self.model {
            probe.validate()?;
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let entry: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        entry.validate()?;
        Ok(entry)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Entry files shipped with the library, in table order.
const SHIPPED: [&str; 9] = [
    include_str!("../catalog/buckyball.toml"),
    include_str!("../catalog/sodium.toml"),
    include_str!("../catalog/pfns8.toml"),
    include_str!("../catalog/nanosphere.toml"),
    include_str!("../catalog/neutron.toml"),
    include_str!("../catalog/otima.toml"),
    include_str!("../catalog/membrane.toml"),
    include_str!("../catalog/micromirror.toml"),
    include_str!("../catalog/microwave_mz.toml"),
];

pub fn shipped_catalog() -> Result<Vec<ExperimentEntry>> {
    SHIPPED.iter().map(|text| ExperimentEntry::from_toml_str(text)).collect()
}

/// Timescale of one entry.
pub fn compute_entry(entry: &ExperimentEntry, integrator: Integrator) -> Result<InstabilityResult> {
    match &entry.model {
        EntryModel::Geometry { superposition, probe } => {
            if superposition.len() == 2 {
                tau_density(probe, superposition, integrator)
            } else {
                tau_density_multibranch(probe, superposition, integrator)
            }
        }
        EntryModel::MicrowaveInterferometer { gain_db, coax } => tau_vs_gain(db_to_gain(*gain_db), coax),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// τ exceeds the flight time.
    StableDuringFlight,
    /// τ is at most the flight time.
    UnstableDuringFlight,
    NoFlightTime,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::StableDuringFlight => "stable during flight",
            Verdict::UnstableDuringFlight => "unstable during flight",
            Verdict::NoFlightTime => "n/a",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogRow {
    pub name: String,
    pub result: InstabilityResult,
    pub table_tau: Option<f64>,
    /// Computed τ divided by the reference value.
    pub ratio: Option<f64>,
    pub flight_time: Option<f64>,
    pub verdict: Verdict,
}

/// Computes every entry and sorts by τ, longest first.
pub fn rank_catalog(entries: &[ExperimentEntry], integrator: Integrator) -> Result<Vec<CatalogRow>> {
    if entries.is_empty() {
        return Err(Error::InvalidInput("catalog is empty".into()));
    }
    let results: Vec<Result<InstabilityResult>> = entries.par_iter().map(|e| compute_entry(e, integrator)).collect();
    let mut rows = Vec::with_capacity(entries.len());
    for (entry, result) in entries.iter().zip(results) {
        let result = result?;
        let ratio = match (result.tau, entry.table_tau) {
            (Timescale::Finite(t), Some(table)) => Some(t / table),
            _ => None,
        };
        let verdict = match entry.flight_time {
            None => Verdict::NoFlightTime,
            Some(flight) if result.tau.as_f64() > flight => Verdict::StableDuringFlight,
            Some(_) => Verdict::UnstableDuringFlight,
        };
        rows.push(CatalogRow {
            name: entry.name.clone(),
            result,
            table_tau: entry.table_tau,
            ratio,
            flight_time: entry.flight_time,
            verdict,
        });
    }
    rows.sort_by(|a, b| b.result.tau.as_f64().total_cmp(&a.result.tau.as_f64()));
    Ok(rows)
}

/// Rows whose computed τ lies within a factor `within` of the reference.
pub fn comparable_rows(rows: &[CatalogRow], within: f64) -> Vec<&CatalogRow> {
    rows.iter()
        .filter(|r| r.ratio.is_some_and(|q| q >= 1.0 / within && q <= within))
        .collect()
}

/// Whether the comparable rows appear in the same order by computed τ as by
/// reference τ.
pub fn ordering_matches(rows: &[CatalogRow], within: f64) -> bool {
    let kept = comparable_rows(rows, within);
    kept.windows(2).all(|w| {
        let (a, b) = (w[0], w[1]);
        a.table_tau.unwrap_or(f64::NAN) >= b.table_tau.unwrap_or(f64::NAN)
    })
}
