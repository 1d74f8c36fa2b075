//! CODATA-2018 physical constants in SI units.
//!
//! Every formula in the crate reads its constants from [`CODATA_2018`] (or an
//! explicitly passed [`PhysicalConstants`]); tests compare against the same
//! table.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Newtonian gravitational constant, m³ kg⁻¹ s⁻².
    pub g: f64,
    /// Speed of light in vacuum, m/s.
    pub c: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Vacuum permittivity, F/m.
    pub eps0: f64,
    /// Electron mass, kg.
    pub m_e: f64,
    /// Elementary charge magnitude, C.
    pub q_e: f64,
}

pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
    g: 6.674_30e-11,
    c: 299_792_458.0,
    hbar: 1.054_571_817e-34,
    eps0: 8.854_187_812_8e-12,
    m_e: 9.109_383_701_5e-31,
    q_e: 1.602_176_634e-19,
};

impl Default for PhysicalConstants {
    fn default() -> Self {
        CODATA_2018
    }
}

impl PhysicalConstants {
    /// `(name, value, unit)` rows, in a fixed order, for introspection.
    pub fn table(&self) -> [(&'static str, f64, &'static str); 6] {
        [
            ("G", self.g, "m^3 kg^-1 s^-2"),
            ("c", self.c, "m s^-1"),
            ("hbar", self.hbar, "J s"),
            ("eps0", self.eps0, "F m^-1"),
            ("m_e", self.m_e, "kg"),
            ("q_e", self.q_e, "C"),
        ]
    }

    pub fn all_positive(&self) -> bool {
        self.table().iter().all(|(_, v, _)| *v > 0.0 && v.is_finite())
    }
}
