pub mod catalog;
pub mod constants;
pub mod display;
pub mod error;
pub mod instability;
pub mod interferometer;
pub mod lightclock;
pub mod numerics;
pub mod potentials;
pub mod vec3;
pub mod verify;

pub use constants::{PhysicalConstants, CODATA_2018};
pub use error::{Error, Result};
pub use vec3::Vec3;
