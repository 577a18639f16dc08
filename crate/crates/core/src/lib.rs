//! Kibble-Zurek ramps of the 2D staggered-field XX model.
//!
//! Three backends share one model definition: [`exact`] state vectors inside
//! a magnetization sector, snake-ordered finite MPS ([`mps`]) and the infinite
//! two-sublattice iPEPS ([`ipeps`]). [`analysis`] turns their correlator
//! streams into correlation lengths and scaling collapses, and [`runner`]
//! drives configured sweeps into an on-disk record store.

pub mod analysis;
pub mod error;
pub mod exact;
pub mod ipeps;
pub mod krylov;
pub mod lattice;
pub mod model;
pub mod mps;
pub mod records;
pub mod runner;

pub use error::{Error, Result};
pub use lattice::Lattice;
pub use model::{ModelParams, RampSchedule, RampShape};
pub use records::{Backend, CorrRecord, EnergyRecord, ErrorRecord, FitRecord, RowCorrRecord};
pub use symtensor::C64;
