//! Monte Carlo and exact-enumeration engine for the error thresholds of the
//! X-cube fracton code.
//!
//! Bit-flip and phase-flip error classes of the code map to two disordered
//! classical spin models, the random plaquette Ising model ([`models::RpiModel`])
//! and the random anisotropically coupled Ashkin-Teller model
//! ([`models::RacatModel`]). Their ordering transitions along the Nishimori
//! line locate the code thresholds.

pub mod analysis;
pub mod code;
pub mod ensemble;
pub mod error;
pub mod gf2;
pub mod lattice;
pub mod mc;
pub mod models;
pub mod num;
pub mod observables;
pub mod oracle;

pub use error::{Error, Result};
pub use num::Real;

/// Temperature grid in double precision.
pub type Grid = mc::TemperatureGrid<f64>;
/// Parallel-tempering ensemble of the plaquette model.
pub type RpiEnsemble = mc::PtEnsemble<models::RpiState, f64>;
/// Parallel-tempering ensemble of the Ashkin-Teller model.
pub type RacatEnsemble = mc::PtEnsemble<models::RacatState, f64>;
pub type SizeCurve = analysis::Curve<f64>;
pub type Estimate = ensemble::BootstrapEstimate<f64>;
pub type Xi = observables::XiEstimate<f64>;
