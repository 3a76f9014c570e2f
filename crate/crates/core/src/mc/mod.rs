//! Sampling kernels: heat bath, zero-field over-relaxation and parallel
//! tempering over a temperature grid.

mod grid;
mod kernels;
mod pt;

pub use grid::{GridScheme, TemperatureGrid};
pub use kernels::{heat_bath_sweep, overrelaxation_sweep, swap_acceptance, up_probability, HeatBathTable};
pub use pt::{PtEnsemble, PtSnapshot, Replica, SweepConfig};
