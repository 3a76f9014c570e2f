//! Measured quantities: energy statistics, plane-flip invariant order
//! parameters, correlators and their Fourier modes, the second-moment
//! correlation length, spin-glass correlators and energy histograms.

mod estimators;
mod histogram;
mod order;

pub use estimators::{
    connected_variance, specific_heat, susceptibility, xi_second_moment, SgAccumulator, XiEstimate,
};
pub use histogram::{Bimodality, EnergyCounts, Histogram};
pub use order::{
    correlator_ga, correlator_gb, fourier_1d, fourier_2d, q_a, q_b, structure_factors_a, structure_factors_b,
    z_bonds, CorrelatorShape, Measurable,
};
