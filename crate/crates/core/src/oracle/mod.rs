//! Exact enumeration at tiny sizes: partition functions, thermal averages,
//! class probabilities and the identities tying them together.

mod enumerate;
mod identities;

pub use enumerate::{
    density_of_states, disorder_mask, exact_partition_racat, exact_partition_rpi, BondTerms, DensityOfStates,
    ExactResult, StateTable, MAX_DOS_SITES, MAX_TABLE_SITES,
};
pub use identities::{
    class_ratio_exhaustive, class_ratio_sampled, dual_temperature, free_energy_class_ratio, kramers_wannier_periodic,
    nishimori_beta, nishimori_identity_check, ClassRatioReport, NishimoriReport,
};
