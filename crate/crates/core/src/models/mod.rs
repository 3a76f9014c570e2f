//! The two disordered classical spin models obtained from the X-cube code:
//! the random plaquette Ising (RPI) model for bit-flip classes and the random
//! anisotropically coupled Ashkin-Teller (RACAT) model for phase-flip classes.

mod disorder;
mod racat;
mod rpi;

use std::fmt::Debug;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use disorder::{Disorder, DisorderSource};
pub use racat::{energy_racat, local_field_racat, RacatModel, RacatState};
pub use rpi::{energy_rpi, gauge_transform, local_field_rpi, RpiModel, RpiState};

use crate::lattice::{Axis, Lattice};

/// Which Hamiltonian a run samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rpi,
    Racat,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rpi => "rpi",
            ModelKind::Racat => "racat",
        }
    }

    /// Error species whose equivalence classes the model describes.
    pub fn species(self) -> crate::code::Pauli {
        match self {
            ModelKind::Rpi => crate::code::Pauli::X,
            ModelKind::Racat => crate::code::Pauli::Z,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rpi" => Ok(ModelKind::Rpi),
            "racat" => Ok(ModelKind::Racat),
            other => Err(format!("unknown model `{other}` (expected rpi or racat)")),
        }
    }
}

/// A plane of spins that can be flipped without changing the energy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlaneSpec {
    /// Axis normal to the plane.
    pub normal: Axis,
    /// Coordinate of the plane along `normal`.
    pub coord: usize,
}

/// Ising spin system with integer couplings and single-site updates.
///
/// Sites are numbered `0..n_sites()` in the scan order used by the sweeps.
/// Flipping site `i` changes the energy by `2 * spin(i) * local_field(i)`.
pub trait SpinModel: Sync {
    type State: Clone + Debug + PartialEq + Send + Sync + Serialize + DeserializeOwned;

    fn kind(&self) -> ModelKind;
    fn lattice(&self) -> &Lattice;
    fn disorder(&self) -> &Disorder;
    fn n_sites(&self) -> usize;
    /// Upper bound on `|local_field|`.
    fn max_field(&self) -> i32;

    fn energy(&self, state: &Self::State) -> i64;
    fn local_field(&self, state: &Self::State, site: usize) -> i32;
    fn spin(&self, state: &Self::State, site: usize) -> i8;
    fn flip(&self, state: &mut Self::State, site: usize);

    fn uniform_state(&self) -> Self::State;
    fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
    /// Applies a subsystem-symmetry flip.
    fn plane_flip(&self, state: &mut Self::State, plane: PlaneSpec) -> crate::Result<()>;
}

pub(crate) fn random_spins<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<i8> {
    (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()
}

pub(crate) fn check_plane(lattice: &Lattice, plane: PlaneSpec) -> crate::Result<()> {
    if plane.coord >= lattice.size() {
        return Err(crate::Error::OutOfRange {
            name: "plane.coord",
            detail: format!("{} >= L = {}", plane.coord, lattice.size()),
        });
    }
    Ok(())
}
