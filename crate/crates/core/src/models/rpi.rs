use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_plane, random_spins, Disorder, ModelKind, PlaneSpec, SpinModel};
use crate::error::{Error, Result};
use crate::lattice::{CubeId, Lattice};

/// One Ising spin per cube (dual-lattice site).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RpiState {
    pub spins: Vec<i8>,
}

impl RpiState {
    pub fn uniform(lattice: &Lattice) -> Self {
        Self {
            spins: vec![1; lattice.n_cubes()],
        }
    }

    /// Spins `(-1)^f(c)` of a cube-generator configuration.
    pub fn from_bits(bits: &crate::gf2::BitVec) -> Self {
        Self {
            spins: (0..bits.len()).map(|c| if bits.get(c) { -1 } else { 1 }).collect(),
        }
    }
}

/// Random plaquette Ising model
/// `H = -sum_l tau_l prod_{c in cubes(l)} S_c`.
#[derive(Clone, Debug)]
pub struct RpiModel {
    lattice: Arc<Lattice>,
    disorder: Arc<Disorder>,
    // for cube c and its k-th edge: the three other cubes sharing that edge
    partners: Vec<[[u32; 3]; 12]>,
}

impl RpiModel {
    pub fn new(lattice: Arc<Lattice>, disorder: Arc<Disorder>) -> Result<Self> {
        disorder.check_lattice(&lattice)?;
        let partners = (0..lattice.n_cubes())
            .map(|c| {
                let edges = lattice.cube_edge_table()[c];
                edges.map(|e| {
                    let mut out = [0u32; 3];
                    let mut k = 0;
                    for &other in &lattice.edge_cube_table()[e as usize] {
                        if other as usize != c {
                            out[k] = other;
                            k += 1;
                        }
                    }
                    debug_assert_eq!(k, 3);
                    out
                })
            })
            .collect();
        Ok(Self {
            lattice,
            disorder,
            partners,
        })
    }

    pub fn lattice_arc(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    fn check_state(&self, state: &RpiState) -> Result<()> {
        if state.spins.len() != self.lattice.n_cubes() {
            return Err(Error::DimensionMismatch {
                expected: self.lattice.n_cubes(),
                actual: state.spins.len(),
            });
        }
        Ok(())
    }
}

impl SpinModel for RpiModel {
    type State = RpiState;

    fn kind(&self) -> ModelKind {
        ModelKind::Rpi
    }

    fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn disorder(&self) -> &Disorder {
        &self.disorder
    }

    fn n_sites(&self) -> usize {
        self.lattice.n_cubes()
    }

    fn max_field(&self) -> i32 {
        12
    }

    fn energy(&self, state: &RpiState) -> i64 {
        let s = &state.spins;
        let tau = self.disorder.couplings();
        self.lattice
            .edge_cube_table()
            .iter()
            .zip(tau)
            .map(|(cs, &t)| {
                let prod = s[cs[0] as usize] * s[cs[1] as usize] * s[cs[2] as usize] * s[cs[3] as usize];
                -(t as i64) * prod as i64
            })
            .sum()
    }

    #[inline]
    fn local_field(&self, state: &RpiState, site: usize) -> i32 {
        let s = &state.spins;
        let tau = self.disorder.couplings();
        let edges = &self.lattice.cube_edge_table()[site];
        let mut h = 0i32;
        for (k, others) in self.partners[site].iter().enumerate() {
            let t = tau[edges[k] as usize];
            h += (t * s[others[0] as usize] * s[others[1] as usize] * s[others[2] as usize]) as i32;
        }
        h
    }

    #[inline]
    fn spin(&self, state: &RpiState, site: usize) -> i8 {
        state.spins[site]
    }

    #[inline]
    fn flip(&self, state: &mut RpiState, site: usize) {
        state.spins[site] = -state.spins[site];
    }

    fn uniform_state(&self) -> RpiState {
        RpiState::uniform(&self.lattice)
    }

    fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> RpiState {
        RpiState {
            spins: random_spins(self.lattice.n_cubes(), rng),
        }
    }

    /// Flips every cube whose `normal` coordinate equals `coord`.
    fn plane_flip(&self, state: &mut RpiState, plane: PlaneSpec) -> Result<()> {
        check_plane(&self.lattice, plane)?;
        for c in 0..self.lattice.n_cubes() {
            let xyz = self.lattice.coords(c);
            let coord = [xyz.0, xyz.1, xyz.2][plane.normal.index()];
            if coord == plane.coord {
                state.spins[c] = -state.spins[c];
            }
        }
        Ok(())
    }
}

/// Total RPI energy; checks that the state and disorder match the lattice.
pub fn energy_rpi(lattice: &Lattice, state: &RpiState, disorder: &Disorder) -> Result<i64> {
    let model = RpiModel::new(Arc::new(lattice.clone()), Arc::new(disorder.clone()))?;
    model.check_state(state)?;
    Ok(model.energy(state))
}

/// Local field `h_c` acting on cube `c`.
pub fn local_field_rpi(model: &RpiModel, cube: CubeId, state: &RpiState) -> Result<i32> {
    model.check_state(state)?;
    if cube.0 >= model.n_sites() {
        return Err(Error::OutOfRange {
            name: "cube",
            detail: format!("{} >= {}", cube.0, model.n_sites()),
        });
    }
    Ok(model.local_field(state, cube.0))
}

/// `tau_l -> Gamma_l(sigma) tau_l` with `Gamma_l(sigma) = prod_{c in cubes(l)} sigma_c`.
pub fn gauge_transform(lattice: &Lattice, disorder: &Disorder, sigma: &RpiState) -> Result<Disorder> {
    disorder.check_lattice(lattice)?;
    if sigma.spins.len() != lattice.n_cubes() {
        return Err(Error::DimensionMismatch {
            expected: lattice.n_cubes(),
            actual: sigma.spins.len(),
        });
    }
    let couplings = lattice
        .edge_cube_table()
        .iter()
        .zip(disorder.couplings())
        .map(|(cs, &t)| t * cs.iter().map(|&c| sigma.spins[c as usize]).product::<i8>())
        .collect();
    Ok(disorder.with_couplings(couplings))
}
