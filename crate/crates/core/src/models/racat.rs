use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_plane, random_spins, Disorder, ModelKind, PlaneSpec, SpinModel};
use crate::error::{Error, Result};
use crate::lattice::{Axis, Lattice, VertexId};

/// Two independent Ising spins per vertex. `S^z = S^x S^y` is derived on
/// demand. Site `2v` is `S^x_v`, site `2v + 1` is `S^y_v`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RacatState {
    pub x: Vec<i8>,
    pub y: Vec<i8>,
}

impl RacatState {
    pub fn uniform(lattice: &Lattice) -> Self {
        let n = lattice.n_vertices();
        Self {
            x: vec![1; n],
            y: vec![1; n],
        }
    }

    #[inline]
    pub fn z(&self, v: usize) -> i8 {
        self.x[v] * self.y[v]
    }

    /// Spin of flavour `axis` at vertex `v`.
    #[inline]
    pub fn component(&self, v: usize, axis: Axis) -> i8 {
        match axis {
            Axis::X => self.x[v],
            Axis::Y => self.y[v],
            Axis::Z => self.z(v),
        }
    }

    /// Spins of a vertex-generator configuration with bits ordered `2v + s`
    /// (`s = 0` for `B^x_v`, `s = 1` for `B^y_v`).
    ///
    /// The x-flavour spin reads the `B^y` bit and vice versa: an x-edge at `v`
    /// lies in `B^y_v` and `B^y_{v+x}`, so it couples the `B^y` bits along x.
    pub fn from_generator_bits(bits: &crate::gf2::BitVec) -> Self {
        let n = bits.len() / 2;
        let s = |i: usize| if bits.get(i) { -1 } else { 1 };
        Self {
            x: (0..n).map(|v| s(2 * v + 1)).collect(),
            y: (0..n).map(|v| s(2 * v)).collect(),
        }
    }
}

// neighbour slots in the table
const XP: usize = 0;
const XM: usize = 1;
const YP: usize = 2;
const YM: usize = 3;
const ZP: usize = 4;
const ZM: usize = 5;

/// Random anisotropically coupled Ashkin-Teller model
/// `H = -sum_v sum_mu tau(v; mu) S^mu_v S^mu_{v+mu}`.
#[derive(Clone, Debug)]
pub struct RacatModel {
    lattice: Arc<Lattice>,
    disorder: Arc<Disorder>,
    neighbours: Vec<[u32; 6]>,
}

impl RacatModel {
    pub fn new(lattice: Arc<Lattice>, disorder: Arc<Disorder>) -> Result<Self> {
        disorder.check_lattice(&lattice)?;
        let neighbours = (0..lattice.n_vertices())
            .map(|v| {
                let c = lattice.coords(v);
                [
                    [1, 0, 0],
                    [-1, 0, 0],
                    [0, 1, 0],
                    [0, -1, 0],
                    [0, 0, 1],
                    [0, 0, -1],
                ]
                .map(|d| lattice.shift(c, d) as u32)
            })
            .collect();
        Ok(Self {
            lattice,
            disorder,
            neighbours,
        })
    }

    pub fn lattice_arc(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    #[inline]
    fn tau(&self, v: usize, axis: usize) -> i32 {
        self.disorder.couplings()[3 * v + axis] as i32
    }

    fn check_state(&self, state: &RacatState) -> Result<()> {
        let n = self.lattice.n_vertices();
        for len in [state.x.len(), state.y.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        Ok(())
    }
}

impl SpinModel for RacatModel {
    type State = RacatState;

    fn kind(&self) -> ModelKind {
        ModelKind::Racat
    }

    fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn disorder(&self) -> &Disorder {
        &self.disorder
    }

    fn n_sites(&self) -> usize {
        2 * self.lattice.n_vertices()
    }

    fn max_field(&self) -> i32 {
        4
    }

    fn energy(&self, state: &RacatState) -> i64 {
        let mut e = 0i64;
        for (v, nb) in self.neighbours.iter().enumerate() {
            let (xp, yp, zp) = (nb[XP] as usize, nb[YP] as usize, nb[ZP] as usize);
            e -= (self.tau(v, 0) * (state.x[v] * state.x[xp]) as i32) as i64;
            e -= (self.tau(v, 1) * (state.y[v] * state.y[yp]) as i32) as i64;
            e -= (self.tau(v, 2) * (state.z(v) * state.z(zp)) as i32) as i64;
        }
        e
    }

    #[inline]
    fn local_field(&self, state: &RacatState, site: usize) -> i32 {
        let v = site >> 1;
        let nb = &self.neighbours[v];
        let (zp, zm) = (nb[ZP] as usize, nb[ZM] as usize);
        let z_part = self.tau(v, 2) * state.z(zp) as i32 + self.tau(zm, 2) * state.z(zm) as i32;
        if site & 1 == 0 {
            let (p, m) = (nb[XP] as usize, nb[XM] as usize);
            self.tau(v, 0) * state.x[p] as i32
                + self.tau(m, 0) * state.x[m] as i32
                + state.y[v] as i32 * z_part
        } else {
            let (p, m) = (nb[YP] as usize, nb[YM] as usize);
            self.tau(v, 1) * state.y[p] as i32
                + self.tau(m, 1) * state.y[m] as i32
                + state.x[v] as i32 * z_part
        }
    }

    #[inline]
    fn spin(&self, state: &RacatState, site: usize) -> i8 {
        if site & 1 == 0 {
            state.x[site >> 1]
        } else {
            state.y[site >> 1]
        }
    }

    #[inline]
    fn flip(&self, state: &mut RacatState, site: usize) {
        let s = if site & 1 == 0 {
            &mut state.x[site >> 1]
        } else {
            &mut state.y[site >> 1]
        };
        *s = -*s;
    }

    fn uniform_state(&self) -> RacatState {
        RacatState::uniform(&self.lattice)
    }

    fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> RacatState {
        let n = self.lattice.n_vertices();
        let x = random_spins(n, rng);
        let y = random_spins(n, rng);
        RacatState { x, y }
    }

    /// Flips the two in-plane flavours on the plane with the given normal:
    /// normal z flips `(S^x, S^y)`, normal y flips `(S^x, S^z)` and normal x
    /// flips `(S^y, S^z)`.
    fn plane_flip(&self, state: &mut RacatState, plane: PlaneSpec) -> Result<()> {
        check_plane(&self.lattice, plane)?;
        for v in 0..self.lattice.n_vertices() {
            let (x, y, z) = self.lattice.coords(v);
            if [x, y, z][plane.normal.index()] != plane.coord {
                continue;
            }
            match plane.normal {
                Axis::Z => {
                    state.x[v] = -state.x[v];
                    state.y[v] = -state.y[v];
                }
                Axis::Y => state.x[v] = -state.x[v],
                Axis::X => state.y[v] = -state.y[v],
            }
        }
        Ok(())
    }
}

/// Total RACAT energy; checks that the state and disorder match the lattice.
pub fn energy_racat(lattice: &Lattice, state: &RacatState, disorder: &Disorder) -> Result<i64> {
    let model = RacatModel::new(Arc::new(lattice.clone()), Arc::new(disorder.clone()))?;
    model.check_state(state)?;
    Ok(model.energy(state))
}

/// Local field on the independent spin of flavour `species` (x or y) at `v`.
pub fn local_field_racat(
    model: &RacatModel,
    v: VertexId,
    species: Axis,
    state: &RacatState,
) -> Result<i32> {
    model.check_state(state)?;
    if v.0 >= model.lattice.n_vertices() {
        return Err(Error::OutOfRange {
            name: "vertex",
            detail: format!("{} >= {}", v.0, model.lattice.n_vertices()),
        });
    }
    let site = match species {
        Axis::X => 2 * v.0,
        Axis::Y => 2 * v.0 + 1,
        Axis::Z => {
            return Err(Error::Invalid(
                "S^z is composite; fields exist only for the x and y flavours".into(),
            ))
        }
    };
    Ok(model.local_field(state, site))
}
