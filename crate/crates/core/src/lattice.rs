//! Periodic cubic lattice and the incidence maps of the X-cube chain complex.
//!
//! Indexing conventions:
//! * vertex `(x, y, z)` has index `x + L*(y + L*z)`;
//! * a cube is labelled by its minimum corner and shares the vertex index;
//! * the edge leaving vertex `v` in the positive `axis` direction has index `3*v + axis`.
//! * type-B generators are stored in the basis `{B^x_v, B^y_v}` with index `2*v + axis`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        Self::ALL.get(i).copied()
    }

    /// The two axes perpendicular to `self`, in increasing order.
    pub fn others(self) -> [Axis; 2] {
        match self {
            Axis::X => [Axis::Y, Axis::Z],
            Axis::Y => [Axis::X, Axis::Z],
            Axis::Z => [Axis::X, Axis::Y],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubeId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

/// The four linear maps of the chain complex `Z2^A <-> Z2^Q <-> Z2^B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// cube configurations -> edge configurations
    A,
    /// edge configurations -> fracton syndrome (A-generators)
    ADagger,
    /// B-generator configurations -> edge configurations
    B,
    /// edge configurations -> lineon syndrome (B-generators)
    BDagger,
}

#[derive(Clone, Debug)]
pub struct Lattice {
    size: usize,
    cube_edges: Vec<[u32; 12]>,
    edge_cubes: Vec<[u32; 4]>,
    vertex_perp: Vec<[[u32; 4]; 3]>,
    // B-basis generators touching each edge: 2 for x/y edges, 4 for z edges
    edge_generators: Vec<Vec<u32>>,
}

impl Lattice {
    pub fn new(size: usize) -> Result<Self> {
        if !(2..=1024).contains(&size) {
            return Err(Error::InvalidSize(size));
        }
        let n = size * size * size;
        let mut lat = Lattice {
            size,
            cube_edges: Vec::with_capacity(n),
            edge_cubes: Vec::with_capacity(3 * n),
            vertex_perp: Vec::with_capacity(n),
            edge_generators: Vec::with_capacity(3 * n),
        };
        for c in 0..n {
            let (x, y, z) = lat.coords(c);
            let mut edges = [0u32; 12];
            let mut k = 0;
            for axis in Axis::ALL {
                let [a, b] = axis.others();
                for da in 0..2 {
                    for db in 0..2 {
                        let mut d = [0isize; 3];
                        d[a.index()] = da;
                        d[b.index()] = db;
                        let v = lat.shift((x, y, z), d);
                        edges[k] = (3 * v + axis.index()) as u32;
                        k += 1;
                    }
                }
            }
            lat.cube_edges.push(edges);
        }
        for e in 0..3 * n {
            let (v, axis) = (e / 3, Axis::ALL[e % 3]);
            let (x, y, z) = lat.coords(v);
            let [a, b] = axis.others();
            let mut cubes = [0u32; 4];
            let mut k = 0;
            for da in 0..2 {
                for db in 0..2 {
                    let mut d = [0isize; 3];
                    d[a.index()] = -da;
                    d[b.index()] = -db;
                    cubes[k] = lat.shift((x, y, z), d) as u32;
                    k += 1;
                }
            }
            lat.edge_cubes.push(cubes);
        }
        for v in 0..n {
            let (x, y, z) = lat.coords(v);
            let mut per_axis = [[0u32; 4]; 3];
            for mu in Axis::ALL {
                let mut k = 0;
                for nu in mu.others() {
                    let mut back = [0isize; 3];
                    back[nu.index()] = -1;
                    per_axis[mu.index()][k] = (3 * v + nu.index()) as u32;
                    per_axis[mu.index()][k + 1] =
                        (3 * lat.shift((x, y, z), back) + nu.index()) as u32;
                    k += 2;
                }
            }
            lat.vertex_perp.push(per_axis);
        }
        let mut edge_generators = vec![Vec::new(); 3 * n];
        for v in 0..n {
            for s in 0..2 {
                for &e in &lat.vertex_perp[v][s] {
                    edge_generators[e as usize].push((2 * v + s) as u32);
                }
            }
        }
        lat.edge_generators = edge_generators;
        Ok(lat)
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn n_vertices(&self) -> usize {
        self.size * self.size * self.size
    }

    #[inline]
    pub fn n_cubes(&self) -> usize {
        self.n_vertices()
    }

    #[inline]
    pub fn n_edges(&self) -> usize {
        3 * self.n_vertices()
    }

    /// Number of stored type-B generators (`B^x`, `B^y` per vertex).
    #[inline]
    pub fn n_b_generators(&self) -> usize {
        2 * self.n_vertices()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        let l = self.size;
        (x % l) + l * ((y % l) + l * (z % l))
    }

    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize, usize) {
        let l = self.size;
        (i % l, (i / l) % l, i / (l * l))
    }

    /// Site index displaced by `d` with periodic wrap-around.
    pub fn shift(&self, (x, y, z): (usize, usize, usize), d: [isize; 3]) -> usize {
        let l = self.size as isize;
        let w = |c: usize, dc: isize| ((c as isize + dc).rem_euclid(l)) as usize;
        self.index(w(x, d[0]), w(y, d[1]), w(z, d[2]))
    }

    pub fn vertex(&self, x: usize, y: usize, z: usize) -> VertexId {
        VertexId(self.index(x, y, z))
    }

    pub fn cube(&self, x: usize, y: usize, z: usize) -> CubeId {
        CubeId(self.index(x, y, z))
    }

    pub fn edge(&self, x: usize, y: usize, z: usize, axis: Axis) -> EdgeId {
        EdgeId(3 * self.index(x, y, z) + axis.index())
    }

    /// `(x, y, z, axis)` of an edge's canonical (min-corner, positive axis) form.
    pub fn edge_coords(&self, e: EdgeId) -> (usize, usize, usize, Axis) {
        let (x, y, z) = self.coords(e.0 / 3);
        (x, y, z, Axis::ALL[e.0 % 3])
    }

    pub fn edges_of_cube(&self, c: CubeId) -> [EdgeId; 12] {
        self.cube_edges[c.0].map(|e| EdgeId(e as usize))
    }

    pub fn edges_of_vertex_perp(&self, v: VertexId, axis: Axis) -> [EdgeId; 4] {
        self.vertex_perp[v.0][axis.index()].map(|e| EdgeId(e as usize))
    }

    pub fn cubes_of_edge(&self, e: EdgeId) -> [CubeId; 4] {
        self.edge_cubes[e.0].map(|c| CubeId(c as usize))
    }

    /// B-basis generators (index `2v + axis`, axis in {x, y}) whose support contains `e`.
    pub fn generators_of_edge(&self, e: EdgeId) -> &[u32] {
        &self.edge_generators[e.0]
    }

    // raw tables for the inner loops

    #[inline]
    pub fn cube_edge_table(&self) -> &[[u32; 12]] {
        &self.cube_edges
    }

    #[inline]
    pub fn edge_cube_table(&self) -> &[[u32; 4]] {
        &self.edge_cubes
    }

    #[inline]
    pub fn vertex_perp_table(&self) -> &[[[u32; 4]; 3]] {
        &self.vertex_perp
    }

    pub fn domain_len(&self, map: Boundary) -> usize {
        match map {
            Boundary::A => self.n_cubes(),
            Boundary::B => self.n_b_generators(),
            Boundary::ADagger | Boundary::BDagger => self.n_edges(),
        }
    }

    pub fn codomain_len(&self, map: Boundary) -> usize {
        match map {
            Boundary::A | Boundary::B => self.n_edges(),
            Boundary::ADagger => self.n_cubes(),
            Boundary::BDagger => self.n_b_generators(),
        }
    }

    /// Applies one of the chain-complex maps to a GF(2) vector.
    pub fn apply_boundary(&self, map: Boundary, vec: &BitVec) -> Result<BitVec> {
        let expected = self.domain_len(map);
        if vec.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: vec.len(),
            });
        }
        let mut out = BitVec::zeros(self.codomain_len(map));
        match map {
            Boundary::A => {
                for c in vec.iter_ones() {
                    for &e in &self.cube_edges[c] {
                        out.flip(e as usize);
                    }
                }
            }
            Boundary::ADagger => {
                for e in vec.iter_ones() {
                    for &c in &self.edge_cubes[e] {
                        out.flip(c as usize);
                    }
                }
            }
            Boundary::B => {
                for g in vec.iter_ones() {
                    let (v, s) = (g / 2, g % 2);
                    for &e in &self.vertex_perp[v][s] {
                        out.flip(e as usize);
                    }
                }
            }
            Boundary::BDagger => {
                for e in vec.iter_ones() {
                    for &g in &self.edge_generators[e] {
                        out.flip(g as usize);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Edge support of the cube generator `A_c`.
    pub fn cube_support(&self, c: CubeId) -> BitVec {
        BitVec::from_indices(self.n_edges(), self.cube_edges[c.0].iter().map(|&e| e as usize))
    }

    /// Edge support of `B^axis_v` (any of the three axes).
    pub fn vertex_support(&self, v: VertexId, axis: Axis) -> BitVec {
        BitVec::from_indices(
            self.n_edges(),
            self.vertex_perp[v.0][axis.index()].iter().map(|&e| e as usize),
        )
    }
}
