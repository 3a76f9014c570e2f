//! X-cube stabilizer code: syndromes, logical operators, degeneracy and
//! error-class enumeration on small lattices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{self, BitVec, Echelon};
use crate::lattice::{Axis, Boundary, CubeId, Lattice, VertexId};

/// Pauli species of an error configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Z,
}

impl Pauli {
    pub fn as_str(self) -> &'static str {
        match self {
            Pauli::X => "X",
            Pauli::Z => "Z",
        }
    }
}

/// One bit per edge; `1` marks a qubit hit by an error of the given species.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorConfig {
    pub bits: BitVec,
    pub species: Pauli,
}

impl ErrorConfig {
    pub fn new(bits: BitVec, species: Pauli) -> Self {
        Self { bits, species }
    }

    pub fn zeros(lattice: &Lattice, species: Pauli) -> Self {
        Self::new(BitVec::zeros(lattice.n_edges()), species)
    }

    pub fn weight(&self) -> usize {
        self.bits.weight()
    }

    fn check(&self, lattice: &Lattice, species: Pauli) -> Result<()> {
        if self.species != species {
            return Err(Error::SpeciesMismatch {
                expected: species,
                actual: self.species,
            });
        }
        if self.bits.len() != lattice.n_edges() {
            return Err(Error::DimensionMismatch {
                expected: lattice.n_edges(),
                actual: self.bits.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyndromeKind {
    /// one bit per cube, flagged by Z errors
    Fracton,
    /// `B^x`, `B^y` bits per vertex, flagged by X errors
    Lineon,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Syndrome {
    pub kind: SyndromeKind,
    pub bits: BitVec,
}

impl Syndrome {
    pub fn is_trivial(&self) -> bool {
        self.bits.is_zero()
    }

    /// Stored lineon bit `B^axis_v` for axis in {x, y}, or the derived `B^z_v`.
    pub fn lineon(&self, v: VertexId, axis: Axis) -> bool {
        assert_eq!(self.kind, SyndromeKind::Lineon);
        match axis {
            Axis::X | Axis::Y => self.bits.get(2 * v.0 + axis.index()),
            Axis::Z => self.bits.get(2 * v.0) ^ self.bits.get(2 * v.0 + 1),
        }
    }
}

/// Fractons created by a Z-error configuration.
pub fn syndrome_a(lattice: &Lattice, eta: &ErrorConfig) -> Result<Syndrome> {
    eta.check(lattice, Pauli::Z)?;
    Ok(Syndrome {
        kind: SyndromeKind::Fracton,
        bits: lattice.apply_boundary(Boundary::ADagger, &eta.bits)?,
    })
}

/// Lineons created by an X-error configuration, in the `{B^x, B^y}` basis.
pub fn syndrome_b(lattice: &Lattice, eta: &ErrorConfig) -> Result<Syndrome> {
    eta.check(lattice, Pauli::X)?;
    Ok(Syndrome {
        kind: SyndromeKind::Lineon,
        bits: lattice.apply_boundary(Boundary::BDagger, &eta.bits)?,
    })
}

/// I.i.d. Bernoulli(`p`) errors on every edge, reproducible from `seed`.
pub fn sample_errors(lattice: &Lattice, p: f64, species: Pauli, seed: u64) -> Result<ErrorConfig> {
    check_rate(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_errors_with(lattice, p, species, &mut rng))
}

pub fn sample_errors_with<R: Rng + ?Sized>(
    lattice: &Lattice,
    p: f64,
    species: Pauli,
    rng: &mut R,
) -> ErrorConfig {
    let mut bits = BitVec::zeros(lattice.n_edges());
    for e in 0..lattice.n_edges() {
        if rng.gen_bool(p) {
            bits.set(e, true);
        }
    }
    ErrorConfig::new(bits, species)
}

pub(crate) fn check_rate(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            detail: format!("error rate {p} not in [0, 1]"),
        });
    }
    Ok(())
}

/// Edge supports of all type-A generators.
pub fn a_generator_rows(lattice: &Lattice) -> Vec<BitVec> {
    (0..lattice.n_cubes())
        .map(|c| lattice.cube_support(CubeId(c)))
        .collect()
}

/// Edge supports of the stored type-B generators, ordered as `2v + axis`.
pub fn b_generator_rows(lattice: &Lattice) -> Vec<BitVec> {
    (0..lattice.n_vertices())
        .flat_map(|v| [Axis::X, Axis::Y].map(|a| lattice.vertex_support(VertexId(v), a)))
        .collect()
}

/// Ranks and derived logical-qubit count of the code on an `L^3` torus.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct CodeInfo {
    #[serde(rename = "L")]
    pub size: usize,
    pub qubits: usize,
    pub a_generators: usize,
    pub b_generators: usize,
    pub rank_a: usize,
    pub rank_b: usize,
    pub logical_qubits: usize,
}

pub fn code_info(lattice: &Lattice) -> CodeInfo {
    let rank_a = gf2::rank(&a_generator_rows(lattice));
    let rank_b = gf2::rank(&b_generator_rows(lattice));
    CodeInfo {
        size: lattice.size(),
        qubits: lattice.n_edges(),
        a_generators: lattice.n_cubes(),
        b_generators: lattice.n_b_generators(),
        rank_a,
        rank_b,
        logical_qubits: lattice.n_edges() - rank_a - rank_b,
    }
}

/// `n - rank(A) - rank(B)` over GF(2).
pub fn logical_qubit_count(size: usize) -> Result<usize> {
    Ok(code_info(&Lattice::new(size)?).logical_qubits)
}

/// Paired logical operators: `x[j]` and `z[j]` overlap oddly, all other pairs evenly.
#[derive(Clone, Debug)]
pub struct LogicalOperatorSet {
    /// X-type logicals (extended strings), commuting with every B generator.
    pub x: Vec<BitVec>,
    /// Z-type logicals, commuting with every A generator.
    pub z: Vec<BitVec>,
}

/// Straight string of edges along `axis` through transverse coordinates `(a, b)`.
pub fn straight_string(lattice: &Lattice, axis: Axis, a: usize, b: usize) -> BitVec {
    let l = lattice.size();
    let [u, w] = axis.others();
    let mut bits = BitVec::zeros(lattice.n_edges());
    for t in 0..l {
        let mut c = [0usize; 3];
        c[axis.index()] = t;
        c[u.index()] = a;
        c[w.index()] = b;
        bits.set(lattice.edge(c[0], c[1], c[2], axis).0, true);
    }
    bits
}

/// Edges of orientation `axis` with `axis`-coordinate `a` and `fixed`-coordinate `b`,
/// running along the remaining direction: a rigid string on the dual lattice.
pub fn dual_string(lattice: &Lattice, axis: Axis, along: Axis, a: usize, b: usize) -> BitVec {
    assert_ne!(axis, along);
    let fixed = Axis::ALL
        .into_iter()
        .find(|&x| x != axis && x != along)
        .expect("three axes");
    let mut bits = BitVec::zeros(lattice.n_edges());
    for t in 0..lattice.size() {
        let mut c = [0usize; 3];
        c[axis.index()] = a;
        c[fixed.index()] = b;
        c[along.index()] = t;
        bits.set(lattice.edge(c[0], c[1], c[2], axis).0, true);
    }
    bits
}

/// All `axis`-oriented edges crossing the dual plane `axis = a + 1/2`.
pub fn flat_membrane(lattice: &Lattice, axis: Axis, a: usize) -> BitVec {
    let l = lattice.size();
    let [u, w] = axis.others();
    let mut bits = BitVec::zeros(lattice.n_edges());
    for s in 0..l {
        for t in 0..l {
            let mut c = [0usize; 3];
            c[axis.index()] = a;
            c[u.index()] = s;
            c[w.index()] = t;
            bits.set(lattice.edge(c[0], c[1], c[2], axis).0, true);
        }
    }
    bits
}

impl LogicalOperatorSet {
    /// Builds a symplectic basis from straight strings and dual strings,
    /// keeping only candidates independent modulo the stabilizers.
    pub fn new(lattice: &Lattice) -> Result<Self> {
        let l = lattice.size();
        let n = lattice.n_edges();

        let mut x_span = Echelon::new(n);
        for r in a_generator_rows(lattice) {
            x_span.insert(&r);
        }
        let mut x = Vec::new();
        for axis in Axis::ALL {
            for a in 0..l {
                for b in 0..l {
                    let s = straight_string(lattice, axis, a, b);
                    if x_span.insert(&s) {
                        x.push(s);
                    }
                }
            }
        }

        let mut z_span = Echelon::new(n);
        for r in b_generator_rows(lattice) {
            z_span.insert(&r);
        }
        let mut z_raw = Vec::new();
        for axis in Axis::ALL {
            for along in axis.others() {
                for a in 0..l {
                    for b in 0..l {
                        let s = dual_string(lattice, axis, along, a, b);
                        if z_span.insert(&s) {
                            z_raw.push(s);
                        }
                    }
                }
            }
        }
        if x.len() != z_raw.len() {
            return Err(Error::Invalid(format!(
                "logical bases disagree: {} X vs {} Z",
                x.len(),
                z_raw.len()
            )));
        }
        let k = x.len();
        // overlap[i][j] = <x_i, z_j>; pairing z'_j = sum_m (M^-1)_{mj} z_m
        let overlap: Vec<BitVec> = x
            .iter()
            .map(|xi| BitVec::from_bools(&z_raw.iter().map(|zj| xi.dot(zj)).collect::<Vec<_>>()))
            .collect();
        let inv = gf2::inverse(&overlap)
            .ok_or_else(|| Error::Invalid("logical overlap matrix is singular".into()))?;
        let mut z = Vec::with_capacity(k);
        for j in 0..k {
            let mut acc = BitVec::zeros(n);
            for (m, row) in inv.iter().enumerate() {
                if row.get(j) {
                    acc.xor_assign(&z_raw[m]);
                }
            }
            z.push(acc);
        }
        Ok(Self { x, z })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Logical operators acting on errors of `species` (strings for X, the Z set for Z).
    pub fn for_species(&self, species: Pauli) -> &[BitVec] {
        match species {
            Pauli::X => &self.x,
            Pauli::Z => &self.z,
        }
    }
}

/// Largest number of generator bits enumerated exhaustively.
pub const MAX_ENUMERATION_BITS: usize = 20;

/// Exhaustive enumerator of an error-equivalence class on lattices with at
/// most 64 edges (that is, `L = 2`).
///
/// Keeps the full image of the relevant boundary map as edge masks so the
/// weight distribution of any coset `eta + im(d)` costs one popcount per element.
#[derive(Clone, Debug)]
pub struct CosetEnumerator {
    species: Pauli,
    n_edges: usize,
    images: Vec<u64>,
    kernel_size: u64,
}

impl CosetEnumerator {
    pub fn new(lattice: &Lattice, species: Pauli) -> Result<Self> {
        let rows = match species {
            Pauli::X => a_generator_rows(lattice),
            Pauli::Z => b_generator_rows(lattice),
        };
        let n_edges = lattice.n_edges();
        if rows.len() > MAX_ENUMERATION_BITS || n_edges > 64 {
            return Err(Error::BudgetExceeded {
                bits: rows.len(),
                limit: MAX_ENUMERATION_BITS,
            });
        }
        let masks: Vec<u64> = rows
            .iter()
            .map(|r| r.to_u64().expect("at most 64 edges"))
            .collect();
        let count = 1usize << masks.len();
        let mut images = vec![0u64; count];
        for f in 1..count {
            let low = f.trailing_zeros() as usize;
            images[f] = images[f & (f - 1)] ^ masks[low];
        }
        let kernel_size = images.iter().filter(|&&m| m == 0).count() as u64;
        Ok(Self {
            species,
            n_edges,
            images,
            kernel_size,
        })
    }

    pub fn species(&self) -> Pauli {
        self.species
    }

    /// Number of generator configurations mapping to the empty edge set.
    pub fn kernel_size(&self) -> u64 {
        self.kernel_size
    }

    /// `counts[w]` = number of generator configurations `f` with `|eta + d f| = w`.
    pub fn weight_counts(&self, eta: u64) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_edges + 1];
        for &img in &self.images {
            counts[(eta ^ img).count_ones() as usize] += 1;
        }
        counts
    }

    /// `ln pr([eta]; p)`, the total probability of the distinct errors in the class.
    pub fn ln_class_probability(&self, eta: u64, p: f64) -> f64 {
        ln_weighted_counts(&self.weight_counts(eta), self.n_edges, p) - (self.kernel_size as f64).ln()
    }
}

/// `ln sum_w counts[w] p^w (1-p)^(n-w)`.
pub(crate) fn ln_weighted_counts(counts: &[u64], n: usize, p: f64) -> f64 {
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let terms: Vec<f64> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(w, &c)| {
            let mut t = (c as f64).ln();
            if w > 0 {
                t += w as f64 * lp;
            }
            if w < n {
                t += (n - w) as f64 * lq;
            }
            t
        })
        .collect();
    crate::num::log_sum_exp(&terms)
}

/// Natural log of the probability of the error class `[eta]` at rate `p`,
/// computed by exhaustive enumeration of the stabilizer image.
pub fn enumerate_class_probability(lattice: &Lattice, eta: &ErrorConfig, p: f64) -> Result<f64> {
    check_rate(p)?;
    if eta.bits.len() != lattice.n_edges() {
        return Err(Error::DimensionMismatch {
            expected: lattice.n_edges(),
            actual: eta.bits.len(),
        });
    }
    let en = CosetEnumerator::new(lattice, eta.species)?;
    Ok(en.ln_class_probability(eta.bits.to_u64().expect("L = 2"), p))
}
