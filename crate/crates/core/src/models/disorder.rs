use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::code::{self, ErrorConfig, Pauli};
use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::lattice::Lattice;

const MAGIC: &[u8; 6] = b"XCDIS\0";
const VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisorderSource {
    Sampled,
    FromErrors,
}

/// Quenched coupling signs `tau_l = (-1)^eta(l)`, one per edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disorder {
    size: usize,
    couplings: Vec<i8>,
    p: f64,
    seed: u64,
    species: Pauli,
    source: DisorderSource,
}

impl Disorder {
    /// Couplings with every bond ferromagnetic.
    pub fn clean(lattice: &Lattice, species: Pauli) -> Self {
        Self::from_errors(&ErrorConfig::zeros(lattice, species), 0.0, 0)
    }

    /// Antiferromagnetic bonds drawn independently with probability `p`.
    pub fn sample(lattice: &Lattice, p: f64, species: Pauli, seed: u64) -> Result<Self> {
        let eta = code::sample_errors(lattice, p, species, seed)?;
        let mut d = Self::from_errors(&eta, p, seed);
        d.source = DisorderSource::Sampled;
        Ok(d)
    }

    /// `tau = (-1)^eta`; `p` and `seed` are carried as metadata only.
    pub fn from_errors(eta: &ErrorConfig, p: f64, seed: u64) -> Self {
        let n = eta.bits.len();
        let size = ((n / 3) as f64).cbrt().round() as usize;
        Self {
            size,
            couplings: (0..n).map(|e| if eta.bits.get(e) { -1 } else { 1 }).collect(),
            p,
            seed,
            species: eta.species,
            source: DisorderSource::FromErrors,
        }
    }

    pub fn from_couplings(lattice: &Lattice, couplings: Vec<i8>, species: Pauli) -> Result<Self> {
        if couplings.len() != lattice.n_edges() {
            return Err(Error::DimensionMismatch {
                expected: lattice.n_edges(),
                actual: couplings.len(),
            });
        }
        if couplings.iter().any(|&t| t != 1 && t != -1) {
            return Err(Error::Invalid("couplings must be +1 or -1".into()));
        }
        Ok(Self {
            size: lattice.size(),
            couplings,
            p: 0.0,
            seed: 0,
            species,
            source: DisorderSource::FromErrors,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn species(&self) -> Pauli {
        self.species
    }

    pub fn source(&self) -> DisorderSource {
        self.source
    }

    #[inline]
    pub fn couplings(&self) -> &[i8] {
        &self.couplings
    }

    #[inline]
    pub fn tau(&self, edge: usize) -> i8 {
        self.couplings[edge]
    }

    /// Number of antiferromagnetic bonds.
    pub fn n_negative(&self) -> usize {
        self.couplings.iter().filter(|&&t| t < 0).count()
    }

    pub fn to_error_config(&self) -> ErrorConfig {
        ErrorConfig::new(
            BitVec::from_bools(&self.couplings.iter().map(|&t| t < 0).collect::<Vec<_>>()),
            self.species,
        )
    }

    /// Flips the sign of every coupling in `support`.
    pub fn with_flipped(&self, support: &BitVec) -> Self {
        let mut out = self.clone();
        for e in support.iter_ones() {
            out.couplings[e] = -out.couplings[e];
        }
        out.source = DisorderSource::FromErrors;
        out
    }

    /// Same metadata, new coupling signs.
    pub(crate) fn with_couplings(&self, couplings: Vec<i8>) -> Self {
        debug_assert_eq!(couplings.len(), self.couplings.len());
        Self {
            couplings,
            ..self.clone()
        }
    }

    pub(crate) fn check_lattice(&self, lattice: &Lattice) -> Result<()> {
        if self.couplings.len() != lattice.n_edges() {
            return Err(Error::DimensionMismatch {
                expected: lattice.n_edges(),
                actual: self.couplings.len(),
            });
        }
        Ok(())
    }

    /// Binary layout (little endian): magic `XCDIS\0`, version `u16`, `L: u32`,
    /// `p: f64`, `seed: u64`, species `u8` (0 = X, 1 = Z), source `u8`,
    /// then `ceil(3L^3/8)` bytes of packed error bits.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.size as u32).to_le_bytes())?;
        w.write_all(&self.p.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&[
            match self.species {
                Pauli::X => 0,
                Pauli::Z => 1,
            },
            match self.source {
                DisorderSource::Sampled => 0,
                DisorderSource::FromErrors => 1,
            },
        ])?;
        w.write_all(&self.to_error_config().bits.to_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let bad = |detail: &str| Error::Format {
            path: path.to_path_buf(),
            detail: detail.to_string(),
        };
        let mut buf = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
        if buf.len() < 32 || &buf[..6] != MAGIC {
            return Err(bad("not a disorder file"));
        }
        let version = u16::from_le_bytes([buf[6], buf[7]]);
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let size = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
        let p = f64::from_le_bytes(buf[12..20].try_into().unwrap());
        let seed = u64::from_le_bytes(buf[20..28].try_into().unwrap());
        let species = match buf[28] {
            0 => Pauli::X,
            1 => Pauli::Z,
            _ => return Err(bad("bad species tag")),
        };
        let source = match buf[29] {
            0 => DisorderSource::Sampled,
            1 => DisorderSource::FromErrors,
            _ => return Err(bad("bad source tag")),
        };
        if size < 2 {
            return Err(bad("bad lattice size"));
        }
        let n = 3 * size * size * size;
        let bits = BitVec::from_bytes(n, &buf[30..]).ok_or_else(|| bad("payload length mismatch"))?;
        let mut d = Self::from_errors(&ErrorConfig::new(bits, species), p, seed);
        d.source = source;
        Ok(d)
    }
}
