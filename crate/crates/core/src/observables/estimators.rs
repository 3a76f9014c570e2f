use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::num::{variance, Real};

/// Outcome of the second-moment correlation length estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum XiEstimate<F> {
    Value(F),
    /// `G~(k_min) <= 0` or `G~(0) < G~(k_min)`: noise dominated.
    Flagged,
}

impl<F: Real> XiEstimate<F> {
    pub fn value(self) -> Option<F> {
        match self {
            XiEstimate::Value(v) => Some(v),
            XiEstimate::Flagged => None,
        }
    }
}

/// `xi_L = sqrt(G~(0)/G~(k_min) - 1) / (2 sin(|k_min|/2))` with `|k_min| = 2 pi / L`.
pub fn xi_second_moment<F: Real>(g0: F, gk: F, size: usize) -> XiEstimate<F> {
    if !(gk > F::zero()) || g0 < gk || !g0.is_finite() {
        return XiEstimate::Flagged;
    }
    let ratio = g0 / gk - F::one();
    let denom = F::lit(2.0 * (PI / size as f64).sin());
    XiEstimate::Value(ratio.sqrt() / denom)
}

fn check_samples<F>(xs: &[F]) -> Result<()> {
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "connected variance needs at least 2 samples, got {}",
            xs.len()
        )));
    }
    Ok(())
}

/// `C_v = L^3 / T^2 (<E^2> - <E>^2)` over energy-density samples.
pub fn specific_heat<F: Real>(energy_density: &[F], temperature: F, size: usize) -> Result<F> {
    check_samples(energy_density)?;
    let n = F::from_usize_lossy(size.pow(3));
    Ok(n / (temperature * temperature) * variance(energy_density).unwrap())
}

/// `chi = L^3 / T (<Q^2> - <Q>^2)`.
pub fn susceptibility<F: Real>(q: &[F], temperature: F, size: usize) -> Result<F> {
    check_samples(q)?;
    let n = F::from_usize_lossy(size.pow(3));
    Ok(n / temperature * variance(q).unwrap())
}

/// Same formulas from running moments `(n, sum x, sum x^2)`.
pub fn connected_variance<F: Real>(n: u64, sum: F, sum_sq: F) -> Result<F> {
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "connected variance needs at least 2 samples, got {n}"
        )));
    }
    let nf = F::from_u64(n).unwrap();
    let m = sum / nf;
    Ok((sum_sq / nf - m * m).max(F::zero()))
}

/// Site-resolved thermal correlators accumulated over two disjoint halves
/// of the measurement window.
///
/// The product of the two half averages estimates `<o>^2` without the
/// positive bias of squaring a single estimate.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SgAccumulator {
    n_sites: usize,
    n_disp: usize,
    sums: [Vec<i64>; 2],
    counts: [u64; 2],
}

impl SgAccumulator {
    pub fn new(n_sites: usize, n_disp: usize) -> Self {
        Self {
            n_sites,
            n_disp,
            sums: [vec![0; n_sites * n_disp], vec![0; n_sites * n_disp]],
            counts: [0, 0],
        }
    }

    /// Adds `products` (layout `site * n_disp + r`) to half `half` (0 or 1).
    pub fn add(&mut self, half: usize, products: &[i8]) {
        assert_eq!(products.len(), self.n_sites * self.n_disp);
        for (s, &p) in self.sums[half].iter_mut().zip(products) {
            *s += p as i64;
        }
        self.counts[half] += 1;
    }

    pub fn counts(&self) -> [u64; 2] {
        self.counts
    }

    /// Site average of the thermal correlator, `G(r)`.
    pub fn correlator(&self) -> Result<Vec<f64>> {
        let n = self.counts[0] + self.counts[1];
        if n == 0 {
            return Err(Error::InsufficientData("no correlator samples".into()));
        }
        Ok((0..self.n_disp)
            .map(|r| {
                let tot: i64 = (0..self.n_sites)
                    .map(|i| self.sums[0][i * self.n_disp + r] + self.sums[1][i * self.n_disp + r])
                    .sum();
                tot as f64 / (n as f64 * self.n_sites as f64)
            })
            .collect())
    }

    /// `G_SG(r) = N^-1 sum_i <o_i(r)>_1 <o_i(r)>_2`.
    pub fn sg_correlator(&self) -> Result<Vec<f64>> {
        if self.counts.contains(&0) {
            return Err(Error::InsufficientData("both halves need samples".into()));
        }
        let (n1, n2) = (self.counts[0] as f64, self.counts[1] as f64);
        Ok((0..self.n_disp)
            .map(|r| {
                let tot: f64 = (0..self.n_sites)
                    .map(|i| {
                        let k = i * self.n_disp + r;
                        (self.sums[0][k] as f64 / n1) * (self.sums[1][k] as f64 / n2)
                    })
                    .sum();
                tot / self.n_sites as f64
            })
            .collect())
    }
}
