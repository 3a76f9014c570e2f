use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binned `P(E)` over a fixed energy-density window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    counts: Vec<u64>,
    below: u64,
    above: u64,
}

/// The deepest valley between two sufficiently high peaks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bimodality {
    /// Bin centres of the two peaks, low energy first.
    pub peaks: (f64, f64),
    pub valley: f64,
    /// Valley height over the lower of the two peak heights.
    pub valley_to_peak: f64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, n_bins: usize) -> Result<Self> {
        if !(lo < hi) || n_bins == 0 {
            return Err(Error::Invalid(format!("bad histogram window [{lo}, {hi}] with {n_bins} bins")));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; n_bins],
            below: 0,
            above: 0,
        })
    }

    /// Builds a histogram from exact per-energy counts.
    pub fn from_counts(counts: &EnergyCounts, lo: f64, hi: f64, n_bins: usize) -> Result<Self> {
        let mut h = Self::new(lo, hi, n_bins)?;
        for (&e, &c) in &counts.counts {
            h.add_n(e as f64 / counts.n_sites as f64, c);
        }
        Ok(h)
    }

    /// Histogram over the observed energy range with about `target_bins`
    /// bins, never narrower than the spacing of attainable energies, so the
    /// discreteness of the spectrum cannot produce empty bins.
    pub fn spanning(counts: &EnergyCounts, target_bins: usize) -> Result<Self> {
        let energies: Vec<i64> = counts.counts.keys().copied().collect();
        let (Some(&lo), Some(&hi)) = (energies.first(), energies.last()) else {
            return Err(Error::InsufficientData("no energy samples".into()));
        };
        let step = energies.windows(2).fold(0i64, |g, w| gcd(g, w[1] - w[0])).max(1);
        let levels = ((hi - lo) / step + 1) as usize;
        let per_bin = levels.div_ceil(target_bins.max(1));
        let n_bins = levels.div_ceil(per_bin);
        let n = counts.n_sites as f64;
        let width = (per_bin as i64 * step) as f64 / n;
        let lo_edge = (lo as f64 - 0.5 * step as f64) / n;
        Self::from_counts(counts, lo_edge, lo_edge + width * n_bins as f64, n_bins)
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn bin_centre(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.bin_width()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn add(&mut self, x: f64) {
        self.add_n(x, 1);
    }

    pub fn add_n(&mut self, x: f64, n: u64) {
        if x < self.lo {
            self.below += n;
        } else if x > self.hi {
            self.above += n;
        } else {
            let i = (((x - self.lo) / self.bin_width()) as usize).min(self.counts.len() - 1);
            self.counts[i] += n;
        }
    }

    /// Total number of samples, including those outside the window.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.below + self.above
    }

    pub fn out_of_range(&self) -> (u64, u64) {
        (self.below, self.above)
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.lo != other.lo || self.hi != other.hi || self.counts.len() != other.counts.len() {
            return Err(Error::Invalid("histogram windows differ".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.below += other.below;
        self.above += other.above;
        Ok(())
    }

    /// Normalized density `P(E)`; integrates to the in-window fraction.
    pub fn density(&self) -> Vec<f64> {
        let n = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / (n * self.bin_width())).collect()
    }

    /// Detects two peaks separated by a valley. Heights are taken from a
    /// centred moving average over `2 * smooth + 1` bins; peaks lower than
    /// `min_peak_fraction` of the maximum are ignored.
    pub fn bimodality(&self, smooth: usize, min_peak_fraction: f64) -> Option<Bimodality> {
        let raw: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        let n = raw.len();
        let s: Vec<f64> = (0..n)
            .map(|i| {
                let a = i.saturating_sub(smooth);
                let b = (i + smooth + 1).min(n);
                raw[a..b].iter().sum::<f64>() / (b - a) as f64
            })
            .collect();
        let top = s.iter().copied().fold(0.0, f64::max);
        if top <= 0.0 {
            return None;
        }
        let maxima: Vec<usize> = (0..n)
            .filter(|&i| {
                let left = if i == 0 { f64::NEG_INFINITY } else { s[i - 1] };
                let right = if i + 1 == n { f64::NEG_INFINITY } else { s[i + 1] };
                s[i] >= left && s[i] > right && s[i] >= min_peak_fraction * top
            })
            .collect();
        let mut best: Option<Bimodality> = None;
        for (a, &i) in maxima.iter().enumerate() {
            for &j in &maxima[a + 1..] {
                let valley = s[i..=j].iter().copied().fold(f64::INFINITY, f64::min);
                let ratio = valley / s[i].min(s[j]);
                if best.is_none_or(|b| ratio < b.valley_to_peak) {
                    best = Some(Bimodality {
                        peaks: (self.bin_centre(i), self.bin_centre(j)),
                        valley,
                        valley_to_peak: ratio,
                    });
                }
            }
        }
        best
    }

    /// Two peaks with valley-to-peak ratio below `threshold` (0.9 by default
    /// in the run configuration).
    pub fn is_bimodal(&self, smooth: usize, threshold: f64) -> bool {
        self.bimodality(smooth, 0.1).is_some_and(|b| b.valley_to_peak < threshold)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Exact counts per integer total energy, for reweighting to nearby temperatures.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyCounts {
    n_sites: usize,
    counts: BTreeMap<i64, u64>,
}

impl EnergyCounts {
    /// `n_sites` converts totals to densities (`L^3` for both models).
    pub fn new(n_sites: usize) -> Self {
        Self {
            n_sites,
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, energy: i64) {
        *self.counts.entry(energy).or_default() += 1;
    }

    pub fn merge(&mut self, other: &EnergyCounts) {
        for (&e, &c) in &other.counts {
            *self.counts.entry(e).or_default() += c;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts.iter().map(|(&e, &c)| (e, c))
    }

    /// Single-histogram reweighting from `beta_from` to `beta_to`; returns
    /// `(energy density, probability)` pairs.
    pub fn reweighted(&self, beta_from: f64, beta_to: f64) -> Vec<(f64, f64)> {
        let db = beta_to - beta_from;
        let logs: Vec<f64> = self.counts.iter().map(|(&e, &c)| (c as f64).ln() - db * e as f64).collect();
        let norm = crate::num::log_sum_exp(&logs);
        self.counts
            .keys()
            .zip(&logs)
            .map(|(&e, &lw)| (e as f64 / self.n_sites as f64, (lw - norm).exp()))
            .collect()
    }

    /// Reweighted mean energy density.
    pub fn mean_density(&self, beta_from: f64, beta_to: f64) -> f64 {
        self.reweighted(beta_from, beta_to).iter().map(|(e, p)| e * p).sum()
    }
}
