use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Point estimate with a bootstrap standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate<F> {
    pub value: F,
    pub error: F,
    pub n_resamples: usize,
}

pub const DEFAULT_RESAMPLES: usize = 1000;

/// Bootstrap over the rows of `samples` for an arbitrary statistic.
///
/// The spread of the resampled statistic is scaled by `sqrt(n / (n - 1))`,
/// which makes the estimate for the mean coincide with the usual standard
/// error. Replicates where the statistic is not finite are dropped. A single
/// sample yields a zero error.
pub fn bootstrap<T, F, S>(samples: &[T], n_resamples: usize, seed: u64, statistic: S) -> Result<BootstrapEstimate<F>>
where
    T: Clone,
    F: Real,
    S: Fn(&[T]) -> F,
{
    if samples.is_empty() {
        return Err(Error::InsufficientData("bootstrap of an empty sample".into()));
    }
    let value = statistic(samples);
    let n = samples.len();
    if n == 1 || n_resamples < 2 {
        return Ok(BootstrapEstimate {
            value,
            error: F::zero(),
            n_resamples: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = Vec::with_capacity(n);
    let reps: Vec<F> = (0..n_resamples)
        .map(|_| {
            draw.clear();
            draw.extend((0..n).map(|_| samples[rng.gen_range(0..n)].clone()));
            statistic(&draw)
        })
        .filter(|x| x.is_finite())
        .collect();
    if reps.len() < 2 {
        return Err(Error::InsufficientData("fewer than two finite bootstrap replicates".into()));
    }
    // shifting by one replicate keeps identical replicates at exactly zero spread
    let shifted: Vec<F> = reps.iter().map(|&r| r - reps[0]).collect();
    let sd = crate::num::variance(&shifted).unwrap().sqrt();
    let scale = F::from_usize_lossy(n) / F::from_usize_lossy(n - 1);
    Ok(BootstrapEstimate {
        value,
        error: sd * scale.sqrt(),
        n_resamples: reps.len(),
    })
}

/// Mean over disorder realizations with an error from resampling them.
pub fn disorder_average<F: Real>(values: &[F], n_resamples: usize, seed: u64) -> Result<BootstrapEstimate<F>> {
    bootstrap(values, n_resamples, seed, |xs| crate::num::mean(xs).unwrap())
}

/// Average and error of one observable over one logarithmic time window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinValue {
    pub mean: f64,
    pub error: f64,
    pub n_sweeps: u64,
}

/// Per-bin averages of named observables; bin `tau` (1-based) covers the
/// sweeps `[2^(tau-1), 2^tau - 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BinSeries {
    pub observables: Vec<String>,
    /// `bins[obs][tau - 1]`.
    pub bins: Vec<Vec<BinValue>>,
}

impl BinSeries {
    pub fn n_bins(&self) -> usize {
        self.bins.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn push(&mut self, name: impl Into<String>, bins: Vec<BinValue>) {
        self.observables.push(name.into());
        self.bins.push(bins);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibrationVerdict {
    pub equilibrated: bool,
    /// Largest pairwise discrepancy among the last three bins, in combined
    /// standard errors, and the observable where it occurred.
    pub worst: Option<(String, f64)>,
}

/// Equilibrated iff, for every observable, the last three bins agree
/// pairwise within `n_sigma` combined standard errors.
pub fn binning_equilibration_check(series: &BinSeries, n_sigma: f64) -> Result<EquilibrationVerdict> {
    let n = series.n_bins();
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "binning analysis needs at least 4 bins, got {n}"
        )));
    }
    let mut worst: Option<(String, f64)> = None;
    let mut ok = true;
    for (name, bins) in series.observables.iter().zip(&series.bins) {
        let last = &bins[bins.len() - 3..];
        for a in 0..3 {
            for b in a + 1..3 {
                let diff = (last[a].mean - last[b].mean).abs();
                let sigma = last[a].error.hypot(last[b].error);
                let z = if sigma > 0.0 {
                    diff / sigma
                } else if diff == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                if z > n_sigma {
                    ok = false;
                }
                if worst.as_ref().is_none_or(|w| z > w.1) {
                    worst = Some((name.clone(), z));
                }
            }
        }
    }
    Ok(EquilibrationVerdict { equilibrated: ok, worst })
}

/// Block sums for one observable in every logarithmic bin.
///
/// Each bin is cut into at most `BLOCKS` equal blocks; the error of a bin is
/// the standard error of its block means, which tolerates autocorrelation
/// shorter than a block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinAccumulator {
    tau_max: u32,
    sums: Vec<Vec<f64>>,
    counts: Vec<Vec<u64>>,
}

impl BinAccumulator {
    pub const BLOCKS: u64 = 32;

    pub fn new(tau_max: u32) -> Self {
        let sizes = (1..=tau_max).map(|t| Self::n_blocks(t) as usize);
        Self {
            tau_max,
            sums: sizes.clone().map(|n| vec![0.0; n]).collect(),
            counts: sizes.map(|n| vec![0; n]).collect(),
        }
    }

    fn bin_len(tau: u32) -> u64 {
        1 << (tau - 1)
    }

    fn n_blocks(tau: u32) -> u64 {
        Self::bin_len(tau).min(Self::BLOCKS)
    }

    /// Bin of a zero-based sweep index; sweep 0 belongs to no bin.
    pub fn bin_of(sweep: u64) -> Option<u32> {
        (sweep > 0).then(|| 64 - sweep.leading_zeros())
    }

    pub fn add(&mut self, sweep: u64, value: f64) {
        let Some(tau) = Self::bin_of(sweep) else { return };
        if tau > self.tau_max {
            return;
        }
        let len = Self::bin_len(tau);
        let block = ((sweep - len) / (len / Self::n_blocks(tau))) as usize;
        self.sums[tau as usize - 1][block] += value;
        self.counts[tau as usize - 1][block] += 1;
    }

    /// Completed bins only.
    pub fn values(&self) -> Vec<BinValue> {
        (1..=self.tau_max)
            .map_while(|tau| {
                let (sums, counts) = (&self.sums[tau as usize - 1], &self.counts[tau as usize - 1]);
                let n: u64 = counts.iter().sum();
                if n < Self::bin_len(tau) {
                    return None;
                }
                let means: Vec<f64> = sums.iter().zip(counts).map(|(&s, &c)| s / c as f64).collect();
                let error = if means.len() > 1 {
                    (crate::num::variance(&means).unwrap() / (means.len() - 1) as f64).sqrt()
                } else {
                    0.0
                };
                Some(BinValue {
                    mean: sums.iter().sum::<f64>() / n as f64,
                    error,
                    n_sweeps: n,
                })
            })
            .collect()
    }
}
