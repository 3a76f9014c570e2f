use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// `xi_L / L` (or any size-scaled observable) against temperature for one size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve<F> {
    pub size: usize,
    pub temps: Vec<F>,
    pub values: Vec<F>,
    /// One standard error per point; zeros mean noiseless.
    pub errors: Vec<F>,
}

impl<F: Real> Curve<F> {
    pub fn new(size: usize, temps: Vec<F>, values: Vec<F>, errors: Vec<F>) -> Result<Self> {
        if temps.len() != values.len() || temps.len() != errors.len() {
            return Err(Error::DimensionMismatch {
                expected: temps.len(),
                actual: values.len().min(errors.len()),
            });
        }
        if temps.len() < 2 || temps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Invalid(format!(
                "curve for L={size} needs at least two strictly increasing temperatures"
            )));
        }
        Ok(Self {
            size,
            temps,
            values,
            errors,
        })
    }

    /// Piecewise-linear interpolation; `None` outside the sampled range.
    pub fn at(&self, t: F) -> Option<F> {
        interpolate(&self.temps, &self.values, t)
    }

    fn range(&self) -> (F, F) {
        (self.temps[0], self.temps[self.temps.len() - 1])
    }
}

fn interpolate<F: Real>(xs: &[F], ys: &[F], x: F) -> Option<F> {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let i = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let f = (x - x0) / (x1 - x0);
    Some(ys[i - 1] + f * (ys[i] - ys[i - 1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingVerdict {
    Crossing,
    NoCrossing,
    Ambiguous,
}

impl CrossingVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            CrossingVerdict::Crossing => "crossing",
            CrossingVerdict::NoCrossing => "no crossing",
            CrossingVerdict::Ambiguous => "ambiguous",
        }
    }
}

/// Where the curves of two sizes meet.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCrossing {
    pub sizes: (usize, usize),
    pub verdict: CrossingVerdict,
    pub temperature: Option<f64>,
    pub temperature_err: Option<f64>,
    pub value: Option<f64>,
    /// `1/nu` from `ln(s_large/s_small) / ln(L_large/L_small)`, slopes at the crossing.
    pub inverse_nu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossingEstimate {
    pub verdict: CrossingVerdict,
    pub pairs: Vec<PairCrossing>,
    /// Weighted mean of the pairwise crossing temperatures.
    pub t_c: Option<f64>,
    pub t_c_err: Option<f64>,
    /// Mean of the pairwise slope-ratio exponents, when all are positive.
    pub nu: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingOptions {
    pub n_bootstrap: usize,
    /// Pairwise crossings must agree within this many combined sigmas.
    pub n_sigma: f64,
    pub seed: u64,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        Self {
            n_bootstrap: 400,
            n_sigma: 2.0,
            seed: 0x5eed,
        }
    }
}

enum Shape {
    /// Single sign change of `large - small`: temperature and value there.
    Cross(f64, f64),
    /// Larger size below the smaller one everywhere.
    Below,
    Other,
}

/// Least-squares slope over the six grid points nearest to `t`.
fn local_slope(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| (xs[a] - t).abs().total_cmp(&(xs[b] - t).abs()));
    idx.truncate(6);
    let n = idx.len() as f64;
    let mx = idx.iter().map(|&i| xs[i]).sum::<f64>() / n;
    let my = idx.iter().map(|&i| ys[i]).sum::<f64>() / n;
    let sxy: f64 = idx.iter().map(|&i| (xs[i] - mx) * (ys[i] - my)).sum();
    let sxx: f64 = idx.iter().map(|&i| (xs[i] - mx).powi(2)).sum();
    sxy / sxx
}

/// Values and standard errors of one curve.
type Series<'a> = (&'a [f64], &'a [f64], &'a [f64]);

/// Compares two curves on the union of their grid points inside the common
/// window. Only points where `large - small` exceeds its error count towards
/// the sign pattern, so noise near the crossing cannot fake extra crossings.
fn pair_shape(small: Series, large: Series) -> Shape {
    let lo = small.0[0].max(large.0[0]);
    let hi = small.0[small.0.len() - 1].min(large.0[large.0.len() - 1]);
    let mut grid: Vec<f64> = small.0.iter().chain(large.0).copied().filter(|&t| t >= lo && t <= hi).collect();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let at = |c: Series, t: f64| (interpolate(c.0, c.1, t).unwrap(), interpolate(c.0, c.2, t).unwrap());
    let (diff, sig): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|&t| {
            let ((a, sa), (b, sb)) = (at(small, t), at(large, t));
            (b - a, (sa * sa + sb * sb).sqrt())
        })
        .unzip();
    let significant: Vec<usize> = (0..diff.len()).filter(|&i| diff[i].abs() > sig[i]).collect();
    if significant.is_empty() {
        return Shape::Other;
    }
    if significant.iter().all(|&i| diff[i] < 0.0) {
        return Shape::Below;
    }
    let flips: Vec<usize> = significant
        .windows(2)
        .filter(|w| (diff[w[0]] < 0.0) != (diff[w[1]] < 0.0))
        .map(|w| w[0])
        .collect();
    if flips.len() != 1 {
        return Shape::Other;
    }
    let first = flips[0];
    let last = significant[significant.partition_point(|&i| i <= first)];
    // average over every raw sign change between the two significant points
    let roots: Vec<f64> = (first + 1..=last)
        .filter(|&i| (diff[i - 1] < 0.0) != (diff[i] < 0.0))
        .map(|i| {
            let (t0, t1, d0, d1) = (grid[i - 1], grid[i], diff[i - 1], diff[i]);
            if d1 == d0 {
                t0
            } else {
                t0 - d0 * (t1 - t0) / (d1 - d0)
            }
        })
        .collect();
    let t = roots.iter().sum::<f64>() / roots.len() as f64;
    Shape::Cross(t, interpolate(small.0, small.1, t).unwrap())
}

fn weighted_mean(ts: &[f64], sigmas: &[f64]) -> f64 {
    let w: Vec<f64> = sigmas.iter().map(|&s| if s > 0.0 { 1.0 / (s * s) } else { 1e300 }).collect();
    let sw: f64 = w.iter().sum();
    ts.iter().zip(&w).map(|(t, w)| t * w).sum::<f64>() / sw
}

fn sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Locates the common crossing of size-scaled curves.
///
/// Each pair of sizes is compared on the union of its grid points within
/// the common temperature window. Errors come from a parametric bootstrap
/// that redraws every point from a normal with its standard error. The
/// verdict is "crossing" when every pair crosses once and all crossings agree
/// within `n_sigma`, "no crossing" when every larger size lies below every
/// smaller one throughout, and "ambiguous" otherwise.
pub fn crossing_finder<F: Real>(curves: &[Curve<F>], options: &CrossingOptions) -> Result<CrossingEstimate> {
    if curves.len() < 2 {
        return Err(Error::InsufficientData("crossing analysis needs at least two sizes".into()));
    }
    let mut sorted: Vec<&Curve<F>> = curves.iter().collect();
    sorted.sort_by_key(|c| c.size);
    let as_f64 = |xs: &[F]| xs.iter().map(|x| x.to_f64_lossy()).collect::<Vec<f64>>();
    let temps: Vec<Vec<f64>> = sorted.iter().map(|c| as_f64(&c.temps)).collect();
    let values: Vec<Vec<f64>> = sorted.iter().map(|c| as_f64(&c.values)).collect();
    let errors: Vec<Vec<f64>> = sorted.iter().map(|c| as_f64(&c.errors)).collect();

    let mut pairs_idx = Vec::new();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            let (a, b) = (sorted[i].range(), sorted[j].range());
            if a.1 < b.0 || b.1 < a.0 {
                return Err(Error::Invalid(format!(
                    "temperature ranges of L={} and L={} do not overlap",
                    sorted[i].size, sorted[j].size
                )));
            }
            if sorted[i].size == sorted[j].size {
                return Err(Error::Invalid(format!("size {} appears twice", sorted[i].size)));
            }
            pairs_idx.push((i, j));
        }
    }

    let shape_of = |vals: &[Vec<f64>], i: usize, j: usize| {
        pair_shape((&temps[i], &vals[i], &errors[i]), (&temps[j], &vals[j], &errors[j]))
    };

    // bootstrap replicates: per pair the crossing temperature, if any
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut boot: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(options.n_bootstrap); pairs_idx.len()];
    let noisy = errors.iter().flatten().any(|&e| e > 0.0);
    if noisy {
        for _ in 0..options.n_bootstrap {
            let vals: Vec<Vec<f64>> = values
                .iter()
                .zip(&errors)
                .map(|(v, e)| {
                    v.iter()
                        .zip(e)
                        .map(|(&x, &s)| if s > 0.0 { Normal::new(x, s).unwrap().sample(&mut rng) } else { x })
                        .collect()
                })
                .collect();
            for (k, &(i, j)) in pairs_idx.iter().enumerate() {
                boot[k].push(match shape_of(&vals, i, j) {
                    Shape::Cross(t, _) => Some(t),
                    _ => None,
                });
            }
        }
    }

    let mut pairs = Vec::new();
    for (k, &(i, j)) in pairs_idx.iter().enumerate() {
        let sizes = (sorted[i].size, sorted[j].size);
        let pc = match shape_of(&values, i, j) {
            Shape::Cross(t, v) => {
                let reps: Vec<f64> = boot[k].iter().flatten().copied().collect();
                let s_small = local_slope(&temps[i], &values[i], t);
                let s_large = local_slope(&temps[j], &values[j], t);
                let ratio = sizes.1 as f64 / sizes.0 as f64;
                let inv_nu = (s_large / s_small).ln() / ratio.ln();
                PairCrossing {
                    sizes,
                    verdict: CrossingVerdict::Crossing,
                    temperature: Some(t),
                    temperature_err: Some(sd(&reps)),
                    value: Some(v),
                    inverse_nu: inv_nu.is_finite().then_some(inv_nu),
                }
            }
            Shape::Below => PairCrossing {
                sizes,
                verdict: CrossingVerdict::NoCrossing,
                temperature: None,
                temperature_err: None,
                value: None,
                inverse_nu: None,
            },
            Shape::Other => PairCrossing {
                sizes,
                verdict: CrossingVerdict::Ambiguous,
                temperature: None,
                temperature_err: None,
                value: None,
                inverse_nu: None,
            },
        };
        pairs.push(pc);
    }

    let all = |v: CrossingVerdict| pairs.iter().all(|p| p.verdict == v);
    let (none_cross, all_cross) = (all(CrossingVerdict::NoCrossing), all(CrossingVerdict::Crossing));
    let mut estimate = CrossingEstimate {
        verdict: CrossingVerdict::Ambiguous,
        pairs,
        t_c: None,
        t_c_err: None,
        nu: None,
    };
    if none_cross {
        estimate.verdict = CrossingVerdict::NoCrossing;
        return Ok(estimate);
    }
    if !all_cross {
        return Ok(estimate);
    }
    let ts: Vec<f64> = estimate.pairs.iter().map(|p| p.temperature.unwrap()).collect();
    let ss: Vec<f64> = estimate.pairs.iter().map(|p| p.temperature_err.unwrap()).collect();
    let consistent = (0..ts.len()).all(|a| {
        (a + 1..ts.len()).all(|b| (ts[a] - ts[b]).abs() <= options.n_sigma * (ss[a] * ss[a] + ss[b] * ss[b]).sqrt())
    });
    if !consistent {
        return Ok(estimate);
    }
    estimate.verdict = CrossingVerdict::Crossing;
    let t_c = weighted_mean(&ts, &ss);
    // error of the combined estimate from the same replicates, which keeps the
    // correlation between pairs sharing a curve
    let combined: Vec<f64> = (0..boot.first().map_or(0, |b| b.len()))
        .filter_map(|r| {
            let t: Option<Vec<f64>> = boot.iter().map(|b| b[r]).collect();
            t.map(|t| weighted_mean(&t, &ss))
        })
        .collect();
    estimate.t_c = Some(t_c);
    estimate.t_c_err = Some(sd(&combined));
    let inv: Vec<f64> = estimate.pairs.iter().filter_map(|p| p.inverse_nu).collect();
    if inv.len() == estimate.pairs.len() && inv.iter().all(|&x| x > 0.0) {
        estimate.nu = Some(inv.len() as f64 / inv.iter().sum::<f64>());
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(size: usize, f: impl Fn(f64) -> f64, temps: &[f64]) -> Curve<f64> {
        Curve::new(size, temps.to_vec(), temps.iter().map(|&t| f(t)).collect(), vec![0.0; temps.len()]).unwrap()
    }

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn straight_lines_cross_at_planted_point() {
        let t = grid(1.5, 2.5, 11);
        let curves = [4, 8].map(|l| line(l, move |x| 0.5 + l as f64 * (x - 2.0), &t));
        let est = crossing_finder(&curves, &CrossingOptions::default()).unwrap();
        assert_eq!(est.verdict, CrossingVerdict::Crossing);
        assert!((est.t_c.unwrap() - 2.0).abs() < 1e-12);
        assert!((est.pairs[0].value.unwrap() - 0.5).abs() < 1e-12);
        assert!((est.nu.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ordered_constants_do_not_cross() {
        let t = grid(1.0, 3.0, 9);
        let curves: Vec<Curve<f64>> = [4, 6, 8].iter().map(|&l| line(l, move |_| 1.0 / l as f64, &t)).collect();
        let est = crossing_finder(&curves, &CrossingOptions::default()).unwrap();
        assert_eq!(est.verdict, CrossingVerdict::NoCrossing);
        assert!(est.t_c.is_none());
    }

    #[test]
    fn verdict_ignores_order_and_reparametrization() {
        let t = grid(2.0, 4.0, 21);
        let mut curves: Vec<Curve<f64>> = [12, 4, 8]
            .iter()
            .map(|&l| line(l, move |x| (l as f64 * (x - 3.0)).tanh() * 0.3 + 0.6, &t))
            .collect();
        let a = crossing_finder(&curves, &CrossingOptions::default()).unwrap();
        curves.reverse();
        let b = crossing_finder(&curves, &CrossingOptions::default()).unwrap();
        assert_eq!(a.verdict, CrossingVerdict::Crossing);
        assert_eq!(a.t_c, b.t_c);
        for c in &mut curves {
            c.temps.iter_mut().for_each(|x| *x = x.powi(3));
        }
        let c = crossing_finder(&curves, &CrossingOptions::default()).unwrap();
        assert_eq!(c.verdict, a.verdict);
    }

    #[test]
    fn noisy_scaling_data_recover_planted_values() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = grid(2.5, 3.5, 21);
        let sigma = 0.004;
        let curves: Vec<Curve<f64>> = [6usize, 10, 16]
            .iter()
            .map(|&l| {
                let values = t
                    .iter()
                    .map(|&x| 0.6 - 0.05 * l as f64 * (x - 3.0) + sigma * (rng.gen::<f64>() * 2.0 - 1.0) * 1.7)
                    .collect();
                Curve::new(l, t.clone(), values, vec![sigma; t.len()]).unwrap()
            })
            .collect();
        let est = crossing_finder(&curves, &CrossingOptions::default()).unwrap();
        assert_eq!(est.verdict, CrossingVerdict::Crossing, "{est:?}");
        let (tc, err) = (est.t_c.unwrap(), est.t_c_err.unwrap());
        assert!(err > 0.0);
        assert!((tc - 3.0).abs() < 2.0 * err, "{tc} +- {err}");
        let nu = est.nu.unwrap();
        assert!((nu - 1.0).abs() < 0.15, "nu = {nu}");
    }

    #[test]
    fn rejects_disjoint_ranges() {
        let a = line(4, |x| x, &grid(0.0, 1.0, 3));
        let b = line(8, |x| x, &grid(2.0, 3.0, 3));
        assert!(crossing_finder(&[a, b], &CrossingOptions::default()).is_err());
    }
}
