use serde::{Deserialize, Serialize};

use super::crossing::CrossingVerdict;
use crate::code::Pauli;
use crate::error::{Error, Result};

/// Finite-size transition temperature `T_c(L)` with its error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizePoint {
    pub size: usize,
    pub t_c: f64,
    pub err: f64,
}

/// Result of fitting `T_c(L) = T_c + b L^-2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FssFit {
    pub t_c: f64,
    pub t_c_err: f64,
    pub b: f64,
    pub b_err: f64,
    pub chi2: f64,
    pub dof: usize,
}

/// Weighted least squares of `T_c(L)` against `L^-(d-1)` with `d = 3`.
///
/// Points with zero error get unit weight, so noiseless data reduce to an
/// ordinary fit.
pub fn fss_first_order_fit(points: &[SizePoint]) -> Result<FssFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "first-order extrapolation needs at least 3 sizes, got {}",
            points.len()
        )));
    }
    let noiseless = points.iter().all(|p| p.err == 0.0);
    if !noiseless && points.iter().any(|p| !(p.err > 0.0)) {
        return Err(Error::Invalid("errors must be all positive or all zero".into()));
    }
    let w = |p: &SizePoint| if noiseless { 1.0 } else { 1.0 / (p.err * p.err) };
    let x = |p: &SizePoint| (p.size as f64).powi(-2);
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let (wi, xi) = (w(p), x(p));
        s += wi;
        sx += wi * xi;
        sy += wi * p.t_c;
        sxx += wi * xi * xi;
        sxy += wi * xi * p.t_c;
    }
    let det = s * sxx - sx * sx;
    if !(det.abs() > 0.0) {
        return Err(Error::Invalid("sizes must not all coincide".into()));
    }
    let t_c = (sxx * sy - sx * sxy) / det;
    let b = (s * sxy - sx * sy) / det;
    let chi2: f64 = points
        .iter()
        .map(|p| w(p) * (p.t_c - t_c - b * x(p)).powi(2))
        .sum();
    let dof = points.len() - 2;
    // without input errors the scatter sets the scale
    let scale = if noiseless { chi2 / dof as f64 } else { 1.0 };
    Ok(FssFit {
        t_c,
        t_c_err: (scale * sxx / det).sqrt(),
        b,
        b_err: (scale * s / det).sqrt(),
        chi2,
        dof,
    })
}

/// Maximum of sampled data, refined by a parabola through the top three points.
///
/// Returns `(x, y)` at the vertex, or the edge sample if the maximum sits on
/// the boundary.
pub fn peak_location(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.is_empty() {
        return Err(Error::InsufficientData("peak of an empty curve".into()));
    }
    let i = (0..ys.len())
        .max_by(|&a, &b| ys[a].total_cmp(&ys[b]))
        .unwrap();
    if i == 0 || i + 1 == xs.len() {
        return Ok((xs[i], ys[i]));
    }
    let (x0, x1, x2) = (xs[i - 1], xs[i], xs[i + 1]);
    let (y0, y1, y2) = (ys[i - 1], ys[i], ys[i + 1]);
    // Lagrange form of the quadratic through three points
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a < 0.0) {
        return Ok((x1, y1));
    }
    let bx = d01 - a * (x0 + x1);
    let xv = -bx / (2.0 * a);
    let yv = y0 + d01 * (xv - x0) + a * (xv - x0) * (xv - x1);
    Ok((xv, yv))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionOrder {
    First,
    Second,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    /// Bimodal energy histograms plus extrapolated peak positions.
    HistogramFss,
    Crossing,
}

/// One row of the phase diagram.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub p: f64,
    pub t_c: Option<f64>,
    pub err: Option<f64>,
    pub order: TransitionOrder,
    pub method: EstimateMethod,
}

impl PhasePoint {
    pub fn transition(p: f64, t_c: f64, err: f64, order: TransitionOrder, method: EstimateMethod) -> Result<Self> {
        if !(err > 0.0) || order == TransitionOrder::None {
            return Err(Error::Invalid(format!(
                "a transition at p={p} needs an order and a positive error, got {err}"
            )));
        }
        Ok(Self {
            p,
            t_c: Some(t_c),
            err: Some(err),
            order,
            method,
        })
    }

    pub fn none(p: f64, method: EstimateMethod) -> Self {
        Self {
            p,
            t_c: None,
            err: None,
            order: TransitionOrder::None,
            method,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub p_c: f64,
    pub uncertainty: f64,
    pub species: Pauli,
    pub verdicts: Vec<(f64, CrossingVerdict)>,
    /// How `p_c` and its uncertainty were obtained.
    pub rule: String,
}

/// Bracketing rule on a grid of crossing verdicts.
///
/// `p_c` is the midpoint between the largest `p` with a crossing and the next
/// larger `p` without one; the uncertainty is half that gap, but never less
/// than the finest grid step.
pub fn estimate_threshold(species: Pauli, verdicts: &[(f64, CrossingVerdict)]) -> Result<ThresholdEstimate> {
    if verdicts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "threshold estimate needs at least 3 verdicts, got {}",
            verdicts.len()
        )));
    }
    let mut sorted = verdicts.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.iter().any(|&(p, _)| !(p > 0.0 && p < 0.5)) {
        return Err(Error::OutOfRange {
            name: "p",
            detail: "verdict rates must lie in (0, 0.5)".into(),
        });
    }
    let below = sorted
        .iter()
        .filter(|v| v.1 == CrossingVerdict::Crossing)
        .map(|v| v.0)
        .fold(None, |m: Option<f64>, p| Some(m.map_or(p, |m| m.max(p))));
    let no_bracket = || Error::Invalid("verdicts do not bracket a threshold".into());
    let below = below.ok_or_else(no_bracket)?;
    let above = sorted
        .iter()
        .find(|v| v.0 > below && v.1 != CrossingVerdict::Crossing)
        .map(|v| v.0)
        .ok_or_else(no_bracket)?;
    let step = sorted
        .windows(2)
        .map(|w| w[1].0 - w[0].0)
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    Ok(ThresholdEstimate {
        p_c: 0.5 * (below + above),
        uncertainty: (0.5 * (above - below)).max(step),
        species,
        verdicts: sorted,
        rule: "midpoint of last crossing and next non-crossing; error max(half gap, grid step)".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn pt(size: usize, t_c: f64, err: f64) -> SizePoint {
        SizePoint { size, t_c, err }
    }

    #[test]
    fn exact_data_are_interpolated() {
        let pts: Vec<SizePoint> = [4, 6, 8, 10].iter().map(|&l| pt(l, 3.0 + 2.0 / (l * l) as f64, 0.0)).collect();
        let fit = fss_first_order_fit(&pts).unwrap();
        assert!((fit.t_c - 3.0).abs() < 1e-12);
        assert!((fit.b - 2.0).abs() < 1e-12);
        assert!(fit.chi2 < 1e-20);
    }

    #[test]
    fn too_few_points() {
        assert!(fss_first_order_fit(&[pt(4, 1.0, 0.1), pt(6, 1.0, 0.1)]).is_err());
    }

    #[test]
    fn coverage_with_one_percent_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sizes = [4usize, 6, 8, 10];
        let mut covered = 0;
        for _ in 0..100 {
            let pts: Vec<SizePoint> = sizes
                .iter()
                .map(|&l| {
                    let exact = 3.0 + 2.0 / (l * l) as f64;
                    let err = 0.01 * exact;
                    pt(l, Normal::new(exact, err).unwrap().sample(&mut rng), err)
                })
                .collect();
            let fit = fss_first_order_fit(&pts).unwrap();
            if (fit.t_c - 3.0).abs() <= 2.0 * fit.t_c_err {
                covered += 1;
            }
        }
        assert!(covered >= 90, "covered {covered}/100");
    }

    #[test]
    fn parabola_vertex() {
        let xs: Vec<f64> = (0..7).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 4.0 - (x - 1.3f64).powi(2)).collect();
        let (x, y) = peak_location(&xs, &ys).unwrap();
        assert!((x - 1.3).abs() < 1e-12 && (y - 4.0).abs() < 1e-12);
    }

    fn grid_verdicts(last_crossing: usize) -> Vec<(f64, CrossingVerdict)> {
        (0..6)
            .map(|i| {
                let p = 0.146 + 0.002 * i as f64;
                let v = if i <= last_crossing {
                    CrossingVerdict::Crossing
                } else {
                    CrossingVerdict::Ambiguous
                };
                (p, v)
            })
            .collect()
    }

    #[test]
    fn bracketing_on_a_regular_grid() {
        let est = estimate_threshold(Pauli::X, &grid_verdicts(3)).unwrap();
        assert!((est.p_c - 0.153).abs() < 1e-12);
        assert!((est.uncertainty - 0.002).abs() < 1e-12);
    }

    #[test]
    fn no_bracket() {
        assert!(estimate_threshold(Pauli::X, &grid_verdicts(5)).is_err());
        let none: Vec<_> = grid_verdicts(5).into_iter().map(|(p, _)| (p, CrossingVerdict::NoCrossing)).collect();
        assert!(estimate_threshold(Pauli::X, &none).is_err());
    }

    #[test]
    fn phase_point_requires_error() {
        assert!(PhasePoint::transition(0.1, 2.0, 0.0, TransitionOrder::First, EstimateMethod::HistogramFss).is_err());
        assert!(PhasePoint::transition(0.1, 2.0, 0.01, TransitionOrder::First, EstimateMethod::HistogramFss).is_ok());
    }

    proptest! {
        #[test]
        fn adding_a_larger_crossing_never_lowers_threshold(
            k in 1usize..5,
            extra in 0usize..6,
        ) {
            let base = grid_verdicts(k - 1);
            let before = estimate_threshold(Pauli::Z, &base).unwrap().p_c;
            let mut more = base.clone();
            let p_extra = 0.146 + 0.002 * extra as f64;
            if let Some(slot) = more.iter_mut().find(|v| (v.0 - p_extra).abs() < 1e-12) {
                slot.1 = CrossingVerdict::Crossing;
            }
            more.push((0.170, CrossingVerdict::Ambiguous));
            let after = estimate_threshold(Pauli::Z, &more).unwrap().p_c;
            prop_assert!(after >= before - 1e-15);
        }
    }
}
