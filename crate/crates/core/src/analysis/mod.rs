//! From disorder-averaged observables to transition temperatures and thresholds.

mod crossing;
mod fss;
mod pipeline;

pub use crossing::{crossing_finder, CrossingEstimate, CrossingOptions, CrossingVerdict, Curve, PairCrossing};
pub use fss::{
    estimate_threshold, fss_first_order_fit, peak_location, EstimateMethod, FssFit, PhasePoint, SizePoint,
    ThresholdEstimate, TransitionOrder,
};
pub use pipeline::{
    analyze_directory, analyze_ensembles, analyze_point, load_ensembles, read_averages, AnalysisOptions,
    AnalysisReport, AveragesRow, EnsembleCurves, PointAnalysis, ThresholdReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Temperature on the Nishimori line, `T = -2 / ln(p / (1 - p))`.
pub fn nishimori_temperature<F: Real>(p: F) -> Result<F> {
    if !(p > F::zero() && p < F::lit(0.5)) {
        return Err(Error::OutOfRange {
            name: "p",
            detail: format!("Nishimori line is defined for 0 < p < 0.5, got {p}"),
        });
    }
    Ok(-F::lit(2.0) / (p / (F::one() - p)).ln())
}

/// Inverse of [`nishimori_temperature`].
pub fn nishimori_rate<F: Real>(t: F) -> Result<F> {
    if !(t > F::zero()) || !t.is_finite() {
        return Err(Error::OutOfRange {
            name: "T",
            detail: format!("Nishimori rate needs a finite T > 0, got {t}"),
        });
    }
    Ok(F::one() / (F::one() + (F::lit(2.0) / t).exp()))
}

/// Binary Shannon entropy in bits.
pub fn shannon_entropy(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfRange {
            name: "p",
            detail: format!("binary entropy needs 0 < p < 1, got {p}"),
        });
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyCheck {
    pub p_x: f64,
    pub p_z: f64,
    pub total: f64,
    pub satisfies_bound: bool,
    pub near_saturation: bool,
}

/// Sum `H(p_x) + H(p_z)` compared with one.
pub fn shannon_duality_check(p_x: f64, p_z: f64) -> Result<EntropyCheck> {
    const SATURATION: f64 = 0.02;
    let total = shannon_entropy(p_x)? + shannon_entropy(p_z)?;
    Ok(EntropyCheck {
        p_x,
        p_z,
        total,
        satisfies_bound: total <= 1.0,
        near_saturation: (total - 1.0).abs() <= SATURATION,
    })
}

/// `ln Z(beta_1) - ln Z(beta_0) = -int <E> d beta`, trapezoidal on the given grid.
///
/// `betas` must be strictly monotone; `energies` are total-energy means.
pub fn integrate_ln_z(betas: &[f64], energies: &[f64]) -> Result<f64> {
    if betas.len() != energies.len() {
        return Err(Error::DimensionMismatch {
            expected: betas.len(),
            actual: energies.len(),
        });
    }
    if betas.len() < 2 {
        return Err(Error::InsufficientData("integration needs two points".into()));
    }
    Ok(-betas
        .windows(2)
        .zip(energies.windows(2))
        .map(|(b, e)| 0.5 * (b[1] - b[0]) * (e[0] + e[1]))
        .sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nishimori_examples() {
        let p = 1.0 / (1.0 + 2f64.exp());
        assert!((nishimori_temperature(p).unwrap() - 1.0).abs() < 1e-12);
        let t = nishimori_temperature(0.152f64).unwrap();
        assert!((t - 1.1635).abs() < 5e-5, "{t}");
        assert!(nishimori_temperature(1e-12f64).unwrap() < 0.1);
        for bad in [0.0, 0.5, 0.7, -0.1] {
            assert!(nishimori_temperature(bad).is_err());
        }
        let t32 = nishimori_temperature(0.152f32).unwrap();
        assert!((t32 as f64 - t).abs() < 1e-5);
    }

    #[test]
    fn entropy_examples() {
        assert!((shannon_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        let c = shannon_duality_check(0.033, 0.019).unwrap();
        assert!(c.total < 1.0 && c.satisfies_bound);
        assert!(shannon_duality_check(0.0, 0.1).is_err());
    }

    #[test]
    fn integration_of_a_linear_energy() {
        // <E> = -2 beta integrates to beta^2 exactly under the trapezoid rule
        let b: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let e: Vec<f64> = b.iter().map(|x| -2.0 * x).collect();
        assert!((integrate_ln_z(&b, &e).unwrap() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn nishimori_round_trip(p in 0.01f64..0.49) {
            let t = nishimori_temperature(p).unwrap();
            prop_assert!((nishimori_rate(t).unwrap() - p).abs() < 1e-12);
        }
    }
}
