use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScheme {
    Geometric,
    Linear,
    /// Re-spaced from measured swap acceptance, or supplied verbatim.
    Custom,
}

impl std::str::FromStr for GridScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "geometric" => Ok(GridScheme::Geometric),
            "linear" => Ok(GridScheme::Linear),
            "custom" => Ok(GridScheme::Custom),
            other => Err(format!("unknown grid scheme `{other}`")),
        }
    }
}

/// Strictly increasing temperatures for parallel tempering.
#[derive(Clone, Debug, PartialEq)]
pub struct TemperatureGrid<F> {
    temps: Vec<F>,
    scheme: GridScheme,
}

impl<F: Real> TemperatureGrid<F> {
    pub fn new(n: usize, t_min: F, t_max: F, scheme: GridScheme) -> Result<Self> {
        if n < 2 {
            return Err(Error::OutOfRange {
                name: "n_temps",
                detail: format!("need at least 2 temperatures, got {n}"),
            });
        }
        if !(t_min > F::zero() && t_min < t_max && t_max.is_finite()) {
            return Err(Error::OutOfRange {
                name: "temperature range",
                detail: format!("need 0 < T_min < T_max < inf, got [{t_min}, {t_max}]"),
            });
        }
        let last = F::from_usize_lossy(n - 1);
        let temps = (0..n)
            .map(|i| {
                let f = F::from_usize_lossy(i) / last;
                match scheme {
                    GridScheme::Linear => t_min + (t_max - t_min) * f,
                    _ => t_min * (t_max / t_min).powf(f),
                }
            })
            .collect::<Vec<_>>();
        let scheme = match scheme {
            GridScheme::Custom => GridScheme::Geometric,
            s => s,
        };
        let mut grid = Self { temps, scheme };
        // pin the end points against rounding
        grid.temps[0] = t_min;
        grid.temps[n - 1] = t_max;
        Ok(grid)
    }

    pub fn geometric(n: usize, t_min: F, t_max: F) -> Result<Self> {
        Self::new(n, t_min, t_max, GridScheme::Geometric)
    }

    pub fn from_temperatures(temps: Vec<F>) -> Result<Self> {
        if temps.len() < 2 {
            return Err(Error::OutOfRange {
                name: "n_temps",
                detail: format!("need at least 2 temperatures, got {}", temps.len()),
            });
        }
        if temps[0] <= F::zero() || temps.windows(2).any(|w| !(w[0] < w[1])) || !temps[temps.len() - 1].is_finite() {
            return Err(Error::Invalid("temperatures must be positive, finite and strictly increasing".into()));
        }
        Ok(Self {
            temps,
            scheme: GridScheme::Custom,
        })
    }

    pub fn len(&self) -> usize {
        self.temps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.temps.is_empty()
    }

    pub fn scheme(&self) -> GridScheme {
        self.scheme
    }

    pub fn temperatures(&self) -> &[F] {
        &self.temps
    }

    pub fn t_min(&self) -> F {
        self.temps[0]
    }

    pub fn t_max(&self) -> F {
        self.temps[self.temps.len() - 1]
    }

    pub fn betas(&self) -> Vec<F> {
        self.temps.iter().map(|&t| t.recip()).collect()
    }

    /// Moves the interior temperatures so that the measured swap rates of the
    /// adjacent pairs would become equal.
    ///
    /// Each interval gets a cost `-ln(rate)`, treated as uniform in `ln T`
    /// inside the interval; the new points split the cumulative cost evenly.
    /// End points are kept.
    pub fn respaced(&self, rates: &[f64]) -> Result<Self> {
        let n = self.temps.len();
        if rates.len() != n - 1 {
            return Err(Error::DimensionMismatch {
                expected: n - 1,
                actual: rates.len(),
            });
        }
        let floor = 1e-3;
        let cost: Vec<f64> = rates.iter().map(|&r| -(r.clamp(floor, 1.0 - 1e-9)).ln()).collect();
        let logt: Vec<f64> = self.temps.iter().map(|t| t.to_f64_lossy().ln()).collect();
        let mut cum = vec![0.0; n];
        for i in 0..n - 1 {
            cum[i + 1] = cum[i] + cost[i];
        }
        let total = cum[n - 1];
        let mut temps = self.temps.clone();
        let mut j = 0;
        for (k, slot) in temps.iter_mut().enumerate().take(n - 1).skip(1) {
            let target = total * k as f64 / (n - 1) as f64;
            while j < n - 2 && cum[j + 1] < target {
                j += 1;
            }
            let frac = if cost[j] > 0.0 { (target - cum[j]) / cost[j] } else { 0.0 };
            *slot = F::lit((logt[j] + frac * (logt[j + 1] - logt[j])).exp());
        }
        let mut out = Self::from_temperatures(temps)?;
        out.scheme = GridScheme::Custom;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_has_constant_ratio() {
        let g = TemperatureGrid::<f64>::geometric(46, 1.0, 5.46).unwrap();
        assert_eq!(g.len(), 46);
        assert_eq!(g.t_min(), 1.0);
        assert_eq!(g.t_max(), 5.46);
        let r = g.temperatures()[1] / g.temperatures()[0];
        for w in g.temperatures().windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
        let gf = TemperatureGrid::<f32>::geometric(8, 0.5, 2.0).unwrap();
        assert!(gf.betas()[0] == 2.0);
    }

    #[test]
    fn linear_grid() {
        let g = TemperatureGrid::<f64>::new(5, 1.0, 2.0, GridScheme::Linear).unwrap();
        assert_eq!(g.temperatures(), &[1.0, 1.25, 1.5, 1.75, 2.0]);
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(TemperatureGrid::<f64>::geometric(1, 1.0, 2.0).is_err());
        assert!(TemperatureGrid::<f64>::geometric(4, 2.0, 1.0).is_err());
        assert!(TemperatureGrid::<f64>::geometric(4, 0.0, 1.0).is_err());
        assert!(TemperatureGrid::<f64>::from_temperatures(vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn respacing_equal_rates_is_identity_in_log_t() {
        let g = TemperatureGrid::<f64>::geometric(6, 1.0, 3.0).unwrap();
        let r = g.respaced(&[0.5; 5]).unwrap();
        for (a, b) in g.temperatures().iter().zip(r.temperatures()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn respacing_shrinks_low_acceptance_intervals() {
        let g = TemperatureGrid::<f64>::geometric(5, 1.0, 2.0).unwrap();
        let r = g.respaced(&[0.9, 0.9, 0.1, 0.9]).unwrap();
        let old = g.temperatures()[3] - g.temperatures()[2];
        let new_gap = (2..4)
            .map(|i| r.temperatures()[i + 1] - r.temperatures()[i])
            .fold(f64::INFINITY, f64::min);
        assert!(new_gap < old);
        assert_eq!(r.scheme(), GridScheme::Custom);
        assert_eq!(r.t_min(), 1.0);
        assert_eq!(r.t_max(), 2.0);
    }
}
