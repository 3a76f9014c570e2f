use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::enumerate::{disorder_mask, exact_partition_racat, exact_partition_rpi, StateTable};
use crate::code::{self, CosetEnumerator, ErrorConfig, LogicalOperatorSet, Pauli};
use crate::error::{Error, Result};
use crate::gf2::{self, BitVec};
use crate::lattice::Lattice;
use crate::models::{Disorder, ModelKind, RacatModel, RpiModel};
use crate::num::{log_sum_exp, Real};

/// `beta(p) = -ln(p / (1 - p)) / 2`, infinite at `p = 0`.
pub fn nishimori_beta(p: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::OutOfRange {
            name: "p",
            detail: format!("Nishimori temperature needs 0 <= p < 0.5, got {p}"),
        });
    }
    if p == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-0.5 * (p / (1.0 - p)).ln())
}

/// Dual inverse temperature with `sinh(2 beta) sinh(2 beta~) = 1`.
pub fn dual_temperature<F: Real>(beta: F) -> Result<F> {
    if !(beta > F::zero()) {
        return Err(Error::OutOfRange {
            name: "beta",
            detail: format!("dual temperature needs beta > 0, got {beta}"),
        });
    }
    let two = F::lit(2.0);
    Ok((two * beta).sinh().recip().asinh() / two)
}

/// Spread of `ln pr([eta]) - ln Z_eta(beta(p))` over a set of classes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassRatioReport {
    pub species: Pauli,
    pub p: f64,
    pub beta: f64,
    pub n_classes: u64,
    pub min_log_ratio: f64,
    pub max_log_ratio: f64,
    /// `exp(max - min) - 1`.
    pub relative_spread: f64,
    /// `N ln(1-p) - beta N - ln |ker|`, the value the ratio should take.
    pub predicted_log_ratio: f64,
}

fn report(species: Pauli, p: f64, n_edges: usize, kernel: u64, n: u64, min: f64, max: f64) -> Result<ClassRatioReport> {
    let beta = nishimori_beta(p)?;
    let nf = n_edges as f64;
    Ok(ClassRatioReport {
        species,
        p,
        beta,
        n_classes: n,
        min_log_ratio: min,
        max_log_ratio: max,
        relative_spread: (max - min).exp_m1(),
        predicted_log_ratio: nf * (1.0 - p).ln() - beta * nf - (kernel as f64).ln(),
    })
}

fn ln_z_from_counts(counts: &[u64], beta: f64) -> f64 {
    let n = (counts.len() - 1) as f64;
    let terms: Vec<f64> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(w, &c)| (c as f64).ln() + beta * (n - 2.0 * w as f64))
        .collect();
    log_sum_exp(&terms)
}

/// Bit-flip classes at `L = 2`: the ratio over all `2^24` error patterns.
///
/// `Z` is built from spin configurations through the bond-sign masks; the
/// class probability from the images of the cube generators. The two sets
/// of masks are computed independently.
pub fn class_ratio_exhaustive(lattice: &Lattice, rates: &[f64]) -> Result<Vec<ClassRatioReport>> {
    if lattice.size() != 2 {
        return Err(Error::BudgetExceeded {
            bits: lattice.n_edges(),
            limit: 24,
        });
    }
    let lat = Arc::new(lattice.clone());
    let model = RpiModel::new(lat.clone(), Arc::new(Disorder::clean(lattice, Pauli::X)))?;
    let table = StateTable::build(&model)?;
    let coset = CosetEnumerator::new(lattice, Pauli::X)?;
    let betas: Vec<f64> = rates.iter().map(|&p| nishimori_beta(p)).collect::<Result<_>>()?;
    let n_edges = lattice.n_edges();
    let kernel = coset.kernel_size() as f64;
    let init = || vec![(f64::INFINITY, f64::NEG_INFINITY); rates.len()];
    let merge = |mut a: Vec<(f64, f64)>, b: Vec<(f64, f64)>| {
        for (x, y) in a.iter_mut().zip(b) {
            x.0 = x.0.min(y.0);
            x.1 = x.1.max(y.1);
        }
        a
    };
    let extremes = (0..1u64 << n_edges)
        .into_par_iter()
        .fold(init, |mut acc, eta| {
            let spin_counts = table.frustration_counts(eta);
            let class_counts = coset.weight_counts(eta);
            for (k, (&p, &beta)) in rates.iter().zip(&betas).enumerate() {
                let ln_p = code::ln_weighted_counts(&class_counts, n_edges, p) - kernel.ln();
                let r = ln_p - ln_z_from_counts(&spin_counts, beta);
                acc[k].0 = acc[k].0.min(r);
                acc[k].1 = acc[k].1.max(r);
            }
            acc
        })
        .reduce(init, merge);
    rates
        .iter()
        .zip(extremes)
        .map(|(&p, (lo, hi))| report(Pauli::X, p, n_edges, coset.kernel_size(), 1 << n_edges, lo, hi))
        .collect()
}

fn log_partition(lattice: &Lattice, eta: &ErrorConfig, beta: f64) -> Result<f64> {
    let d = Disorder::from_errors(eta, 0.0, 0);
    match eta.species {
        Pauli::X => exact_partition_rpi(lattice, &d, beta),
        Pauli::Z => exact_partition_racat(lattice, &d, beta),
    }
}

/// The ratio over the given error patterns, with `Z` from Gray-code
/// enumeration and the class probability from coset enumeration.
pub fn class_ratio_sampled(lattice: &Lattice, etas: &[ErrorConfig], p: f64) -> Result<ClassRatioReport> {
    let species = etas
        .first()
        .ok_or_else(|| Error::InsufficientData("no error patterns".into()))?
        .species;
    let beta = nishimori_beta(p)?;
    let coset = CosetEnumerator::new(lattice, species)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for eta in etas {
        if eta.species != species {
            return Err(Error::SpeciesMismatch {
                expected: species,
                actual: eta.species,
            });
        }
        let r = code::enumerate_class_probability(lattice, eta, p)? - log_partition(lattice, eta, beta)?;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    report(species, p, lattice.n_edges(), coset.kernel_size(), etas.len() as u64, lo, hi)
}

/// Free-energy cost of the class `[eta + lambda]` relative to `[eta]`:
/// `-(ln Z_{eta+lambda} - ln Z_eta) / beta`.
pub fn free_energy_class_ratio(lattice: &Lattice, eta: &ErrorConfig, lambda: &BitVec, beta: f64) -> Result<f64> {
    if lambda.len() != eta.bits.len() {
        return Err(Error::DimensionMismatch {
            expected: eta.bits.len(),
            actual: lambda.len(),
        });
    }
    let shifted = ErrorConfig::new(eta.bits.xor(lambda), eta.species);
    Ok(-(log_partition(lattice, &shifted, beta)? - log_partition(lattice, eta, beta)?) / beta)
}

/// Disorder averages of a site-resolved correlator and of its square.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NishimoriReport {
    pub model: ModelKind,
    pub p: f64,
    pub beta: f64,
    pub displacement: usize,
    pub n_samples: usize,
    /// `[<S_xi>]`
    pub linear: f64,
    pub linear_err: f64,
    /// `[<S_xi>^2]`
    pub square: f64,
    pub square_err: f64,
    /// Paired difference `[<S_xi> - <S_xi>^2]` and its standard error.
    pub difference: f64,
    pub difference_err: f64,
    /// `|difference| < 3 sigma` (or exactly zero when `sigma = 0`).
    pub holds: bool,
}

fn mean_err(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Compares `[<S_xi>]` with `[<S_xi>^2]` at `L = 2` using exact thermal
/// averages per sampled disorder. `S_xi` is the model's correlator product at
/// `displacement` (the `b b` product for RPI, `S^z S^z` for RACAT), averaged
/// over sites. `beta` defaults to the Nishimori value.
pub fn nishimori_identity_check(
    model: ModelKind,
    p: f64,
    n_samples: usize,
    displacement: usize,
    beta: Option<f64>,
    seed: u64,
) -> Result<NishimoriReport> {
    let lat = Arc::new(Lattice::new(2)?);
    let l = lat.size();
    if displacement == 0 || displacement >= l {
        return Err(Error::OutOfRange {
            name: "displacement",
            detail: format!("need 1 <= r < L, got {displacement}"),
        });
    }
    if n_samples == 0 {
        return Err(Error::InsufficientData("no disorder samples".into()));
    }
    let beta = match beta {
        Some(b) => b,
        None => nishimori_beta(p)?,
    };
    let species = model.species();
    let clean = Arc::new(Disorder::clean(&lat, species));
    let table = match model {
        ModelKind::Rpi => StateTable::build(&RpiModel::new(lat.clone(), clean)?)?,
        ModelKind::Racat => StateTable::build(&RacatModel::new(lat.clone(), clean)?)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let etas: Vec<u64> = (0..n_samples)
        .map(|_| {
            let e = code::sample_errors_with(&lat, p, species, &mut rng);
            disorder_mask(&Disorder::from_errors(&e, p, seed))
        })
        .collect::<Result<_>>()?;
    let per_sample: Vec<(f64, f64)> = etas
        .par_iter()
        .map(|&eta| {
            let means = table.pair_means(eta, beta);
            let vals: Vec<f64> = means.chunks(l).map(|c| c[displacement]).collect();
            let n = vals.len() as f64;
            (
                vals.iter().sum::<f64>() / n,
                vals.iter().map(|v| v * v).sum::<f64>() / n,
            )
        })
        .collect();
    let lin: Vec<f64> = per_sample.iter().map(|x| x.0).collect();
    let sq: Vec<f64> = per_sample.iter().map(|x| x.1).collect();
    let diff: Vec<f64> = per_sample.iter().map(|x| x.0 - x.1).collect();
    let (linear, linear_err) = mean_err(&lin);
    let (square, square_err) = mean_err(&sq);
    let (difference, difference_err) = mean_err(&diff);
    let holds = if difference_err == 0.0 {
        difference.abs() < 1e-12
    } else {
        difference.abs() < 3.0 * difference_err
    };
    Ok(NishimoriReport {
        model,
        p,
        beta,
        displacement,
        n_samples,
        linear,
        linear_err,
        square,
        square_err,
        difference,
        difference_err,
        holds,
    })
}

/// Both sides of the disorder-free duality on the periodic `L = 2` lattice:
///
/// `ln Z_A(beta)` and
/// `(|A| - |Q|/2) ln 2 - ln|ker d_B| + (|Q|/2) ln sinh 2beta + ln sum_lambda Z_B^lambda(beta~)`.
///
/// With periodic boundaries the dual sum runs over every closed `zeta`,
/// i.e. over all cosets of the stabilizer image labelled by the phase-flip
/// logicals `lambda`, so the identity is exact at finite size.
pub fn kramers_wannier_periodic(beta: f64) -> Result<(f64, f64)> {
    let lat = Arc::new(Lattice::new(2)?);
    let lhs = exact_partition_rpi(&lat, &Disorder::clean(&lat, Pauli::X), beta)?;
    let dual = dual_temperature(beta)?;
    let racat = RacatModel::new(lat.clone(), Arc::new(Disorder::clean(&lat, Pauli::Z)))?;
    let table = StateTable::build(&racat)?;
    let logicals = LogicalOperatorSet::new(&lat)?;
    let reps: Vec<u64> = logicals
        .for_species(Pauli::Z)
        .iter()
        .map(|b| b.to_u64().expect("L = 2"))
        .collect();
    let sectors: Vec<f64> = (0..1u64 << reps.len())
        .into_par_iter()
        .map(|k| {
            let lambda = reps
                .iter()
                .enumerate()
                .filter(|(i, _)| k >> i & 1 == 1)
                .fold(0u64, |acc, (_, &m)| acc ^ m);
            table.ln_z(lambda, dual)
        })
        .collect();
    let n_b = lat.n_b_generators();
    let rank_b = gf2::rank(&code::b_generator_rows(&lat));
    let ln2 = std::f64::consts::LN_2;
    let q = lat.n_edges() as f64;
    let rhs = (lat.n_cubes() as f64 - q / 2.0) * ln2 - (n_b - rank_b) as f64 * ln2
        + q / 2.0 * (2.0 * beta).sinh().ln()
        + log_sum_exp(&sectors);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn nishimori_beta_values() {
        assert_eq!(nishimori_beta(0.0).unwrap(), f64::INFINITY);
        let b = nishimori_beta(0.1).unwrap();
        assert!((b - 0.5 * 9f64.ln()).abs() < 1e-14);
        assert!(nishimori_beta(0.5).is_err());
    }

    #[test]
    fn dual_temperature_properties() {
        let sd = 0.5 * (1.0 + 2f64.sqrt()).ln();
        assert!((dual_temperature(sd).unwrap() - sd).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let b: f64 = rng.gen_range(0.05..3.0);
            let back = dual_temperature(dual_temperature(b).unwrap()).unwrap();
            assert!((back - b).abs() < 1e-12 * b.max(1.0), "{b} {back}");
        }
        let mut prev = f64::INFINITY;
        for b in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let d = dual_temperature(b).unwrap();
            assert!(d > 0.0 && d < prev);
            prev = d;
        }
        assert!(dual_temperature(0.0).is_err());
        assert!((dual_temperature(0.3f32).unwrap() as f64 - dual_temperature(0.3).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn class_ratio_is_constant_for_sampled_classes() {
        let lat = Lattice::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for species in [Pauli::X, Pauli::Z] {
            let etas: Vec<ErrorConfig> = (0..6)
                .map(|_| code::sample_errors_with(&lat, 0.3, species, &mut rng))
                .collect();
            let r = class_ratio_sampled(&lat, &etas, 0.05).unwrap();
            assert!(r.relative_spread < 1e-10, "{r:?}");
            assert!((r.min_log_ratio - r.predicted_log_ratio).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn free_energy_of_trivial_and_logical_shifts() {
        let lat = Lattice::new(2).unwrap();
        let beta = nishimori_beta(0.05).unwrap();
        let eta = ErrorConfig::zeros(&lat, Pauli::X);
        let zero = BitVec::zeros(lat.n_edges());
        assert_eq!(free_energy_class_ratio(&lat, &eta, &zero, beta).unwrap(), 0.0);
        let stab = lat.cube_support(crate::lattice::CubeId(3));
        assert!(free_energy_class_ratio(&lat, &eta, &stab, beta).unwrap().abs() < 1e-10);
        let logicals = LogicalOperatorSet::new(&lat).unwrap();
        for lambda in logicals.for_species(Pauli::X) {
            assert!(free_energy_class_ratio(&lat, &eta, lambda, beta).unwrap() > 0.0);
        }
    }

    #[test]
    fn nishimori_identity_trivial_at_zero_rate() {
        for m in [ModelKind::Rpi, ModelKind::Racat] {
            let r = nishimori_identity_check(m, 0.0, 3, 1, None, 1).unwrap();
            assert_eq!(r.difference, 0.0);
            assert!(r.holds);
        }
    }

    #[test]
    fn nishimori_identity_small_sample() {
        let r = nishimori_identity_check(ModelKind::Rpi, 0.1, 2000, 1, None, 4).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn periodic_duality_is_exact() {
        for beta in [0.2, 0.4406867935, 0.7, 1.5] {
            let (lhs, rhs) = kramers_wannier_periodic(beta).unwrap();
            assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "beta={beta}: {lhs} vs {rhs}");
        }
    }
}
