use rand::{Rng, RngCore};

use crate::models::SpinModel;
use crate::num::Real;

/// Heat-bath acceptance thresholds for one inverse temperature.
///
/// Entry `h + max_field` holds `P(S = +1 | h) * 2^64`, so a uniform `u64`
/// below the threshold sets the spin up.
#[derive(Clone, Debug)]
pub struct HeatBathTable {
    max_field: i32,
    thresholds: Vec<u64>,
}

impl HeatBathTable {
    pub fn new<F: Real>(beta: F, max_field: i32) -> Self {
        let beta = beta.to_f64_lossy();
        let thresholds = (-max_field..=max_field)
            .map(|h| {
                let p = up_probability(beta, h);
                let scaled = p * 18_446_744_073_709_551_616.0;
                if scaled >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    scaled as u64
                }
            })
            .collect();
        Self {
            max_field,
            thresholds,
        }
    }

    #[inline]
    pub fn threshold(&self, h: i32) -> u64 {
        debug_assert!(h.abs() <= self.max_field);
        self.thresholds[(h + self.max_field) as usize]
    }
}

/// `P(S = +1 | h) = 1 / (1 + exp(-2 beta h))`.
pub fn up_probability(beta: f64, h: i32) -> f64 {
    let x = -2.0 * beta * h as f64;
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// One heat-bath pass in site order. Returns the energy change.
pub fn heat_bath_sweep<M: SpinModel, R: RngCore + ?Sized>(
    model: &M,
    state: &mut M::State,
    table: &HeatBathTable,
    rng: &mut R,
) -> i64 {
    let mut delta = 0i64;
    for site in 0..model.n_sites() {
        let h = model.local_field(state, site);
        let new = if rng.next_u64() < table.threshold(h) { 1 } else { -1 };
        let old = model.spin(state, site);
        if new != old {
            delta += 2 * old as i64 * h as i64;
            model.flip(state, site);
        }
    }
    delta
}

/// Microcanonical pass: flips every spin whose local field is zero at the
/// moment it is visited. Returns the number of flips.
pub fn overrelaxation_sweep<M: SpinModel>(model: &M, state: &mut M::State) -> usize {
    let mut flips = 0;
    for site in 0..model.n_sites() {
        if model.local_field(state, site) == 0 {
            model.flip(state, site);
            flips += 1;
        }
    }
    flips
}

/// Metropolis probability for exchanging configurations between two
/// temperatures: `min(1, exp((beta_i - beta_j)(E_i - E_j)))`.
pub fn swap_acceptance<F: Real>(beta_i: F, beta_j: F, e_i: i64, e_j: i64) -> F {
    let x = (beta_i - beta_j) * F::from_i64(e_i - e_j).unwrap_or_else(F::nan);
    if x >= F::zero() {
        F::one()
    } else {
        x.exp()
    }
}

pub(crate) fn accept<F: Real, R: Rng + ?Sized>(prob: F, rng: &mut R) -> bool {
    prob >= F::one() || rng.gen::<f64>() < prob.to_f64_lossy()
}

#[cfg(test)]
pub(crate) mod toy {
    //! Two coupled spins in a field; small enough to enumerate.

    use crate::code::Pauli;
    use crate::lattice::Lattice;
    use crate::models::{Disorder, ModelKind, PlaneSpec, SpinModel};
    use rand::Rng;

    #[derive(Debug)]
    pub struct Pair {
        pub coupling: i32,
        pub field: i32,
        lattice: Lattice,
        disorder: Disorder,
    }

    impl Pair {
        pub fn new(coupling: i32, field: i32) -> Self {
            let lattice = Lattice::new(2).unwrap();
            let disorder = Disorder::clean(&lattice, Pauli::X);
            Self {
                coupling,
                field,
                lattice,
                disorder,
            }
        }

        pub fn gibbs(&self, beta: f64) -> [f64; 4] {
            let mut w = [0.0; 4];
            for (k, wk) in w.iter_mut().enumerate() {
                *wk = (-beta * self.energy(&Self::decode(k)) as f64).exp();
            }
            let z: f64 = w.iter().sum();
            w.map(|x| x / z)
        }

        pub fn decode(k: usize) -> Vec<i8> {
            vec![if k & 1 == 0 { 1 } else { -1 }, if k & 2 == 0 { 1 } else { -1 }]
        }

        pub fn encode(s: &[i8]) -> usize {
            (s[0] < 0) as usize | ((s[1] < 0) as usize) << 1
        }
    }

    impl SpinModel for Pair {
        type State = Vec<i8>;

        fn kind(&self) -> ModelKind {
            ModelKind::Rpi
        }
        fn lattice(&self) -> &Lattice {
            &self.lattice
        }
        fn disorder(&self) -> &Disorder {
            &self.disorder
        }
        fn n_sites(&self) -> usize {
            2
        }
        fn max_field(&self) -> i32 {
            self.coupling.abs() + self.field.abs()
        }
        fn energy(&self, s: &Vec<i8>) -> i64 {
            -(self.coupling * (s[0] * s[1]) as i32 + self.field * (s[0] + s[1]) as i32) as i64
        }
        fn local_field(&self, s: &Vec<i8>, site: usize) -> i32 {
            self.coupling * s[1 - site] as i32 + self.field
        }
        fn spin(&self, s: &Vec<i8>, site: usize) -> i8 {
            s[site]
        }
        fn flip(&self, s: &mut Vec<i8>, site: usize) {
            s[site] = -s[site];
        }
        fn uniform_state(&self) -> Vec<i8> {
            vec![1, 1]
        }
        fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<i8> {
            crate::models::random_spins(2, rng)
        }
        fn plane_flip(&self, _: &mut Vec<i8>, _: PlaneSpec) -> crate::Result<()> {
            Ok(())
        }
    }

    /// Pearson chi-square p-value of `counts` against `probs`.
    pub fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let n: u64 = counts.iter().sum();
        let stat: f64 = counts
            .iter()
            .zip(probs)
            .map(|(&c, &p)| {
                let e = p * n as f64;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        let dof = (counts.len() - 1) as f64;
        1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
    }
}

#[cfg(test)]
mod tests {
    use super::toy::{chi_square_p, Pair};
    use super::*;
    use crate::code::Pauli;
    use crate::lattice::Lattice;
    use crate::models::{Disorder, RpiModel, RpiState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn conditional_probabilities() {
        assert_eq!(up_probability(0.7, 0), 0.5);
        assert!(up_probability(1e6, 3) == 1.0);
        assert!(up_probability(1e6, -3) == 0.0);
        let p = up_probability(0.3, 2);
        assert!((p - 1.0 / (1.0 + (-1.2f64).exp())).abs() < 1e-15);
        let t = HeatBathTable::new(0.4f64, 12);
        assert_eq!(t.threshold(0), 1 << 63);
        assert!(t.threshold(12) > t.threshold(4));
        assert_eq!(HeatBathTable::new(1e9f64, 4).threshold(4), u64::MAX);
    }

    #[test]
    fn swap_probability() {
        assert_eq!(swap_acceptance(0.5, 0.4, -7, -7), 1.0);
        let a = swap_acceptance(0.5f64, 0.4, -100, -90);
        assert!((a - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(swap_acceptance(0.4f64, 0.5, -100, -90), 1.0);
    }

    #[test]
    fn heat_bath_samples_gibbs_distribution() {
        let model = Pair::new(1, 1);
        let beta = 0.35;
        let table = HeatBathTable::new(beta, model.max_field());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut s = model.uniform_state();
        let mut counts = [0u64; 4];
        let mut e = model.energy(&s);
        for _ in 0..500_000 {
            e += heat_bath_sweep(&model, &mut s, &table, &mut rng);
            assert_eq!(e, model.energy(&s));
            counts[Pair::encode(&s)] += 1;
        }
        let p = chi_square_p(&counts, &model.gibbs(beta));
        assert!(p > 0.01, "chi-square p = {p}, counts {counts:?}");
    }

    #[test]
    fn overrelaxation_conserves_energy() {
        let lat = Arc::new(Lattice::new(3).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let dis = Arc::new(Disorder::sample(&lat, 0.3, Pauli::X, 4).unwrap());
        let m = RpiModel::new(lat.clone(), dis).unwrap();
        let mut s = m.random_state(&mut rng);
        for _ in 0..50 {
            let e = m.energy(&s);
            overrelaxation_sweep(&m, &mut s);
            assert_eq!(m.energy(&s), e);
        }
        let clean = RpiModel::new(lat.clone(), Arc::new(Disorder::clean(&lat, Pauli::X))).unwrap();
        let mut up = RpiState::uniform(&lat);
        assert_eq!(overrelaxation_sweep(&clean, &mut up), 0);
    }

    #[test]
    fn overrelaxation_moves_zero_field_sites() {
        // search small realizations and states for one with a zero field
        let lat = Arc::new(Lattice::new(2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut found = false;
        'outer: for seed in 0..50 {
            let dis = Arc::new(Disorder::sample(&lat, 0.3, Pauli::X, seed).unwrap());
            let m = RpiModel::new(lat.clone(), dis).unwrap();
            for _ in 0..50 {
                let s = m.random_state(&mut rng);
                if (0..m.n_sites()).any(|c| m.local_field(&s, c) == 0) {
                    let mut t = s.clone();
                    assert!(overrelaxation_sweep(&m, &mut t) > 0);
                    assert_ne!(t, s);
                    assert_eq!(m.energy(&t), m.energy(&s));
                    found = true;
                    break 'outer;
                }
            }
        }
        assert!(found);
    }
}
