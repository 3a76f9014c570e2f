use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::lattice::Lattice;
use crate::models::{Disorder, RacatModel, RacatState, RpiModel, RpiState, SpinModel};
use crate::observables::{xi_second_moment, Measurable};

/// Sign pattern of the individual bond terms of a configuration.
pub trait BondTerms: SpinModel {
    /// Bit `l` is set when the spin product on bond `l` is `-1`, so that
    /// `H = -sum_l tau_l (-1)^{bit_l}`.
    fn bond_signs(&self, state: &Self::State) -> BitVec;
}

impl BondTerms for RpiModel {
    fn bond_signs(&self, state: &RpiState) -> BitVec {
        let lat = self.lattice();
        let mut bits = BitVec::zeros(lat.n_edges());
        for (e, cs) in lat.edge_cube_table().iter().enumerate() {
            let prod: i8 = cs.iter().map(|&c| state.spins[c as usize]).product();
            if prod < 0 {
                bits.set(e, true);
            }
        }
        bits
    }
}

impl BondTerms for RacatModel {
    fn bond_signs(&self, state: &RacatState) -> BitVec {
        use crate::lattice::Axis;
        let lat = self.lattice();
        let mut bits = BitVec::zeros(lat.n_edges());
        for v in 0..lat.n_vertices() {
            let c = lat.coords(v);
            for axis in Axis::ALL {
                let mut d = [0isize; 3];
                d[axis.index()] = 1;
                let w = lat.shift(c, d);
                if state.component(v, axis) * state.component(w, axis) < 0 {
                    bits.set(3 * v + axis.index(), true);
                }
            }
        }
        bits
    }
}

/// Number of configurations at each total energy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityOfStates {
    /// Energy of `counts[0]`.
    pub e_min: i64,
    pub counts: Vec<u64>,
}

/// Largest number of spins enumerated by [`density_of_states`].
pub const MAX_DOS_SITES: usize = 32;

impl DensityOfStates {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn levels(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (self.e_min + i as i64, c))
    }

    pub fn ground_energy(&self) -> i64 {
        self.levels().next().map(|(e, _)| e).unwrap_or(0)
    }

    pub fn ground_degeneracy(&self) -> u64 {
        self.levels().next().map(|(_, c)| c).unwrap_or(0)
    }

    /// `ln sum_E g(E) exp(-beta E)`.
    pub fn ln_z(&self, beta: f64) -> f64 {
        let terms: Vec<f64> = self.levels().map(|(e, c)| (c as f64).ln() - beta * e as f64).collect();
        crate::num::log_sum_exp(&terms)
    }

    /// `(<E>, <E^2>)` of the total energy.
    pub fn moments(&self, beta: f64) -> (f64, f64) {
        let lz = self.ln_z(beta);
        self.levels().fold((0.0, 0.0), |(m1, m2), (e, c)| {
            let w = ((c as f64).ln() - beta * e as f64 - lz).exp();
            (m1 + w * e as f64, m2 + w * (e * e) as f64)
        })
    }
}

/// Exhaustive density of states by Gray-code enumeration with local-field
/// energy updates. Chunks over the top bits run in parallel; the counts are
/// integers, so the result does not depend on scheduling.
pub fn density_of_states<M: SpinModel>(model: &M) -> Result<DensityOfStates> {
    let n = model.n_sites();
    if n > MAX_DOS_SITES {
        return Err(Error::BudgetExceeded {
            bits: n,
            limit: MAX_DOS_SITES,
        });
    }
    let n_terms = model.lattice().n_edges() as i64;
    let high = n.min(6);
    let low = n - high;
    let chunks: Vec<Vec<u64>> = (0..1u64 << high)
        .into_par_iter()
        .map(|chunk| {
            let mut counts = vec![0u64; 2 * n_terms as usize + 1];
            let mut state = model.uniform_state();
            for b in 0..high {
                if chunk >> b & 1 == 1 {
                    model.flip(&mut state, low + b);
                }
            }
            let mut e = model.energy(&state);
            counts[(e + n_terms) as usize] += 1;
            for k in 1u64..1 << low {
                let site = k.trailing_zeros() as usize;
                e += 2 * model.spin(&state, site) as i64 * model.local_field(&state, site) as i64;
                model.flip(&mut state, site);
                counts[(e + n_terms) as usize] += 1;
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; 2 * n_terms as usize + 1];
    for c in chunks {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
    }
    Ok(DensityOfStates {
        e_min: -n_terms,
        counts,
    })
}

fn log_partition<M: SpinModel>(model: &M, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::OutOfRange {
            name: "beta",
            detail: format!("{beta} must be non-negative"),
        });
    }
    Ok(density_of_states(model)?.ln_z(beta))
}

/// `ln Z` of the RPI model by enumerating all `2^(L^3)` states (`L <= 3`).
pub fn exact_partition_rpi(lattice: &Lattice, disorder: &Disorder, beta: f64) -> Result<f64> {
    if lattice.size() > 3 {
        return Err(Error::BudgetExceeded {
            bits: lattice.n_cubes(),
            limit: 27,
        });
    }
    let m = RpiModel::new(std::sync::Arc::new(lattice.clone()), std::sync::Arc::new(disorder.clone()))?;
    log_partition(&m, beta)
}

/// `ln Z` of the RACAT model by enumerating all `2^(2 L^3)` states (`L = 2`).
pub fn exact_partition_racat(lattice: &Lattice, disorder: &Disorder, beta: f64) -> Result<f64> {
    if lattice.size() > 2 {
        return Err(Error::BudgetExceeded {
            bits: 2 * lattice.n_vertices(),
            limit: 16,
        });
    }
    let m = RacatModel::new(std::sync::Arc::new(lattice.clone()), std::sync::Arc::new(disorder.clone()))?;
    log_partition(&m, beta)
}

/// Exact thermal averages at one inverse temperature and disorder.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ExactResult {
    pub beta: f64,
    pub ln_z: f64,
    /// `<e>` with `e = E / L^3`.
    pub energy: f64,
    pub energy_sq: f64,
    pub specific_heat: f64,
    pub q: f64,
    pub q_sq: f64,
    pub susceptibility: f64,
    pub g0: f64,
    pub gk: f64,
    pub xi: Option<f64>,
    pub correlator: Vec<f64>,
}

/// Largest number of spins tabulated by [`StateTable`].
pub const MAX_TABLE_SITES: usize = 20;

/// Every configuration of a small model with its bond-sign mask and
/// observables. Disorder enters only through the mask: with
/// `tau = (-1)^eta` the energy is `-(N - 2 |mask ^ eta|)`.
#[derive(Clone, Debug)]
pub struct StateTable {
    size: usize,
    n_spins_density: usize,
    n_bonds: usize,
    masks: Vec<u64>,
    q: Vec<f64>,
    g0: Vec<f64>,
    gk: Vec<f64>,
    corr_len: usize,
    corr: Vec<f64>,
    pair_len: usize,
    pairs: Vec<i8>,
}

impl StateTable {
    pub fn build<M: Measurable + BondTerms>(model: &M) -> Result<Self> {
        let n = model.n_sites();
        let n_bonds = model.lattice().n_edges();
        if n > MAX_TABLE_SITES || n_bonds > 64 {
            return Err(Error::BudgetExceeded {
                bits: n,
                limit: MAX_TABLE_SITES,
            });
        }
        let count = 1usize << n;
        let corr_len = model.correlator_shape().len();
        let mut t = Self {
            size: model.lattice().size(),
            n_spins_density: model.lattice().n_cubes(),
            n_bonds,
            masks: Vec::with_capacity(count),
            q: Vec::with_capacity(count),
            g0: Vec::with_capacity(count),
            gk: Vec::with_capacity(count),
            corr_len,
            corr: Vec::with_capacity(count * corr_len),
            pair_len: 0,
            pairs: Vec::new(),
        };
        for k in 0..count {
            let mut s = model.uniform_state();
            for site in 0..n {
                if k >> site & 1 == 1 {
                    model.flip(&mut s, site);
                }
            }
            t.masks.push(model.bond_signs(&s).to_u64().expect("at most 64 bonds"));
            t.q.push(model.order_parameter(&s));
            let (a, b) = model.structure_factors(&s);
            t.g0.push(a);
            t.gk.push(b);
            t.corr.extend(model.correlator::<f64>(&s));
            let pp = model.pair_products(&s);
            t.pair_len = pp.len();
            t.pairs.extend(pp);
        }
        Ok(t)
    }

    pub fn n_states(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    /// Normalized Boltzmann weights and `ln Z`.
    fn weights(&self, eta: u64, beta: f64) -> (Vec<f64>, f64) {
        let n = self.n_bonds;
        let w_min = self.masks.iter().map(|&m| (m ^ eta).count_ones()).min().unwrap() as usize;
        // relative weight exp(-2 beta (w - w_min)) per frustrated-bond count w
        let table: Vec<f64> = (0..=n)
            .map(|w| {
                if w < w_min {
                    0.0
                } else if w == w_min {
                    1.0
                } else {
                    (-2.0 * beta * (w - w_min) as f64).exp()
                }
            })
            .collect();
        let raw: Vec<f64> = self.masks.iter().map(|&m| table[(m ^ eta).count_ones() as usize]).collect();
        let z: f64 = raw.iter().sum();
        let e_min = -(n as f64) + 2.0 * w_min as f64;
        let ln_z = if beta == 0.0 { z.ln() } else { z.ln() - beta * e_min };
        (raw.into_iter().map(|w| w / z).collect(), ln_z)
    }

    pub fn ln_z(&self, eta: u64, beta: f64) -> f64 {
        self.weights(eta, beta).1
    }

    /// `counts[w]`: configurations with `w` frustrated bonds under `eta`.
    pub fn frustration_counts(&self, eta: u64) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_bonds + 1];
        for &m in &self.masks {
            counts[(m ^ eta).count_ones() as usize] += 1;
        }
        counts
    }

    pub fn n_bonds(&self) -> usize {
        self.n_bonds
    }

    pub fn thermal(&self, eta: u64, beta: f64) -> ExactResult {
        let (w, ln_z) = self.weights(eta, beta);
        let nd = self.n_spins_density as f64;
        let n = self.n_bonds as f64;
        let (mut e1, mut e2, mut q1, mut q2, mut g0, mut gk) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let mut corr = vec![0.0; self.corr_len];
        for (k, &wk) in w.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            let e = (-n + 2.0 * (self.masks[k] ^ eta).count_ones() as f64) / nd;
            e1 += wk * e;
            e2 += wk * e * e;
            q1 += wk * self.q[k];
            q2 += wk * self.q[k] * self.q[k];
            g0 += wk * self.g0[k];
            gk += wk * self.gk[k];
            for (c, &v) in corr.iter_mut().zip(&self.corr[k * self.corr_len..(k + 1) * self.corr_len]) {
                *c += wk * v;
            }
        }
        let t = if beta > 0.0 { 1.0 / beta } else { f64::INFINITY };
        ExactResult {
            beta,
            ln_z,
            energy: e1,
            energy_sq: e2,
            specific_heat: nd / (t * t) * (e2 - e1 * e1).max(0.0),
            q: q1,
            q_sq: q2,
            susceptibility: nd / t * (q2 - q1 * q1).max(0.0),
            g0,
            gk,
            xi: xi_second_moment(g0, gk, self.size).value(),
            correlator: corr,
        }
    }

    /// Exact `<o_i(r)>` for the site-resolved pair products (layout as in
    /// [`Measurable::pair_products`]).
    pub fn pair_means(&self, eta: u64, beta: f64) -> Vec<f64> {
        let (w, _) = self.weights(eta, beta);
        let mut out = vec![0.0; self.pair_len];
        for (k, &wk) in w.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(&self.pairs[k * self.pair_len..(k + 1) * self.pair_len]) {
                *o += wk * v as f64;
            }
        }
        out
    }
}

/// Convenience: `eta` mask of a disorder realization on at most 64 edges.
pub fn disorder_mask(disorder: &Disorder) -> Result<u64> {
    disorder
        .to_error_config()
        .bits
        .to_u64()
        .ok_or_else(|| Error::Invalid("disorder mask needs at most 64 edges".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::Pauli;
    use crate::lattice::Axis;
    use crate::models::PlaneSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;
    use std::sync::Arc;

    fn lat(l: usize) -> Arc<Lattice> {
        Arc::new(Lattice::new(l).unwrap())
    }

    #[test]
    fn bond_signs_reproduce_energies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = lat(3);
        for seed in 0..4 {
            let d = Arc::new(Disorder::sample(&l, 0.3, Pauli::X, seed).unwrap());
            let a = RpiModel::new(l.clone(), d.clone()).unwrap();
            let b = RacatModel::new(l.clone(), d.clone()).unwrap();
            let sa = a.random_state(&mut rng);
            let sb = b.random_state(&mut rng);
            let energy = |bits: &BitVec| -> i64 {
                d.couplings()
                    .iter()
                    .enumerate()
                    .map(|(e, &t)| -(t as i64) * if bits.get(e) { -1 } else { 1 })
                    .sum()
            };
            assert_eq!(energy(&a.bond_signs(&sa)), a.energy(&sa));
            assert_eq!(energy(&b.bond_signs(&sb)), b.energy(&sb));
        }
    }

    #[test]
    fn infinite_temperature_counts_states() {
        let l = lat(2);
        let d = Disorder::sample(&l, 0.2, Pauli::X, 3).unwrap();
        let z = exact_partition_rpi(&l, &d, 0.0).unwrap();
        assert!((z - 8.0 * 2f64.ln()).abs() < 1e-12);
        let z = exact_partition_racat(&l, &d, 0.0).unwrap();
        assert!((z - 16.0 * 2f64.ln()).abs() < 1e-12);
        let big = lat(3);
        let d3 = Disorder::clean(&big, Pauli::Z);
        assert!(matches!(
            exact_partition_racat(&big, &d3, 1.0),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(exact_partition_rpi(&lat(4), &Disorder::clean(&lat(4), Pauli::X), 1.0).is_err());
    }

    #[test]
    fn two_routes_agree_at_size_two() {
        let l = lat(2);
        for seed in 0..5 {
            let d = Arc::new(Disorder::sample(&l, 0.25, Pauli::X, seed).unwrap());
            let eta = disorder_mask(&d).unwrap();
            let a = RpiModel::new(l.clone(), d.clone()).unwrap();
            let b = RacatModel::new(l.clone(), d.clone()).unwrap();
            let ta = StateTable::build(&a).unwrap();
            let tb = StateTable::build(&b).unwrap();
            for beta in [0.0, 0.3, 1.1, 4.0] {
                let za = exact_partition_rpi(&l, &d, beta).unwrap();
                let zb = exact_partition_racat(&l, &d, beta).unwrap();
                assert!((za - ta.ln_z(eta, beta)).abs() < 1e-10, "{za}");
                assert!((zb - tb.ln_z(eta, beta)).abs() < 1e-10, "{zb}");
                let dos = density_of_states(&b).unwrap();
                let (m1, _) = dos.moments(beta);
                assert!((m1 / 8.0 - tb.thermal(eta, beta).energy).abs() < 1e-10);
            }
        }
    }

    fn layer_orbit<M: SpinModel>(m: &M) -> usize {
        let mut seen = HashSet::new();
        let mut stack = vec![m.uniform_state()];
        let key = |s: &M::State| serde_json::to_string(s).unwrap();
        seen.insert(key(&stack[0]));
        while let Some(s) = stack.pop() {
            for normal in Axis::ALL {
                for coord in 0..m.lattice().size() {
                    let mut t = s.clone();
                    m.plane_flip(&mut t, PlaneSpec { normal, coord }).unwrap();
                    if seen.insert(key(&t)) {
                        stack.push(t);
                    }
                }
            }
        }
        seen.len()
    }

    #[test]
    fn clean_ground_states() {
        let l = lat(2);
        let a = RpiModel::new(l.clone(), Arc::new(Disorder::clean(&l, Pauli::X))).unwrap();
        let b = RacatModel::new(l.clone(), Arc::new(Disorder::clean(&l, Pauli::Z))).unwrap();
        let da = density_of_states(&a).unwrap();
        let db = density_of_states(&b).unwrap();
        assert_eq!(da.ground_energy(), -24);
        assert_eq!(db.ground_energy(), -24);
        // the plane-flip orbit of the ordered state is contained in the ground manifold
        assert!(da.ground_degeneracy() as usize >= layer_orbit(&a));
        assert_eq!(db.ground_degeneracy(), 1 << (3 * 2 - 1));
        assert_eq!(layer_orbit(&b), 1 << (3 * 2 - 1));
        for (dos, n) in [(&da, 8u32), (&db, 16)] {
            assert_eq!(dos.total(), 1u64 << n);
            let beta = 20.0;
            let expect = 24.0 * beta + (dos.ground_degeneracy() as f64).ln();
            assert!((dos.ln_z(beta) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn rpi_three_cubed_density_of_states() {
        let l = lat(3);
        let a = RpiModel::new(l.clone(), Arc::new(Disorder::clean(&l, Pauli::X))).unwrap();
        let dos = density_of_states(&a).unwrap();
        assert_eq!(dos.total(), 1 << 27);
        assert_eq!(dos.ground_energy(), -81);
        assert!(dos.ground_degeneracy() as usize >= layer_orbit(&a));
        // E -> -E is not a symmetry, but the mean over all states vanishes
        let (m1, _) = dos.moments(0.0);
        assert!(m1.abs() < 1e-9);
    }

    #[test]
    fn ordered_limit_of_thermal_averages() {
        let l = lat(2);
        let b = RacatModel::new(l.clone(), Arc::new(Disorder::clean(&l, Pauli::Z))).unwrap();
        let t = StateTable::build(&b).unwrap();
        let r = t.thermal(0, 30.0);
        assert!((r.energy + 3.0).abs() < 1e-12);
        assert!((r.q - 1.0).abs() < 1e-12);
        assert!(r.correlator.iter().all(|&g| (g - 1.0).abs() < 1e-12));
        let hot = t.thermal(0, 0.0);
        assert!(hot.energy.abs() < 1e-12);
        assert!((hot.correlator[0] - 1.0).abs() < 1e-12);
    }
}
