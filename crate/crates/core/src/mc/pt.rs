use std::ops::ControlFlow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::TemperatureGrid;
use super::kernels::{accept, heat_bath_sweep, overrelaxation_sweep, swap_acceptance, HeatBathTable};
use crate::error::{Error, Result};
use crate::models::SpinModel;
use crate::num::Real;

/// Per-sweep update recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Over-relaxation passes following each heat-bath pass.
    pub overrelaxation_passes: u32,
    /// Adjacent pairs with a lower swap rate trigger a warning.
    pub swap_warn_threshold: f64,
    /// Update replicas on the rayon pool.
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            overrelaxation_passes: 1,
            swap_warn_threshold: 0.2,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replica<S> {
    pub state: S,
    pub energy: i64,
    rng: ChaCha8Rng,
}

/// Serializable image of a [`PtEnsemble`], used for checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PtSnapshot<S> {
    pub temperatures: Vec<f64>,
    pub replicas: Vec<Replica<S>>,
    pub replica_at: Vec<usize>,
    pub swap_attempts: Vec<u64>,
    pub swap_accepts: Vec<u64>,
    pub sweeps: u64,
    pub swap_rng: ChaCha8Rng,
}

/// One replica per temperature plus the bookkeeping for exchanges.
///
/// Swaps permute `replica_at` (temperature slot -> replica) rather than
/// spin arrays. Each replica carries its own RNG stream and exchanges draw
/// from a separate one, so trajectories do not depend on the thread count.
#[derive(Clone, Debug)]
pub struct PtEnsemble<S, F> {
    grid: TemperatureGrid<F>,
    betas: Vec<F>,
    tables: Vec<HeatBathTable>,
    replicas: Vec<Replica<S>>,
    replica_at: Vec<usize>,
    swap_attempts: Vec<u64>,
    swap_accepts: Vec<u64>,
    sweeps: u64,
    swap_rng: ChaCha8Rng,
}

impl<S: Clone + Send + Sync, F: Real> PtEnsemble<S, F> {
    /// Random initial states drawn from each replica's own stream.
    pub fn new<M: SpinModel<State = S>>(model: &M, grid: TemperatureGrid<F>, seed: u64) -> Self {
        let n = grid.len();
        let replicas = (0..n)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64 + 1);
                let state = model.random_state(&mut rng);
                let energy = model.energy(&state);
                Replica { state, energy, rng }
            })
            .collect();
        let mut swap_rng = ChaCha8Rng::seed_from_u64(seed);
        swap_rng.set_stream(0);
        let betas = grid.betas();
        let tables = betas.iter().map(|&b| HeatBathTable::new(b, model.max_field())).collect();
        Self {
            grid,
            betas,
            tables,
            replicas,
            replica_at: (0..n).collect(),
            swap_attempts: vec![0; n - 1],
            swap_accepts: vec![0; n - 1],
            sweeps: 0,
            swap_rng,
        }
    }

    pub fn grid(&self) -> &TemperatureGrid<F> {
        &self.grid
    }

    pub fn betas(&self) -> &[F] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.replicas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicas.is_empty()
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    /// Replica index sitting at each temperature slot.
    pub fn permutation(&self) -> &[usize] {
        &self.replica_at
    }

    /// Configuration currently at temperature slot `k`.
    pub fn state_at(&self, k: usize) -> &S {
        &self.replicas[self.replica_at[k]].state
    }

    pub fn energy_at(&self, k: usize) -> i64 {
        self.replicas[self.replica_at[k]].energy
    }

    pub fn swap_counts(&self) -> (&[u64], &[u64]) {
        (&self.swap_attempts, &self.swap_accepts)
    }

    /// Accepted fraction of swap proposals per adjacent pair; `NaN` before
    /// the first proposal.
    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.swap_attempts
            .iter()
            .zip(&self.swap_accepts)
            .map(|(&a, &s)| if a == 0 { f64::NAN } else { s as f64 / a as f64 })
            .collect()
    }

    /// Pairs `(k, rate)` with `rate < threshold`.
    pub fn low_acceptance_pairs(&self, threshold: f64) -> Vec<(usize, f64)> {
        self.acceptance_rates()
            .into_iter()
            .enumerate()
            .filter(|(_, r)| *r < threshold)
            .collect()
    }

    /// Heat-bath plus over-relaxation on every replica at its current temperature.
    pub fn local_updates<M: SpinModel<State = S>>(&mut self, model: &M, config: &SweepConfig) {
        let mut temp_of = vec![0; self.replicas.len()];
        for (k, &r) in self.replica_at.iter().enumerate() {
            temp_of[r] = k;
        }
        let tables = &self.tables;
        let update = |(r, rep): (usize, &mut Replica<S>)| {
            rep.energy += heat_bath_sweep(model, &mut rep.state, &tables[temp_of[r]], &mut rep.rng);
            for _ in 0..config.overrelaxation_passes {
                overrelaxation_sweep(model, &mut rep.state);
            }
        };
        if config.parallel {
            self.replicas.par_iter_mut().enumerate().for_each(update);
        } else {
            self.replicas.iter_mut().enumerate().for_each(update);
        }
    }

    /// Proposes exchanges between slots `(k, k+1)` for every `k` of the given
    /// parity (0 or 1).
    pub fn pt_swap_round(&mut self, parity: usize) {
        let n = self.replica_at.len();
        let mut k = parity % 2;
        while k + 1 < n {
            let (a, b) = (self.replica_at[k], self.replica_at[k + 1]);
            let prob = swap_acceptance(
                self.betas[k],
                self.betas[k + 1],
                self.replicas[a].energy,
                self.replicas[b].energy,
            );
            self.swap_attempts[k] += 1;
            if accept(prob, &mut self.swap_rng) {
                self.replica_at.swap(k, k + 1);
                self.swap_accepts[k] += 1;
            }
            k += 2;
        }
    }

    /// One full sweep: local updates, then one swap round whose parity
    /// alternates with the sweep counter.
    pub fn sweep<M: SpinModel<State = S>>(&mut self, model: &M, config: &SweepConfig) {
        self.local_updates(model, config);
        self.pt_swap_round((self.sweeps % 2) as usize);
        self.sweeps += 1;
    }

    /// Runs `n_sweeps` sweeps. After each one, `hook` receives the zero-based
    /// index of the sweep just completed and the ensemble; returning
    /// `Break` stops the run early. Returns the number of sweeps done.
    pub fn run_schedule<M, H>(&mut self, model: &M, n_sweeps: u64, config: &SweepConfig, mut hook: H) -> u64
    where
        M: SpinModel<State = S>,
        H: FnMut(u64, &Self) -> ControlFlow<()>,
    {
        let mut done = 0;
        while done < n_sweeps {
            let index = self.sweeps;
            self.sweep(model, config);
            done += 1;
            if hook(index, self).is_break() {
                break;
            }
        }
        let low = self.low_acceptance_pairs(config.swap_warn_threshold);
        if !low.is_empty() && done > 0 {
            log::warn!(
                "{} adjacent temperature pairs below swap rate {}: {:?}",
                low.len(),
                config.swap_warn_threshold,
                low
            );
        }
        done
    }

    pub fn snapshot(&self) -> PtSnapshot<S> {
        PtSnapshot {
            temperatures: self.grid.temperatures().iter().map(|t| t.to_f64_lossy()).collect(),
            replicas: self.replicas.clone(),
            replica_at: self.replica_at.clone(),
            swap_attempts: self.swap_attempts.clone(),
            swap_accepts: self.swap_accepts.clone(),
            sweeps: self.sweeps,
            swap_rng: self.swap_rng.clone(),
        }
    }

    /// Rebuilds an ensemble; the snapshot must match `grid` and `model`.
    pub fn restore<M: SpinModel<State = S>>(
        model: &M,
        grid: TemperatureGrid<F>,
        snap: PtSnapshot<S>,
    ) -> Result<Self> {
        let n = grid.len();
        let same_grid = snap.temperatures.len() == n
            && grid
                .temperatures()
                .iter()
                .zip(&snap.temperatures)
                .all(|(a, &b)| (a.to_f64_lossy() - b).abs() <= 1e-12 * b.abs());
        if !same_grid {
            return Err(Error::Invalid("checkpoint temperature grid differs from the configured grid".into()));
        }
        let mut seen = vec![false; n];
        let perm_ok = snap.replica_at.len() == n
            && snap.replicas.len() == n
            && snap.swap_attempts.len() == n - 1
            && snap.swap_accepts.len() == n - 1
            && snap.replica_at.iter().all(|&r| r < n && !std::mem::replace(&mut seen[r], true));
        if !perm_ok {
            return Err(Error::Invalid("checkpoint replica bookkeeping is inconsistent".into()));
        }
        if snap.replicas.iter().any(|r| model.energy(&r.state) != r.energy) {
            return Err(Error::Invalid("checkpoint energies do not match the disorder realization".into()));
        }
        let betas = grid.betas();
        let tables = betas.iter().map(|&b| HeatBathTable::new(b, model.max_field())).collect();
        Ok(Self {
            grid,
            betas,
            tables,
            replicas: snap.replicas,
            replica_at: snap.replica_at,
            swap_attempts: snap.swap_attempts,
            swap_accepts: snap.swap_accepts,
            sweeps: snap.sweeps,
            swap_rng: snap.swap_rng,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::kernels::toy::{chi_square_p, Pair};
    use super::*;
    use crate::code::Pauli;
    use crate::lattice::Lattice;
    use crate::models::{Disorder, RacatModel};
    use std::sync::Arc;

    fn racat(l: usize, p: f64) -> RacatModel {
        let lat = Arc::new(Lattice::new(l).unwrap());
        let dis = Arc::new(Disorder::sample(&lat, p, Pauli::Z, 17).unwrap());
        RacatModel::new(lat, dis).unwrap()
    }

    #[test]
    fn zero_sweeps_produce_nothing() {
        let m = racat(3, 0.1);
        let grid = TemperatureGrid::geometric(4, 1.0, 2.0).unwrap();
        let mut pt = PtEnsemble::new(&m, grid, 1);
        let mut calls = 0;
        let done = pt.run_schedule(&m, 0, &SweepConfig::default(), |_, _| {
            calls += 1;
            ControlFlow::Continue(())
        });
        assert_eq!((done, calls), (0, 0));
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let m = racat(4, 0.1);
        let grid = TemperatureGrid::geometric(6, 0.8, 2.0).unwrap();
        let trace = |parallel: bool| {
            let cfg = SweepConfig {
                parallel,
                ..SweepConfig::default()
            };
            let mut pt = PtEnsemble::new(&m, grid.clone(), 99);
            let mut out = Vec::new();
            pt.run_schedule(&m, 40, &cfg, |t, pt| {
                out.push((t, (0..pt.len()).map(|k| pt.energy_at(k)).collect::<Vec<_>>()));
                ControlFlow::Continue(())
            });
            (out, pt.snapshot())
        };
        let (a, sa) = trace(true);
        let (b, sb) = trace(false);
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!(a.len(), 40);
    }

    #[test]
    fn energies_stay_consistent_and_permutation_bijective() {
        let m = racat(3, 0.2);
        let grid = TemperatureGrid::geometric(5, 0.5, 3.0).unwrap();
        let mut pt = PtEnsemble::new(&m, grid, 5);
        pt.run_schedule(&m, 100, &SweepConfig::default(), |_, pt| {
            for k in 0..pt.len() {
                assert_eq!(m.energy(pt.state_at(k)), pt.energy_at(k));
            }
            let mut p = pt.permutation().to_vec();
            p.sort();
            assert_eq!(p, (0..pt.len()).collect::<Vec<_>>());
            ControlFlow::Continue(())
        });
        assert!(pt.acceptance_rates().iter().all(|r| (0.0..=1.0).contains(r)));
        let (att, _) = pt.swap_counts();
        assert_eq!(att.iter().sum::<u64>(), 50 * 2 + 50 * 2);
    }

    #[test]
    fn hook_can_stop_the_run() {
        let m = racat(2, 0.0);
        let grid = TemperatureGrid::geometric(3, 1.0, 2.0).unwrap();
        let mut pt = PtEnsemble::new(&m, grid, 5);
        let done = pt.run_schedule(&m, 100, &SweepConfig::default(), |t, _| {
            if t == 9 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        assert_eq!(done, 10);
        assert_eq!(pt.sweeps(), 10);
    }

    #[test]
    fn snapshot_restore_continues_identically() {
        let m = racat(3, 0.15);
        let grid = TemperatureGrid::geometric(4, 0.8, 2.0).unwrap();
        let cfg = SweepConfig::default();
        let mut full = PtEnsemble::new(&m, grid.clone(), 3);
        full.run_schedule(&m, 30, &cfg, |_, _| ControlFlow::Continue(()));
        let mut half = PtEnsemble::new(&m, grid.clone(), 3);
        half.run_schedule(&m, 12, &cfg, |_, _| ControlFlow::Continue(()));
        let bytes = bincode::serialize(&half.snapshot()).unwrap();
        let snap = bincode::deserialize(&bytes).unwrap();
        let mut resumed = PtEnsemble::restore(&m, grid.clone(), snap).unwrap();
        resumed.run_schedule(&m, 18, &cfg, |_, _| ControlFlow::Continue(()));
        assert_eq!(resumed.snapshot(), full.snapshot());
        let other = TemperatureGrid::geometric(4, 0.9, 2.0).unwrap();
        assert!(PtEnsemble::restore(&m, other, half.snapshot()).is_err());
    }

    #[test]
    fn two_temperature_toy_obeys_detailed_balance() {
        let model = Pair::new(1, 1);
        let grid = TemperatureGrid::from_temperatures(vec![1.5f64, 3.0]).unwrap();
        let cfg = SweepConfig {
            overrelaxation_passes: 0,
            parallel: false,
            ..SweepConfig::default()
        };
        let mut pt = PtEnsemble::new(&model, grid, 31);
        let mut counts = [0u64; 16];
        pt.run_schedule(&model, 300_000, &cfg, |_, pt| {
            counts[Pair::encode(pt.state_at(0)) + 4 * Pair::encode(pt.state_at(1))] += 1;
            ControlFlow::Continue(())
        });
        let (g0, g1) = (model.gibbs(1.0 / 1.5), model.gibbs(1.0 / 3.0));
        let probs: Vec<f64> = (0..16).map(|k| g0[k % 4] * g1[k / 4]).collect();
        let p = chi_square_p(&counts, &probs);
        assert!(p > 0.01, "chi-square p = {p}");
        assert!(pt.acceptance_rates()[0] > 0.0);
    }
}
