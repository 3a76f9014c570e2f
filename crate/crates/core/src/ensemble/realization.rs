use std::fs;
use std::io::{BufWriter, Read, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{binning_equilibration_check, BinAccumulator, BinSeries, EquilibrationVerdict};
use crate::error::{Error, Result};
use crate::mc::{PtEnsemble, PtSnapshot, SweepConfig, TemperatureGrid};
use crate::observables::{xi_second_moment, EnergyCounts, Measurable, SgAccumulator};

/// Measurement and persistence settings for one disorder realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationConfig {
    /// The run lasts `2^tau_max` sweeps; observables are reported from the
    /// last bin, `[2^(tau_max-1), 2^tau_max - 1]`.
    pub tau_max: u32,
    pub sweep: SweepConfig,
    /// Sweeps between full `G(r)` measurements in the last bin; 0 disables them.
    pub correlator_stride: u64,
    /// Accumulate the spin-glass correlator from the two halves of the last bin.
    pub track_sg: bool,
    /// Keep exact energy counts of the last bin.
    pub energy_histogram: bool,
    /// Tolerance of the equilibration test, in combined standard errors.
    pub equilibration_sigma: f64,
    /// Sweeps between checkpoints when a checkpoint path is given.
    pub checkpoint_interval: u64,
    /// Sweeps between rows of the per-sample dump; 0 disables it.
    pub dump_stride: u64,
}

impl Default for RealizationConfig {
    fn default() -> Self {
        Self {
            tau_max: 12,
            sweep: SweepConfig::default(),
            correlator_stride: 16,
            track_sg: false,
            energy_histogram: true,
            equilibration_sigma: 5.0,
            checkpoint_interval: 1 << 16,
            dump_stride: 0,
        }
    }
}

/// Interrupt flag and shared sweep budget for a run.
#[derive(Clone, Debug, Default)]
pub struct RunControl {
    interrupt: Arc<AtomicBool>,
    budget: Option<u64>,
    used: Arc<AtomicU64>,
}

enum Stop {
    Interrupt,
    Budget,
}

impl RunControl {
    pub fn new(budget: Option<u64>) -> Self {
        Self {
            budget,
            ..Self::default()
        }
    }

    /// Flag to set from a signal handler.
    pub fn interrupt_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.interrupt)
    }

    pub fn interrupt(&self) {
        self.interrupt.store(true, Ordering::SeqCst);
    }

    /// Sweeps charged so far, over every realization sharing this control.
    pub fn sweeps_used(&self) -> u64 {
        self.used.load(Ordering::SeqCst)
    }

    fn charge(&self) -> Option<Stop> {
        if self.interrupt.load(Ordering::SeqCst) {
            return Some(Stop::Interrupt);
        }
        let used = self.used.fetch_add(1, Ordering::SeqCst) + 1;
        match self.budget {
            Some(b) if used >= b => Some(Stop::Budget),
            _ => None,
        }
    }
}

/// Accumulators for one temperature slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SlotMeasurements {
    energy_bins: BinAccumulator,
    q_bins: BinAccumulator,
    n: u64,
    sum_e: i64,
    sum_e2: i64,
    sum_q: f64,
    sum_q2: f64,
    sum_g0: f64,
    sum_gk: f64,
    n_corr: u64,
    corr: Vec<f64>,
    sg: Option<SgAccumulator>,
    energies: Option<EnergyCounts>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Measurements {
    slots: Vec<SlotMeasurements>,
}

impl Measurements {
    fn new<M: Measurable>(model: &M, n_temps: usize, cfg: &RealizationConfig) -> Self {
        let n_sites = model.lattice().n_vertices();
        let shape = model.correlator_shape();
        let l = model.lattice().size();
        let slot = SlotMeasurements {
            energy_bins: BinAccumulator::new(cfg.tau_max),
            q_bins: BinAccumulator::new(cfg.tau_max),
            n: 0,
            sum_e: 0,
            sum_e2: 0,
            sum_q: 0.0,
            sum_q2: 0.0,
            sum_g0: 0.0,
            sum_gk: 0.0,
            n_corr: 0,
            corr: vec![0.0; if cfg.correlator_stride > 0 { shape.len() } else { 0 }],
            sg: cfg.track_sg.then(|| SgAccumulator::new(n_sites, l)),
            energies: cfg.energy_histogram.then(|| EnergyCounts::new(n_sites)),
        };
        Self {
            slots: vec![slot; n_temps],
        }
    }

    fn record<M: Measurable>(
        &mut self,
        model: &M,
        pt: &PtEnsemble<M::State, f64>,
        sweep: u64,
        cfg: &RealizationConfig,
    ) {
        let Some(tau) = BinAccumulator::bin_of(sweep) else { return };
        let n_sites = model.lattice().n_vertices() as f64;
        let last_start = 1u64 << (cfg.tau_max - 1);
        let in_last = tau == cfg.tau_max;
        let update = |(k, slot): (usize, &mut SlotMeasurements)| {
            let state = pt.state_at(k);
            let energy = pt.energy_at(k);
            let q: f64 = model.order_parameter(state);
            slot.energy_bins.add(sweep, energy as f64 / n_sites);
            slot.q_bins.add(sweep, q);
            if !in_last {
                return;
            }
            let (g0, gk) = model.structure_factors(state);
            slot.n += 1;
            slot.sum_e += energy;
            slot.sum_e2 += energy * energy;
            slot.sum_q += q;
            slot.sum_q2 += q * q;
            slot.sum_g0 += g0;
            slot.sum_gk += gk;
            let offset = sweep - last_start;
            if cfg.correlator_stride > 0 && offset.is_multiple_of(cfg.correlator_stride) {
                let g: Vec<f64> = model.correlator(state);
                slot.corr.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
                slot.n_corr += 1;
            }
            if let Some(sg) = slot.sg.as_mut() {
                let half = usize::from(offset >= last_start / 2);
                sg.add(half, &model.pair_products(state));
            }
            if let Some(counts) = slot.energies.as_mut() {
                counts.add(energy);
            }
        };
        if cfg.sweep.parallel {
            self.slots.par_iter_mut().enumerate().for_each(update);
        } else {
            self.slots.iter_mut().enumerate().for_each(update);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealizationStatus {
    Pending,
    Running,
    Equilibrated,
    Failed,
}

/// Thermal averages at one temperature from the last bin of one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRow {
    pub temperature: f64,
    /// Energy density `<E>/L^3`.
    pub energy: f64,
    pub energy_sq: f64,
    pub q: f64,
    pub q_sq: f64,
    pub g0: f64,
    pub gk: f64,
    pub xi: Option<f64>,
    pub specific_heat: f64,
    pub susceptibility: f64,
}

/// Everything a finished realization contributes to the ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub index: usize,
    pub disorder_seed: u64,
    pub dynamics_seed: u64,
    pub n_negative: usize,
    pub status: RealizationStatus,
    pub sweeps: u64,
    pub equilibration: EquilibrationVerdict,
    /// Kept for every bin, including those that fail the equilibration test.
    pub bins: BinSeries,
    pub rows: Vec<RealizationRow>,
    pub swap_rates: Vec<f64>,
    /// Thermal `G(r)` per temperature, on the model's displacement grid.
    pub correlators: Option<Vec<Vec<f64>>>,
    pub sg_correlators: Option<Vec<Vec<f64>>>,
    pub energy_counts: Option<Vec<EnergyCounts>>,
}

impl RealizationRecord {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "temperature",
            "E",
            "E2",
            "q",
            "q2",
            "G0",
            "Gk",
            "xi",
            "Cv",
            "chi",
            "xi_flagged",
            "equilibrated",
        ])?;
        let eq = (self.status == RealizationStatus::Equilibrated).to_string();
        for r in &self.rows {
            w.write_record([
                r.temperature.to_string(),
                r.energy.to_string(),
                r.energy_sq.to_string(),
                r.q.to_string(),
                r.q_sq.to_string(),
                r.g0.to_string(),
                r.gk.to_string(),
                r.xi.map_or_else(String::new, |x| x.to_string()),
                r.specific_heat.to_string(),
                r.susceptibility.to_string(),
                r.xi.is_none().to_string(),
                eq.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"XCUBECKP";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint<S> {
    index: usize,
    dynamics_seed: u64,
    config: RealizationConfig,
    pt: PtSnapshot<S>,
    measurements: Measurements,
}

fn write_checkpoint<S: Serialize>(path: &Path, ckpt: &Checkpoint<S>) -> Result<()> {
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        bincode::serialize_into(&mut w, ckpt)?;
        w.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

fn read_checkpoint<S: serde::de::DeserializeOwned>(path: &Path) -> Result<Checkpoint<S>> {
    let bad = |detail: String| Error::Format {
        path: path.to_path_buf(),
        detail,
    };
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("checkpoint version {version}, expected {CHECKPOINT_VERSION}")));
    }
    bincode::deserialize(&bytes[12..]).map_err(|e| bad(e.to_string()))
}

/// Files of one realization inside an ensemble directory.
#[derive(Clone, Debug)]
pub struct RealizationPaths {
    pub checkpoint: PathBuf,
    pub dump: PathBuf,
}

/// Runs parallel tempering on one disorder realization and reduces the
/// measurements of the last bin.
///
/// With `paths`, progress is checkpointed every `checkpoint_interval`
/// sweeps and on interruption, and an existing checkpoint is resumed. The
/// checkpoint is removed once the realization completes.
pub fn run_realization<M: Measurable>(
    model: &M,
    grid: &TemperatureGrid<f64>,
    index: usize,
    dynamics_seed: u64,
    cfg: &RealizationConfig,
    control: &RunControl,
    paths: Option<&RealizationPaths>,
) -> Result<RealizationRecord> {
    if cfg.tau_max < 4 || cfg.tau_max > 40 {
        return Err(Error::OutOfRange {
            name: "tau_max",
            detail: format!("need 4 <= tau_max <= 40 for the binning test, got {}", cfg.tau_max),
        });
    }
    let resumed = match paths {
        Some(p) if p.checkpoint.exists() => {
            let ckpt: Checkpoint<M::State> = read_checkpoint(&p.checkpoint)?;
            if ckpt.index != index || ckpt.dynamics_seed != dynamics_seed || ckpt.config != *cfg {
                return Err(Error::Format {
                    path: p.checkpoint.clone(),
                    detail: "checkpoint belongs to a different realization or configuration".into(),
                });
            }
            Some((PtEnsemble::restore(model, grid.clone(), ckpt.pt)?, ckpt.measurements))
        }
        _ => None,
    };
    let (mut pt, mut meas) = match resumed {
        Some(r) => r,
        None => (
            PtEnsemble::new(model, grid.clone(), dynamics_seed),
            Measurements::new(model, grid.len(), cfg),
        ),
    };
    let total = 1u64 << cfg.tau_max;
    let mut dump: Vec<String> = Vec::new();
    let mut stop = None;
    let mut io_error = None;
    let save = |pt: &PtEnsemble<M::State, f64>, meas: &Measurements, dump: &mut Vec<String>| -> Result<()> {
        let Some(p) = paths else { return Ok(()) };
        if !dump.is_empty() {
            let mut f = fs::OpenOptions::new().create(true).append(true).open(&p.dump)?;
            f.write_all(dump.concat().as_bytes())?;
            dump.clear();
        }
        write_checkpoint(
            &p.checkpoint,
            &Checkpoint {
                index,
                dynamics_seed,
                config: cfg.clone(),
                pt: pt.snapshot(),
                measurements: meas.clone(),
            },
        )
    };
    let remaining = total.saturating_sub(pt.sweeps());
    pt.run_schedule(model, remaining, &cfg.sweep, |sweep, pt| {
        meas.record(model, pt, sweep, cfg);
        if paths.is_some() && cfg.dump_stride > 0 && sweep % cfg.dump_stride == 0 {
            for k in 0..pt.len() {
                let (g0, gk) = model.structure_factors(pt.state_at(k));
                let q: f64 = model.order_parameter(pt.state_at(k));
                dump.push(format!("{sweep},{k},{},{q},{g0},{gk}\n", pt.energy_at(k)));
            }
        }
        if let Some(s) = control.charge() {
            stop = Some(s);
            return ControlFlow::Break(());
        }
        if paths.is_some() && (sweep + 1) % cfg.checkpoint_interval.max(1) == 0 && sweep + 1 < total {
            if let Err(e) = save(pt, &meas, &mut dump) {
                io_error = Some(e);
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    if pt.sweeps() < total {
        save(&pt, &meas, &mut dump)?;
        let sweeps = pt.sweeps();
        return Err(match stop {
            Some(Stop::Budget) => Error::SweepBudget { sweeps },
            _ => Error::Interrupted { sweeps },
        });
    }
    if let Some(p) = paths {
        if !dump.is_empty() {
            let mut f = fs::OpenOptions::new().create(true).append(true).open(&p.dump)?;
            f.write_all(dump.concat().as_bytes())?;
        }
        if p.checkpoint.exists() {
            fs::remove_file(&p.checkpoint)?;
        }
    }
    finish(model, &pt, &meas, index, dynamics_seed, cfg)
}

fn finish<M: Measurable>(
    model: &M,
    pt: &PtEnsemble<M::State, f64>,
    meas: &Measurements,
    index: usize,
    dynamics_seed: u64,
    cfg: &RealizationConfig,
) -> Result<RealizationRecord> {
    let size = model.lattice().size();
    let n_sites = model.lattice().n_vertices() as f64;
    let temps = pt.grid().temperatures();
    let mut bins = BinSeries::default();
    for (k, slot) in meas.slots.iter().enumerate() {
        bins.push(format!("E[T{k}]"), slot.energy_bins.values());
        bins.push(format!("q[T{k}]"), slot.q_bins.values());
    }
    let equilibration = binning_equilibration_check(&bins, cfg.equilibration_sigma)?;
    let rows = meas
        .slots
        .iter()
        .zip(temps)
        .map(|(s, &t)| {
            let n = s.n as f64;
            let var_e = (s.n as i128 * s.sum_e2 as i128 - s.sum_e as i128 * s.sum_e as i128) as f64 / (n * n);
            let q = s.sum_q / n;
            let q_sq = s.sum_q2 / n;
            let (g0, gk) = (s.sum_g0 / n, s.sum_gk / n);
            RealizationRow {
                temperature: t,
                energy: s.sum_e as f64 / n / n_sites,
                energy_sq: s.sum_e2 as f64 / n / (n_sites * n_sites),
                q,
                q_sq,
                g0,
                gk,
                xi: xi_second_moment(g0, gk, size).value(),
                specific_heat: var_e / (n_sites * t * t),
                susceptibility: n_sites / t * (q_sq - q * q).max(0.0),
            }
        })
        .collect();
    let correlators = (cfg.correlator_stride > 0).then(|| {
        meas.slots
            .iter()
            .map(|s| s.corr.iter().map(|c| c / s.n_corr as f64).collect())
            .collect()
    });
    let sg_correlators = if cfg.track_sg {
        Some(
            meas.slots
                .iter()
                .map(|s| s.sg.as_ref().unwrap().sg_correlator())
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let energy_counts = cfg
        .energy_histogram
        .then(|| meas.slots.iter().map(|s| s.energies.clone().unwrap()).collect());
    Ok(RealizationRecord {
        index,
        disorder_seed: model.disorder().seed(),
        dynamics_seed,
        n_negative: model.disorder().n_negative(),
        status: if equilibration.equilibrated {
            RealizationStatus::Equilibrated
        } else {
            RealizationStatus::Failed
        },
        sweeps: pt.sweeps(),
        equilibration,
        bins,
        rows,
        swap_rates: pt.acceptance_rates(),
        correlators,
        sg_correlators,
        energy_counts,
    })
}
