use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::realization::{run_realization, RealizationConfig, RealizationPaths, RealizationRecord, RealizationStatus, RunControl};
use super::stats::{bootstrap, disorder_average, BootstrapEstimate};
use super::{derive_seed, SeedTag};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::mc::TemperatureGrid;
use crate::models::{Disorder, ModelKind, RacatModel, RpiModel};
use crate::observables::{xi_second_moment, EnergyCounts};

/// One `(model, L, p)` point of the phase diagram and how to sample it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderPoint {
    pub model: ModelKind,
    pub size: usize,
    pub p: f64,
    pub temperatures: Vec<f64>,
    pub n_disorder: usize,
    pub master_seed: u64,
    pub realization: RealizationConfig,
    pub n_bootstrap: usize,
    /// The run fails when more than this fraction of realizations is flagged.
    pub max_flagged_fraction: f64,
    /// Run realizations concurrently, each on a single thread.
    pub parallel_realizations: bool,
}

impl DisorderPoint {
    pub fn validate(&self) -> Result<()> {
        Lattice::new(self.size)?;
        if !(0.0..0.5).contains(&self.p) {
            return Err(Error::OutOfRange {
                name: "p",
                detail: format!("need 0 <= p < 0.5, got {}", self.p),
            });
        }
        if self.n_disorder == 0 {
            return Err(Error::OutOfRange {
                name: "n_disorder",
                detail: "need at least one realization".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.max_flagged_fraction) {
            return Err(Error::OutOfRange {
                name: "max_flagged_fraction",
                detail: format!("need a fraction in [0, 1], got {}", self.max_flagged_fraction),
            });
        }
        TemperatureGrid::from_temperatures(self.temperatures.clone())?;
        Ok(())
    }

    pub fn disorder_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, index as u64, SeedTag::Disorder)
    }

    pub fn dynamics_seed(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, index as u64, SeedTag::Dynamics)
    }

    pub fn sample_disorder(&self, lattice: &Lattice, index: usize) -> Result<Disorder> {
        Disorder::sample(lattice, self.p, self.model.species(), self.disorder_seed(index))
    }
}

/// Ensemble manifest kept next to the realization files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub point: DisorderPoint,
    pub disorder_seeds: Vec<u64>,
    pub status: Vec<RealizationStatus>,
    /// Realizations excluded from the averages because they failed the
    /// equilibration test.
    pub excluded: Vec<usize>,
}

const MANIFEST_VERSION: u32 = 1;

impl Manifest {
    fn new(point: &DisorderPoint) -> Self {
        Self {
            format_version: MANIFEST_VERSION,
            point: point.clone(),
            disorder_seeds: (0..point.n_disorder).map(|i| point.disorder_seed(i)).collect(),
            status: vec![RealizationStatus::Pending; point.n_disorder],
            excluded: Vec::new(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let m: Manifest = serde_json::from_slice(&fs::read(path)?)?;
        if m.format_version != MANIFEST_VERSION {
            return Err(Error::Format {
                path: path.to_path_buf(),
                detail: format!("manifest version {}, expected {MANIFEST_VERSION}", m.format_version),
            });
        }
        Ok(m)
    }

    fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        fs::rename(tmp, path)?;
        Ok(())
    }
}

/// Layout of an ensemble directory.
#[derive(Clone, Debug)]
pub struct EnsembleDir {
    root: PathBuf,
}

impl EnsembleDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn averages(&self) -> PathBuf {
        self.root.join("averages.csv")
    }

    /// Energy counts per temperature, merged over the used realizations.
    pub fn energy_counts(&self) -> PathBuf {
        self.root.join("energy_counts.json")
    }

    fn stem(&self, index: usize) -> PathBuf {
        self.root.join("realizations").join(format!("r{index:05}"))
    }

    pub fn record(&self, index: usize) -> PathBuf {
        self.stem(index).with_extension("json")
    }

    pub fn record_csv(&self, index: usize) -> PathBuf {
        self.stem(index).with_extension("csv")
    }

    pub fn realization_paths(&self, index: usize) -> RealizationPaths {
        let stem = self.stem(index);
        RealizationPaths {
            checkpoint: stem.with_extension("ckpt"),
            dump: stem.with_file_name(format!("r{index:05}_samples.csv")),
        }
    }
}

/// Disorder averages at one temperature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedRow {
    pub temperature: f64,
    pub energy: BootstrapEstimate<f64>,
    pub specific_heat: BootstrapEstimate<f64>,
    pub q: BootstrapEstimate<f64>,
    pub susceptibility: BootstrapEstimate<f64>,
    pub g0: BootstrapEstimate<f64>,
    pub gk: BootstrapEstimate<f64>,
    /// From the averaged structure factors; `None` when they are noise dominated.
    pub xi: Option<BootstrapEstimate<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: DisorderPoint,
    pub rows: Vec<AveragedRow>,
    pub n_used: usize,
    pub excluded: Vec<usize>,
    pub records: Vec<RealizationRecord>,
}

impl PointSummary {
    /// Energy counts at temperature slot `k` merged over the used realizations.
    pub fn merged_energy_counts(&self, k: usize) -> Option<EnergyCounts> {
        let mut merged = EnergyCounts::new(self.point.size.pow(3));
        for r in &self.records {
            merged.merge(r.energy_counts.as_ref()?.get(k)?);
        }
        Some(merged)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "model", "L", "p", "T", "E", "E_err", "Cv", "Cv_err", "q", "q_err", "chi", "chi_err", "G0", "G0_err", "Gk",
            "Gk_err", "xi", "xi_err", "xi_over_L", "xi_over_L_err", "n_used", "n_excluded",
        ])?;
        let l = self.point.size as f64;
        for r in &self.rows {
            let mut rec = vec![
                self.point.model.as_str().to_string(),
                self.point.size.to_string(),
                self.point.p.to_string(),
                r.temperature.to_string(),
            ];
            for e in [&r.energy, &r.specific_heat, &r.q, &r.susceptibility, &r.g0, &r.gk] {
                rec.push(e.value.to_string());
                rec.push(e.error.to_string());
            }
            match &r.xi {
                Some(x) => rec.extend([x.value, x.error, x.value / l, x.error / l].map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), 4)),
            }
            rec.push(self.n_used.to_string());
            rec.push(self.excluded.len().to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_one(point: &DisorderPoint, lattice: &Arc<Lattice>, index: usize, control: &RunControl, dir: Option<&EnsembleDir>) -> Result<RealizationRecord> {
    let disorder = Arc::new(point.sample_disorder(lattice, index)?);
    let grid = TemperatureGrid::from_temperatures(point.temperatures.clone())?;
    let mut cfg = point.realization.clone();
    if point.parallel_realizations {
        cfg.sweep.parallel = false;
    }
    let paths = dir.map(|d| d.realization_paths(index));
    let seed = point.dynamics_seed(index);
    match point.model {
        ModelKind::Rpi => {
            let model = RpiModel::new(Arc::clone(lattice), disorder)?;
            run_realization(&model, &grid, index, seed, &cfg, control, paths.as_ref())
        }
        ModelKind::Racat => {
            let model = RacatModel::new(Arc::clone(lattice), disorder)?;
            run_realization(&model, &grid, index, seed, &cfg, control, paths.as_ref())
        }
    }
}

/// Samples `n_disorder` realizations of one point and averages them.
///
/// With a directory, each finished realization is written as JSON plus CSV
/// and skipped on the next invocation, unfinished ones resume from their
/// checkpoints, so an interrupted run continued later gives the same result
/// as an uninterrupted one. Realizations failing the equilibration test are
/// excluded and listed; more than `max_flagged_fraction` of them is an error.
pub fn run_disorder_point(point: &DisorderPoint, dir: Option<&EnsembleDir>, control: &RunControl) -> Result<PointSummary> {
    point.validate()?;
    let lattice = Arc::new(Lattice::new(point.size)?);
    let mut manifest = Manifest::new(point);
    if let Some(d) = dir {
        fs::create_dir_all(d.root().join("realizations"))?;
        if d.manifest().exists() {
            let old = Manifest::read(&d.manifest())?;
            if old.point != *point {
                return Err(Error::Invalid(format!(
                    "{} holds a run with different parameters",
                    d.root().display()
                )));
            }
        }
        manifest.write(&d.manifest())?;
    }

    let mut records: Vec<Option<RealizationRecord>> = vec![None; point.n_disorder];
    if let Some(d) = dir {
        for (i, slot) in records.iter_mut().enumerate() {
            let path = d.record(i);
            if path.exists() {
                let rec: RealizationRecord = serde_json::from_slice(&fs::read(&path)?)?;
                manifest.status[i] = rec.status;
                *slot = Some(rec);
            }
        }
    }
    let todo: Vec<usize> = (0..point.n_disorder).filter(|&i| records[i].is_none()).collect();
    let status = Mutex::new(manifest.status.clone());
    let work = |i: usize| -> Result<RealizationRecord> {
        status.lock().unwrap()[i] = RealizationStatus::Running;
        let rec = run_one(point, &lattice, i, control, dir);
        let mut st = status.lock().unwrap();
        match &rec {
            Ok(r) => {
                st[i] = r.status;
                if let Some(d) = dir {
                    fs::write(d.record(i), serde_json::to_vec(r)?)?;
                    r.write_csv(&d.record_csv(i))?;
                }
                if r.status == RealizationStatus::Failed {
                    log::warn!("realization {i} failed the equilibration test: {:?}", r.equilibration.worst);
                }
            }
            Err(_) => st[i] = RealizationStatus::Pending,
        }
        rec
    };
    let results: Vec<(usize, Result<RealizationRecord>)> = if point.parallel_realizations {
        todo.par_iter().map(|&i| (i, work(i))).collect()
    } else {
        let mut out = Vec::new();
        for &i in &todo {
            let r = work(i);
            let stop = r.is_err();
            out.push((i, r));
            if stop {
                break;
            }
        }
        out
    };
    manifest.status = status.into_inner().unwrap();
    let mut first_error = None;
    for (i, r) in results {
        match r {
            Ok(rec) => records[i] = Some(rec),
            Err(e) => {
                // an interruption outranks follow-on budget stops
                let replace = matches!(
                    (&first_error, &e),
                    (None, _) | (Some(Error::SweepBudget { .. }), Error::Interrupted { .. })
                );
                if replace {
                    first_error = Some(e);
                }
            }
        }
    }
    if let Some(e) = first_error {
        if let Some(d) = dir {
            manifest.write(&d.manifest())?;
        }
        return Err(match e {
            Error::Interrupted { .. } => Error::Interrupted {
                sweeps: control.sweeps_used(),
            },
            Error::SweepBudget { .. } => Error::SweepBudget {
                sweeps: control.sweeps_used(),
            },
            other => other,
        });
    }

    let records: Vec<RealizationRecord> = records.into_iter().map(Option::unwrap).collect();
    let excluded: Vec<usize> = records
        .iter()
        .filter(|r| r.status != RealizationStatus::Equilibrated)
        .map(|r| r.index)
        .collect();
    manifest.excluded = excluded.clone();
    if let Some(d) = dir {
        manifest.write(&d.manifest())?;
    }
    if !excluded.is_empty() {
        log::warn!("{} of {} realizations excluded: {:?}", excluded.len(), records.len(), excluded);
    }
    if excluded.len() as f64 > point.max_flagged_fraction * records.len() as f64 {
        return Err(Error::EquilibrationFailure {
            flagged: excluded.len(),
            total: records.len(),
            limit_percent: 100.0 * point.max_flagged_fraction,
        });
    }
    let used: Vec<RealizationRecord> = records
        .into_iter()
        .filter(|r| r.status == RealizationStatus::Equilibrated)
        .collect();
    if used.is_empty() {
        return Err(Error::EquilibrationFailure {
            flagged: excluded.len(),
            total: excluded.len(),
            limit_percent: 100.0 * point.max_flagged_fraction,
        });
    }
    let rows = average_rows(point, &used)?;
    let summary = PointSummary {
        point: point.clone(),
        rows,
        n_used: used.len(),
        excluded,
        records: used,
    };
    if let Some(d) = dir {
        summary.write_csv(&d.averages())?;
        if point.realization.energy_histogram {
            let merged: Vec<EnergyCounts> = (0..point.temperatures.len())
                .filter_map(|k| summary.merged_energy_counts(k))
                .collect();
            fs::write(d.energy_counts(), serde_json::to_vec(&merged)?)?;
        }
    }
    Ok(summary)
}

fn average_rows(point: &DisorderPoint, used: &[RealizationRecord]) -> Result<Vec<AveragedRow>> {
    let n_boot = point.n_bootstrap;
    let l = point.size;
    (0..point.temperatures.len())
        .map(|k| {
            let seed = |obs: u64| derive_seed(point.master_seed, (k as u64) << 8 | obs, SeedTag::Bootstrap);
            let col = |f: fn(&super::realization::RealizationRow) -> f64| -> Vec<f64> {
                used.iter().map(|r| f(&r.rows[k])).collect()
            };
            let pairs: Vec<(f64, f64)> = used.iter().map(|r| (r.rows[k].g0, r.rows[k].gk)).collect();
            let xi_of = |xs: &[(f64, f64)]| {
                let n = xs.len() as f64;
                let g0 = xs.iter().map(|x| x.0).sum::<f64>() / n;
                let gk = xs.iter().map(|x| x.1).sum::<f64>() / n;
                xi_second_moment(g0, gk, l).value().unwrap_or(f64::NAN)
            };
            let xi = if xi_of(&pairs).is_finite() {
                Some(bootstrap(&pairs, n_boot, seed(6), xi_of)?)
            } else {
                None
            };
            Ok(AveragedRow {
                temperature: point.temperatures[k],
                energy: disorder_average(&col(|r| r.energy), n_boot, seed(0))?,
                specific_heat: disorder_average(&col(|r| r.specific_heat), n_boot, seed(1))?,
                q: disorder_average(&col(|r| r.q), n_boot, seed(2))?,
                susceptibility: disorder_average(&col(|r| r.susceptibility), n_boot, seed(3))?,
                g0: disorder_average(&col(|r| r.g0), n_boot, seed(4))?,
                gk: disorder_average(&col(|r| r.gk), n_boot, seed(5))?,
                xi,
            })
        })
        .collect()
}
