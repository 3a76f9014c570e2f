//! Run configuration: a flat JSON schema whose keys the command-line flags mirror.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xcube_core::ensemble::{DisorderPoint, RealizationConfig};
use xcube_core::mc::{GridScheme, SweepConfig, TemperatureGrid};
use xcube_core::models::ModelKind;

use crate::presets::Preset;
use crate::CliError;

/// Partially specified configuration; later layers override earlier ones.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub model: Option<ModelKind>,
    #[serde(rename = "L")]
    pub size: Option<usize>,
    pub p: Option<f64>,
    pub n_temps: Option<usize>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub grid: Option<String>,
    pub tau_max: Option<u32>,
    pub nd: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub stride: Option<u64>,
    pub overrelaxation: Option<u32>,
    pub bootstrap: Option<usize>,
    pub equilibration_sigma: Option<f64>,
    pub max_flagged_fraction: Option<f64>,
    pub checkpoint_interval: Option<u64>,
    pub dump_stride: Option<u64>,
    pub track_sg: Option<bool>,
    pub budget: Option<u64>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ConfigLayer {
    pub fn from_preset(p: &Preset) -> Self {
        Self {
            model: Some(p.model),
            size: Some(p.size),
            p: Some(p.p),
            n_temps: Some(p.n_temps),
            t_min: Some(p.t_min),
            t_max: Some(p.t_max),
            tau_max: Some(p.tau_max),
            nd: Some(p.n_disorder),
            ..Self::default()
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Keys set in `self`, for the manifest's record of overrides.
    pub fn keys(&self) -> Vec<String> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m.into_iter().filter(|(_, v)| !v.is_null()).map(|(k, _)| k).collect(),
            _ => Vec::new(),
        }
    }

    pub fn overlay(&mut self, top: &ConfigLayer) {
        overlay!(
            self, top, model, size, p, n_temps, t_min, t_max, grid, tau_max, nd, seed, workers, out, stride,
            overrelaxation, bootstrap, equilibration_sigma, max_flagged_fraction, checkpoint_interval, dump_stride,
            track_sg, budget
        );
    }
}

/// Fully resolved and validated configuration of a `simulate` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(rename = "L")]
    pub size: usize,
    pub p: f64,
    pub n_temps: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub grid: GridScheme,
    pub tau_max: u32,
    pub nd: usize,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
    pub stride: u64,
    pub overrelaxation: u32,
    pub bootstrap: usize,
    pub equilibration_sigma: f64,
    pub max_flagged_fraction: f64,
    pub checkpoint_interval: u64,
    pub dump_stride: u64,
    pub track_sg: bool,
    pub budget: Option<u64>,
}

fn missing(field: &str) -> CliError {
    CliError::Config(format!("`{field}` is required (give it directly or through --preset)"))
}

fn bad(field: &str, detail: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{field}`: {detail}"))
}

impl RunConfig {
    pub fn resolve(layer: &ConfigLayer) -> Result<Self, CliError> {
        let model = layer.model.ok_or_else(|| missing("model"))?;
        let size = layer.size.ok_or_else(|| missing("L"))?;
        let p = layer.p.ok_or_else(|| missing("p"))?;
        let n_temps = layer.n_temps.ok_or_else(|| missing("n_temps"))?;
        let t_min = layer.t_min.ok_or_else(|| missing("t_min"))?;
        let t_max = layer.t_max.ok_or_else(|| missing("t_max"))?;
        let grid: GridScheme = match layer.grid.as_deref() {
            None => GridScheme::Geometric,
            Some(s) => s.parse().map_err(|e| bad("grid", e))?,
        };
        let out = layer
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("runs/{}-p{p:.3}-L{size}", model.as_str())));
        let cfg = Self {
            model,
            size,
            p,
            n_temps,
            t_min,
            t_max,
            grid,
            tau_max: layer.tau_max.unwrap_or(12),
            nd: layer.nd.unwrap_or(1),
            seed: layer.seed.unwrap_or(1),
            workers: layer.workers,
            out,
            stride: layer.stride.unwrap_or(16),
            overrelaxation: layer.overrelaxation.unwrap_or(1),
            bootstrap: layer.bootstrap.unwrap_or(xcube_core::ensemble::DEFAULT_RESAMPLES),
            equilibration_sigma: layer.equilibration_sigma.unwrap_or(5.0),
            max_flagged_fraction: layer.max_flagged_fraction.unwrap_or(0.1),
            checkpoint_interval: layer.checkpoint_interval.unwrap_or(1 << 16),
            dump_stride: layer.dump_stride.unwrap_or(0),
            track_sg: layer.track_sg.unwrap_or(false),
            budget: layer.budget,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.size < 2 {
            return Err(bad("L", format!("need L >= 2, got {}", self.size)));
        }
        if !(0.0..0.5).contains(&self.p) {
            return Err(bad("p", format!("need 0 <= p < 0.5, got {}", self.p)));
        }
        if self.n_temps < 2 {
            return Err(bad("n_temps", format!("need at least 2 temperatures, got {}", self.n_temps)));
        }
        if !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max.is_finite()) {
            return Err(bad("t_min", format!("need 0 < t_min < t_max, got [{}, {}]", self.t_min, self.t_max)));
        }
        if !(4..=40).contains(&self.tau_max) {
            return Err(bad("tau_max", format!("need 4 <= tau_max <= 40, got {}", self.tau_max)));
        }
        if self.nd == 0 {
            return Err(bad("nd", "need at least one disorder realization"));
        }
        if self.workers == Some(0) {
            return Err(bad("workers", "need at least one worker"));
        }
        if self.bootstrap < 2 {
            return Err(bad("bootstrap", format!("need at least 2 resamples, got {}", self.bootstrap)));
        }
        if !(self.equilibration_sigma > 0.0) {
            return Err(bad("equilibration_sigma", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.max_flagged_fraction) {
            return Err(bad("max_flagged_fraction", "must lie in [0, 1]"));
        }
        if self.checkpoint_interval == 0 {
            return Err(bad("checkpoint_interval", "must be positive"));
        }
        if self.budget == Some(0) {
            return Err(bad("budget", "must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TemperatureGrid<f64>, CliError> {
        TemperatureGrid::new(self.n_temps, self.t_min, self.t_max, self.grid).map_err(|e| bad("grid", e))
    }

    pub fn disorder_point(&self) -> Result<DisorderPoint, CliError> {
        Ok(DisorderPoint {
            model: self.model,
            size: self.size,
            p: self.p,
            temperatures: self.grid()?.temperatures().to_vec(),
            n_disorder: self.nd,
            master_seed: self.seed,
            realization: RealizationConfig {
                tau_max: self.tau_max,
                sweep: SweepConfig {
                    overrelaxation_passes: self.overrelaxation,
                    ..SweepConfig::default()
                },
                correlator_stride: self.stride,
                track_sg: self.track_sg,
                energy_histogram: true,
                equilibration_sigma: self.equilibration_sigma,
                checkpoint_interval: self.checkpoint_interval,
                dump_stride: self.dump_stride,
            },
            n_bootstrap: self.bootstrap,
            max_flagged_fraction: self.max_flagged_fraction,
            parallel_realizations: self.nd > 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn flags_override_presets() {
        let mut layer = ConfigLayer::from_preset(&presets::find("rpi-p0.000-L4").unwrap());
        layer.overlay(&ConfigLayer {
            tau_max: Some(12),
            ..ConfigLayer::default()
        });
        let cfg = RunConfig::resolve(&layer).unwrap();
        assert_eq!(cfg.tau_max, 12);
        assert_eq!(cfg.n_temps, 56);
        assert_eq!(cfg.t_max, 6.23);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<ConfigLayer>(r#"{"model":"rpi","temperature":3}"#).unwrap_err();
        assert!(err.to_string().contains("temperature"));
    }

    #[test]
    fn invalid_fields_are_named() {
        let layer = ConfigLayer {
            model: Some(ModelKind::Racat),
            size: Some(4),
            p: Some(0.7),
            n_temps: Some(8),
            t_min: Some(0.5),
            t_max: Some(2.0),
            ..ConfigLayer::default()
        };
        let msg = RunConfig::resolve(&layer).unwrap_err().to_string();
        assert!(msg.contains("`p`"), "{msg}");
        let msg = RunConfig::resolve(&ConfigLayer::default()).unwrap_err().to_string();
        assert!(msg.contains("`model`"), "{msg}");
    }

    #[test]
    fn resolved_config_builds_a_disorder_point() {
        let layer = ConfigLayer::from_preset(&presets::find("racat-p0.075-L12").unwrap());
        let point = RunConfig::resolve(&layer).unwrap().disorder_point().unwrap();
        assert_eq!(point.temperatures.len(), 64);
        assert!((point.temperatures[0] - 0.53).abs() < 1e-12);
        assert!((point.temperatures[63] - 2.25).abs() < 1e-12);
        assert_eq!(point.n_disorder, 800);
    }
}
