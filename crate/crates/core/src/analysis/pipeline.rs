use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::crossing::{crossing_finder, CrossingOptions, CrossingVerdict, Curve};
use super::fss::{
    estimate_threshold, fss_first_order_fit, peak_location, EstimateMethod, PhasePoint, SizePoint, ThresholdEstimate,
    TransitionOrder,
};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::observables::{EnergyCounts, Histogram};

/// The columns of an `averages.csv` row that the analysis uses.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct AveragesRow {
    pub model: ModelKind,
    #[serde(rename = "L")]
    pub size: usize,
    pub p: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
    #[serde(rename = "Cv")]
    pub specific_heat: f64,
    #[serde(rename = "Cv_err")]
    pub specific_heat_err: f64,
    #[serde(rename = "xi_over_L")]
    pub xi_over_l: Option<f64>,
    #[serde(rename = "xi_over_L_err")]
    pub xi_over_l_err: Option<f64>,
}

/// Disorder-averaged curves of one `(model, L, p)` ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleCurves {
    pub source: PathBuf,
    pub model: ModelKind,
    pub size: usize,
    pub p: f64,
    pub rows: Vec<AveragesRow>,
    /// Merged energy counts per temperature, when the ensemble kept them.
    pub energy_counts: Option<Vec<EnergyCounts>>,
}

pub fn read_averages(path: &Path) -> Result<Vec<AveragesRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "averages.csv") {
            out.push(path);
        }
    }
    Ok(())
}

/// Every ensemble below `root`, in path order.
pub fn load_ensembles(root: &Path) -> Result<Vec<EnsembleCurves>> {
    let mut files = Vec::new();
    collect_files(root, &mut files)?;
    let mut out = Vec::new();
    for path in files {
        let mut rows = read_averages(&path)?;
        let Some(first) = rows.first().cloned() else { continue };
        if rows.iter().any(|r| r.model != first.model || r.size != first.size || r.p != first.p) {
            return Err(Error::Format {
                path,
                detail: "rows mix different ensembles".into(),
            });
        }
        rows.sort_by(|a, b| a.temperature.total_cmp(&b.temperature));
        let counts_path = path.with_file_name("energy_counts.json");
        let energy_counts = if counts_path.exists() {
            Some(serde_json::from_slice(&fs::read(&counts_path)?)?)
        } else {
            None
        };
        out.push(EnsembleCurves {
            source: path,
            model: first.model,
            size: first.size,
            p: first.p,
            rows,
            energy_counts,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub crossing: CrossingOptions,
    /// Valley-to-peak ratio below which `P(E)` counts as double peaked.
    pub bimodality_threshold: f64,
    pub histogram_bins: usize,
    pub histogram_smoothing: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            crossing: CrossingOptions::default(),
            bimodality_threshold: 0.9,
            histogram_bins: 100,
            histogram_smoothing: 2,
        }
    }
}

/// Classification of one `(model, p)` point from all its sizes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointAnalysis {
    pub model: ModelKind,
    pub p: f64,
    pub sizes: Vec<usize>,
    pub crossing: Option<CrossingVerdict>,
    /// Double-peaked `P(E)` at the specific-heat maximum of the largest size.
    pub bimodal: Option<bool>,
    pub first_order_fit: Option<super::fss::FssFit>,
    pub phase: PhasePoint,
}

impl PointAnalysis {
    /// Verdict fed to the threshold rule; a first-order transition counts as ordered.
    pub fn threshold_verdict(&self) -> CrossingVerdict {
        match self.phase.order {
            TransitionOrder::First | TransitionOrder::Second => CrossingVerdict::Crossing,
            TransitionOrder::None => self.crossing.unwrap_or(CrossingVerdict::Ambiguous),
        }
    }
}

fn bimodal_at_peak(e: &EnsembleCurves, opts: &AnalysisOptions) -> Option<bool> {
    let counts = e.energy_counts.as_ref()?;
    let k = (0..e.rows.len()).max_by(|&a, &b| e.rows[a].specific_heat.total_cmp(&e.rows[b].specific_heat))?;
    let h = Histogram::spanning(counts.get(k)?, opts.histogram_bins).ok()?;
    Some(h.is_bimodal(opts.histogram_smoothing, opts.bimodality_threshold))
}

/// Classifies one `(model, p)` point: a double-peaked energy histogram plus
/// at least three sizes gives a first-order point from the extrapolated
/// specific-heat maxima; otherwise a common crossing of `xi_L/L` gives a
/// continuous transition.
pub fn analyze_point(ensembles: &[&EnsembleCurves], opts: &AnalysisOptions) -> Result<PointAnalysis> {
    let first = ensembles
        .first()
        .ok_or_else(|| Error::InsufficientData("no ensembles for this point".into()))?;
    let (model, p) = (first.model, first.p);
    let mut sorted: Vec<&EnsembleCurves> = ensembles.to_vec();
    sorted.sort_by_key(|e| e.size);
    let sizes: Vec<usize> = sorted.iter().map(|e| e.size).collect();

    let curves: Vec<Curve<f64>> = sorted
        .iter()
        .filter_map(|e| {
            let pts: Vec<(f64, f64, f64)> = e
                .rows
                .iter()
                .filter_map(|r| Some((r.temperature, r.xi_over_l?, r.xi_over_l_err.unwrap_or(0.0))))
                .collect();
            Curve::new(
                e.size,
                pts.iter().map(|x| x.0).collect(),
                pts.iter().map(|x| x.1).collect(),
                pts.iter().map(|x| x.2).collect(),
            )
            .ok()
        })
        .collect();
    let crossing = if curves.len() >= 2 {
        match crossing_finder(&curves, &opts.crossing) {
            Ok(c) => Some(c),
            Err(e) => {
                log::warn!("crossing analysis at {} p={p}: {e}", model.as_str());
                None
            }
        }
    } else {
        None
    };

    let bimodal = sorted.last().and_then(|e| bimodal_at_peak(e, opts));
    let first_order_fit = if bimodal == Some(true) && sorted.len() >= 3 {
        let pts = sorted
            .iter()
            .map(|e| {
                let t: Vec<f64> = e.rows.iter().map(|r| r.temperature).collect();
                let c: Vec<f64> = e.rows.iter().map(|r| r.specific_heat).collect();
                let (t_peak, _) = peak_location(&t, &c)?;
                // half the local grid spacing bounds the peak position
                let k = t.partition_point(|&x| x < t_peak).clamp(1, t.len() - 1);
                Ok(SizePoint {
                    size: e.size,
                    t_c: t_peak,
                    err: 0.5 * (t[k] - t[k - 1]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Some(fss_first_order_fit(&pts)?)
    } else {
        None
    };

    let phase = if let Some(fit) = &first_order_fit {
        PhasePoint::transition(p, fit.t_c, fit.t_c_err, TransitionOrder::First, EstimateMethod::HistogramFss)?
    } else {
        match &crossing {
            Some(c) if c.verdict == CrossingVerdict::Crossing => {
                let err = c.t_c_err.filter(|&e| e > 0.0).unwrap_or_else(|| {
                    // noiseless input: fall back to the spread of pairwise crossings
                    let ts: Vec<f64> = c.pairs.iter().filter_map(|p| p.temperature).collect();
                    let (lo, hi) = ts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
                    (0.5 * (hi - lo)).max(f64::EPSILON * c.t_c.unwrap().abs())
                });
                PhasePoint::transition(p, c.t_c.unwrap(), err, TransitionOrder::Second, EstimateMethod::Crossing)?
            }
            _ => PhasePoint::none(p, EstimateMethod::Crossing),
        }
    };
    Ok(PointAnalysis {
        model,
        p,
        sizes,
        crossing: crossing.map(|c| c.verdict),
        bimodal,
        first_order_fit,
        phase,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub model: ModelKind,
    pub estimate: Option<ThresholdEstimate>,
    /// Why no estimate was produced.
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub points: Vec<PointAnalysis>,
    pub thresholds: Vec<ThresholdReport>,
}

impl AnalysisReport {
    pub fn write_phase_diagram(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["model", "p", "T_c", "err", "order", "method", "crossing", "bimodal"])?;
        for pt in &self.points {
            let order = match pt.phase.order {
                TransitionOrder::First => "first",
                TransitionOrder::Second => "second",
                TransitionOrder::None => "none",
            };
            let method = match pt.phase.method {
                EstimateMethod::HistogramFss => "histogram+fss",
                EstimateMethod::Crossing => "crossing",
            };
            w.write_record([
                pt.model.as_str().to_string(),
                pt.p.to_string(),
                pt.phase.t_c.map_or_else(String::new, |t| t.to_string()),
                pt.phase.err.map_or_else(String::new, |e| e.to_string()),
                order.to_string(),
                method.to_string(),
                pt.crossing.map_or("", |c| c.as_str()).to_string(),
                pt.bimodal.map_or_else(String::new, |b| b.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_thresholds(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(&self.thresholds)?)?;
        Ok(())
    }
}

/// Groups the ensembles by `(model, p)`, classifies every point and applies
/// the bracketing rule per model.
pub fn analyze_ensembles(ensembles: &[EnsembleCurves], opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let mut groups: BTreeMap<(&str, u64), Vec<&EnsembleCurves>> = BTreeMap::new();
    for e in ensembles {
        groups.entry((e.model.as_str(), e.p.to_bits())).or_default().push(e);
    }
    let mut points = Vec::new();
    for group in groups.values_mut() {
        group.sort_by(|a, b| a.p.total_cmp(&b.p));
        points.push(analyze_point(group, opts)?);
    }
    points.sort_by(|a, b| a.model.as_str().cmp(b.model.as_str()).then(a.p.total_cmp(&b.p)));
    let mut thresholds = Vec::new();
    for model in [ModelKind::Rpi, ModelKind::Racat] {
        let verdicts: Vec<(f64, CrossingVerdict)> = points
            .iter()
            .filter(|pt| pt.model == model && pt.p > 0.0)
            .map(|pt| (pt.p, pt.threshold_verdict()))
            .collect();
        if verdicts.is_empty() {
            continue;
        }
        let report = match estimate_threshold(model.species(), &verdicts) {
            Ok(est) => ThresholdReport {
                model,
                estimate: Some(est),
                reason: None,
            },
            Err(e) => ThresholdReport {
                model,
                estimate: None,
                reason: Some(e.to_string()),
            },
        };
        thresholds.push(report);
    }
    Ok(AnalysisReport { points, thresholds })
}

/// Reads every ensemble below `input`, writes `phase_diagram.csv` and
/// `threshold.json` into `output`.
pub fn analyze_directory(input: &Path, output: &Path, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let ensembles = load_ensembles(input)?;
    if ensembles.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no averages.csv found below {}",
            input.display()
        )));
    }
    let report = analyze_ensembles(&ensembles, opts)?;
    fs::create_dir_all(output)?;
    report.write_phase_diagram(&output.join("phase_diagram.csv"))?;
    report.write_thresholds(&output.join("threshold.json"))?;
    Ok(report)
}
