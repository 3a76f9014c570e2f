use std::fs;
use std::path::Path;

use xcube_core::analysis::{analyze_directory, AnalysisOptions, CrossingVerdict, TransitionOrder};
use xcube_core::observables::EnergyCounts;

/// `xi/L` either crossing at `t_c` or ordered by size everywhere.
fn write_ensemble(root: &Path, model: &str, l: usize, p: f64, crossing: Option<f64>, cv_peak: f64) {
    let dir = root.join(format!("{model}-p{p:.3}-L{l}"));
    fs::create_dir_all(&dir).unwrap();
    let mut out = String::from("model,L,p,T,Cv,Cv_err,xi_over_L,xi_over_L_err\n");
    for i in 0..21 {
        let t = 1.0 + 0.05 * i as f64;
        let x = match crossing {
            Some(tc) => 0.6 - 0.05 * l as f64 * (t - tc),
            None => 2.0 / l as f64 - 0.1 * t,
        };
        let cv = 5.0 - 40.0 * (t - cv_peak).powi(2);
        out += &format!("{model},{l},{p},{t},{cv},0.01,{x},0.001\n");
    }
    fs::write(dir.join("averages.csv"), out).unwrap();
}

#[test]
fn bracketing_threshold_from_synthetic_ensembles() {
    let root = tempfile::tempdir().unwrap();
    for (i, p) in [0.146, 0.148, 0.150, 0.152, 0.154, 0.156].into_iter().enumerate() {
        for l in [4, 6, 8] {
            let crossing = (i <= 3).then_some(1.4);
            write_ensemble(root.path(), "rpi", l, p, crossing, 1.5);
        }
    }
    let out = tempfile::tempdir().unwrap();
    let report = analyze_directory(root.path(), out.path(), &AnalysisOptions::default()).unwrap();
    assert_eq!(report.points.len(), 6);
    for pt in &report.points {
        if pt.p <= 0.152 {
            assert_eq!(pt.crossing, Some(CrossingVerdict::Crossing));
            assert_eq!(pt.phase.order, TransitionOrder::Second);
            let (t, e) = (pt.phase.t_c.unwrap(), pt.phase.err.unwrap());
            assert!((t - 1.4).abs() < 3.0 * e + 1e-9, "{t} +- {e}");
        } else {
            assert_eq!(pt.crossing, Some(CrossingVerdict::NoCrossing));
            assert_eq!(pt.phase.order, TransitionOrder::None);
        }
    }
    let est = report.thresholds[0].estimate.as_ref().unwrap();
    assert!((est.p_c - 0.153).abs() < 1e-12);
    assert!((est.uncertainty - 0.002).abs() < 1e-12);

    let csv = fs::read_to_string(out.path().join("phase_diagram.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.lines().next().unwrap().starts_with("model,p,T_c,err,order"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out.path().join("threshold.json")).unwrap()).unwrap();
    assert_eq!(json[0]["model"], "rpi");
}

#[test]
fn double_peaked_histograms_give_a_first_order_point() {
    let root = tempfile::tempdir().unwrap();
    for l in [4usize, 6, 8] {
        let peak = 2.0 + 2.0 / (l * l) as f64;
        write_ensemble(root.path(), "racat", l, 0.01, Some(2.0), peak);
        // two well separated energy levels at every temperature
        let n = l.pow(3);
        let mut c = EnergyCounts::new(n);
        for (e, k) in [(-(2 * n as i64), 500), (-(n as i64), 500)] {
            for _ in 0..k {
                c.add(e);
            }
        }
        for e in (-(2 * n as i64) + 4..-(n as i64)).step_by(4) {
            c.add(e);
        }
        let dir = root.path().join(format!("racat-p0.010-L{l}"));
        fs::write(dir.join("energy_counts.json"), serde_json::to_vec(&vec![c; 21]).unwrap()).unwrap();
    }
    let out = tempfile::tempdir().unwrap();
    let report = analyze_directory(root.path(), out.path(), &AnalysisOptions::default()).unwrap();
    let pt = &report.points[0];
    assert_eq!(pt.bimodal, Some(true));
    assert_eq!(pt.phase.order, TransitionOrder::First);
    let fit = pt.first_order_fit.unwrap();
    assert!((fit.t_c - 2.0).abs() < 3.0 * fit.t_c_err + 1e-3, "{fit:?}");
    // a single p cannot bracket a threshold
    assert!(report.thresholds[0].estimate.is_none());
}

#[test]
fn empty_directory_is_an_error() {
    let root = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    assert!(analyze_directory(root.path(), out.path(), &AnalysisOptions::default()).is_err());
}
