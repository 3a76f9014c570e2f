use std::sync::Arc;

use xcube_core::ensemble::{
    run_disorder_point, DisorderPoint, EnsembleDir, Manifest, RealizationConfig, RealizationStatus, RunControl,
};
use xcube_core::lattice::Lattice;
use xcube_core::mc::SweepConfig;
use xcube_core::models::{Disorder, ModelKind, RacatModel, RpiModel};
use xcube_core::oracle::{disorder_mask, StateTable};
use xcube_core::Error;

fn point(model: ModelKind, p: f64, n_disorder: usize, tau_max: u32) -> DisorderPoint {
    DisorderPoint {
        model,
        size: 2,
        p,
        temperatures: vec![1.5, 2.5, 4.0],
        n_disorder,
        master_seed: 2024,
        realization: RealizationConfig {
            tau_max,
            sweep: SweepConfig {
                parallel: false,
                ..SweepConfig::default()
            },
            correlator_stride: 1,
            checkpoint_interval: 64,
            ..RealizationConfig::default()
        },
        n_bootstrap: 200,
        max_flagged_fraction: 1.0,
        parallel_realizations: true,
    }
}

#[test]
fn single_realization_output_shape() {
    let pt = point(ModelKind::Rpi, 0.0, 1, 8);
    let s = run_disorder_point(&pt, None, &RunControl::default()).unwrap();
    assert_eq!(s.rows.len(), 3);
    for (row, &t) in s.rows.iter().zip(&pt.temperatures) {
        assert_eq!(row.temperature, t);
        assert!((-3.0..=3.0).contains(&row.energy.value));
        assert!(row.specific_heat.value >= 0.0);
        assert!((0.0..=1.0).contains(&row.q.value));
        assert!(row.susceptibility.value >= 0.0);
        assert_eq!(row.energy.error, 0.0);
    }
    assert_eq!(s.n_used + s.excluded.len(), 1);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let pt = point(ModelKind::Racat, 0.1, 4, 8);
    let full_dir = tempfile::tempdir().unwrap();
    let full = run_disorder_point(&pt, Some(&EnsembleDir::new(full_dir.path())), &RunControl::default()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let ens = EnsembleDir::new(dir.path());
    let mut stops = 0;
    let resumed = loop {
        match run_disorder_point(&pt, Some(&ens), &RunControl::new(Some(150))) {
            Ok(s) => break s,
            Err(Error::SweepBudget { .. }) => stops += 1,
            Err(e) => panic!("{e}"),
        }
        let m = Manifest::read(&ens.manifest()).unwrap();
        assert!(m.status.iter().all(|s| *s != RealizationStatus::Running));
    };
    assert!(stops >= 4, "budget should have stopped the run repeatedly, got {stops}");
    assert_eq!(resumed.rows, full.rows);
    assert_eq!(resumed.records, full.records);
    let a = std::fs::read(full_dir.path().join("averages.csv")).unwrap();
    let b = std::fs::read(dir.path().join("averages.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mismatched_directory_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ens = EnsembleDir::new(dir.path());
    run_disorder_point(&point(ModelKind::Rpi, 0.0, 1, 8), Some(&ens), &RunControl::default()).unwrap();
    let other = point(ModelKind::Rpi, 0.05, 1, 8);
    assert!(run_disorder_point(&other, Some(&ens), &RunControl::default()).is_err());
}

#[test]
fn strict_equilibration_flags_and_aborts() {
    let mut pt = point(ModelKind::Rpi, 0.1, 10, 8);
    pt.realization.equilibration_sigma = 2.0;
    pt.max_flagged_fraction = 1.0;
    let dir = tempfile::tempdir().unwrap();
    let s = run_disorder_point(&pt, Some(&EnsembleDir::new(dir.path())), &RunControl::default()).unwrap();
    assert!(!s.excluded.is_empty());
    let m = Manifest::read(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(m.excluded, s.excluded);

    pt.max_flagged_fraction = 0.1;
    match run_disorder_point(&pt, None, &RunControl::default()) {
        Err(Error::EquilibrationFailure { flagged, total, .. }) => assert!(flagged * 10 > total),
        other => panic!("expected an equilibration failure, got {other:?}"),
    }
}

/// Disorder average of the exact energy over the realizations the ensemble draws.
fn exact_mean_energy(pt: &DisorderPoint, k: usize, indices: &[usize]) -> f64 {
    let lattice = Arc::new(Lattice::new(pt.size).unwrap());
    let beta = 1.0 / pt.temperatures[k];
    let clean = Arc::new(Disorder::clean(&lattice, pt.model.species()));
    let table = match pt.model {
        ModelKind::Rpi => StateTable::build(&RpiModel::new(lattice.clone(), clean).unwrap()),
        ModelKind::Racat => StateTable::build(&RacatModel::new(lattice.clone(), clean).unwrap()),
    }
    .unwrap();
    let total: f64 = indices
        .iter()
        .map(|&i| {
            let d = pt.sample_disorder(&lattice, i).unwrap();
            table.thermal(disorder_mask(&d).unwrap(), beta).energy
        })
        .sum();
    total / indices.len() as f64
}

#[test]
fn disorder_averaged_energy_matches_exact_enumeration() {
    for model in [ModelKind::Rpi, ModelKind::Racat] {
        let mut pt = point(model, 0.1, 50, 11);
        pt.realization.correlator_stride = 0;
        let s = run_disorder_point(&pt, None, &RunControl::default()).unwrap();
        let used: Vec<usize> = s.records.iter().map(|r| r.index).collect();
        for (k, row) in s.rows.iter().enumerate() {
            let exact = exact_mean_energy(&pt, k, &used);
            let dev = (row.energy.value - exact).abs();
            assert!(dev < 3.0 * row.energy.error, "{model:?} T={} mc={} exact={exact}", row.temperature, row.energy.value);
        }
    }
}
