mod common;

use std::fs;

use common::*;
use grmsc::dataset::{
    generate_synthetic, load_dataset, normalize_views, write_dataset, Normalization, SyntheticSpec,
};
use grmsc::metrics::accuracy;
use grmsc::pipeline::run_ablation;
use grmsc::spectral::{affinity_from_representation, spectral_cluster};
use grmsc::{Error, HyperParams, MultiViewDataset, PipelineConfig, Variant};
use rand::seq::SliceRandom;

fn write(dir: &std::path::Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn loads_a_hand_written_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", "1,2,3\n4,5,6\n");
    write(dir.path(), "b.csv", "0.5,0.25,1e-3\n");
    write(dir.path(), "y.csv", "0\n1\n1\n");
    let m = write(
        dir.path(),
        "m.json",
        r#"{"name":"tiny","clusters":2,"views":[{"path":"a.csv","rows":2},{"path":"b.csv","rows":1}],"labels":"y.csv"}"#,
    );
    let ds = load_dataset(&m).unwrap();
    assert_eq!(ds.name, "tiny");
    assert_eq!(ds.n_samples(), 3);
    assert_eq!(ds.views[0][(1, 2)], 6.0);
    assert_eq!(ds.views[1][(0, 2)], 1e-3);
    assert_eq!(ds.labels, Some(vec![0, 1, 1]));
}

#[test]
fn manifest_errors_are_validation_or_io() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "a.csv", "1,2,3\n4,5,6\n");
    write(dir.path(), "short.csv", "1,2\n");
    write(dir.path(), "y.csv", "0\n1\n1\n");
    let cases = [
        (
            r#"{"name":"x","clusters":2,"views":[{"path":"a.csv","rows":2},{"path":"short.csv","rows":1}],"labels":null}"#,
            2,
        ),
        (
            r#"{"name":"x","clusters":2,"views":[{"path":"a.csv","rows":3}],"labels":null}"#,
            2,
        ),
        (
            r#"{"name":"x","clusters":3,"views":[{"path":"a.csv","rows":2}],"labels":"y.csv"}"#,
            2,
        ),
        (
            r#"{"name":"x","clusters":2,"views":[{"path":"missing.csv","rows":2}],"labels":null}"#,
            4,
        ),
        (r#"{"name": 5}"#, 2),
    ];
    for (i, (json, code)) in cases.iter().enumerate() {
        let m = write(dir.path(), &format!("m{i}.json"), json);
        let err: Error = load_dataset(&m).unwrap_err();
        assert_eq!(err.exit_code(), *code, "case {i}: {err}");
    }
    assert_eq!(
        load_dataset(&dir.path().join("nope.json"))
            .unwrap_err()
            .exit_code(),
        4
    );
}

#[test]
fn write_then_load_round_trips() {
    let spec = SyntheticSpec {
        n: 24,
        dims: vec![5, 7],
        seed: 3,
        ..SyntheticSpec::default()
    };
    let ds = generate_synthetic(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(&manifest).unwrap();
    assert_eq!(back.labels, ds.labels);
    assert_eq!(back.clusters, ds.clusters);
    for (a, b) in ds.views.iter().zip(&back.views) {
        assert!((a - b).abs().max() <= 1e-12);
    }
}

#[test]
fn synthetic_generation_is_deterministic_and_balanced() {
    let spec = SyntheticSpec {
        n: 31,
        ..SyntheticSpec::default()
    };
    let a = generate_synthetic(&spec).unwrap();
    assert_eq!(a, generate_synthetic(&spec).unwrap());
    let labels = a.labels.unwrap();
    let sizes: Vec<usize> = (0..3)
        .map(|c| labels.iter().filter(|&&l| l == c).count())
        .collect();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
}

#[test]
fn infeasible_specs_are_rejected() {
    for spec in [
        SyntheticSpec {
            n: 5,
            ..SyntheticSpec::default()
        },
        SyntheticSpec {
            dims: vec![],
            ..SyntheticSpec::default()
        },
        SyntheticSpec {
            consensus_fraction: 1.5,
            ..SyntheticSpec::default()
        },
        SyntheticSpec {
            noise_sigma: -1.0,
            ..SyntheticSpec::default()
        },
    ] {
        assert_eq!(generate_synthetic(&spec).unwrap_err().exit_code(), 2);
    }
}

#[test]
fn zscore_rows_are_standardized() {
    let ds = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let z = normalize_views(&ds, Normalization::ZscoreFeature);
    for v in &z.views {
        for row in v.row_iter() {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            let std = (row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-10 && (std - 1.0).abs() < 1e-10);
        }
    }
    assert_eq!(normalize_views(&ds, Normalization::None), ds);
}

#[test]
fn planted_clusters_are_recoverable_from_each_view() {
    let ds = normalize_views(
        &generate_synthetic(&SyntheticSpec::default()).unwrap(),
        Normalization::UnitColumn,
    );
    let truth = ds.labels.clone().unwrap();
    let params = HyperParams {
        variant: Variant::MscNaive,
        ..HyperParams::default()
    };
    for k in 0..ds.n_views() {
        let fit = grmsc::solver::fit(&ds.single_view(k), &params).unwrap();
        let affinity = affinity_from_representation(&fit.z).unwrap();
        let got = spectral_cluster(&affinity, ds.clusters, 0).unwrap();
        let acc = accuracy(&got.labels, &truth).unwrap();
        assert!(acc >= 0.95, "view {k}: ACC {acc}");
    }
}

#[test]
fn permuting_samples_leaves_every_metric_unchanged() {
    let spec = SyntheticSpec {
        n: 30,
        dims: vec![6, 8],
        subspace_rank: 2,
        seed: 11,
        ..SyntheticSpec::default()
    };
    let ds = normalize_views(
        &generate_synthetic(&spec).unwrap(),
        Normalization::UnitColumn,
    );
    let mut perm: Vec<usize> = (0..ds.n_samples()).collect();
    perm.shuffle(&mut rng(12));
    let moved: MultiViewDataset = ds.permute_samples(&perm);
    let config = PipelineConfig {
        restarts: 2,
        ..PipelineConfig::default()
    };
    let a = run_ablation(&ds, &config).unwrap();
    let b = run_ablation(&moved, &config).unwrap();
    for (ra, rb) in a.iter().zip(&b) {
        for (x, y) in ra.reports().iter().zip(rb.reports()) {
            for (u, v) in x.values().iter().zip(y.values()) {
                assert!((u - v).abs() < 1e-9, "{}: {u} vs {v}", ra.variant);
            }
        }
    }
}
