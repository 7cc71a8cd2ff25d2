//! Base-model accuracy examples on Cora (skipped when the dataset has not been fetched).

use std::path::PathBuf;

use cns_core::bench::{
    build_features, post_process, train_base, BaseKind, ExperimentConfig, FeatureConfig,
};
use cns_core::correct_smooth::{PipelineMode, Variant};
use cns_core::data::{load_dataset, make_split};
use cns_core::metrics::{accuracy, argmax_rows};
use cns_core::spectral::{FeatureMode, FeatureScaling};

fn cora() -> Option<cns_core::data::Dataset> {
    let root = std::env::var_os("CNS_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    let dir = root.join("cora");
    if !dir.join("edges.txt").exists() {
        eprintln!("skipping: {} not present", dir.display());
        return None;
    }
    Some(load_dataset(&dir).unwrap())
}

/// Mean test accuracy (percent) of `base` over split seeds 0..5 on 60/20/20 splits.
fn mean_base_accuracy(base: BaseKind, scaling: FeatureScaling) -> Option<f64> {
    let d = cora()?;
    let features = FeatureConfig {
        scaling,
        ..Default::default()
    };
    let (x, _) = build_features(&d, base.feature_mode(true), &features).unwrap();
    let eligible = d.labeled_nodes();
    let mut total = 0.0;
    for seed in 0..5 {
        let split = make_split(&eligible, (0.6, 0.2, 0.2), seed).unwrap();
        let run = train_base(&d, x.view(), &split, &base.train_config(seed)).unwrap();
        total += accuracy(&argmax_rows(run.z.view()), &d.labels, &split.test).unwrap();
    }
    Some(100.0 * total / 5.0)
}

#[test]
fn cora_mlp_on_raw_plus_spectral() {
    let Some(acc) = mean_base_accuracy(BaseKind::Mlp, FeatureScaling::RawNonBinary) else {
        return;
    };
    eprintln!("cora MLP base accuracy {acc:.2}");
    assert!(
        (acc - 74.06).abs() <= 2.0,
        "cora MLP base accuracy {acc:.2}, expected 74.06 ± 2.0"
    );
}

#[test]
fn cora_plain_linear_base_only() {
    let Some(acc) = mean_base_accuracy(BaseKind::PlainLinear, FeatureScaling::StandardizeNonBinary)
    else {
        return;
    };
    eprintln!("cora Plain Linear base accuracy {acc:.2}");
    assert!(
        (acc - 73.85).abs() <= 2.0,
        "cora Plain Linear base accuracy {acc:.2}, expected 73.85 ± 2.0"
    );
}

#[test]
fn cora_stage_ordering() {
    let Some(d) = cora() else { return };
    let (x, _) = build_features(&d, FeatureMode::RawOnly, &FeatureConfig::default()).unwrap();
    let eligible = d.labeled_nodes();
    let full = ExperimentConfig::new(
        Some(BaseKind::PlainLinear),
        PipelineMode::Full,
        Variant::Autoscale,
    );
    let correct = ExperimentConfig::new(
        Some(BaseKind::PlainLinear),
        PipelineMode::CorrectOnly,
        Variant::Autoscale,
    );
    let (mut base_acc, mut correct_acc, mut full_acc) = (0.0, 0.0, 0.0);
    for seed in 0..5 {
        let split = make_split(&eligible, (0.6, 0.2, 0.2), seed).unwrap();
        let run = train_base(
            &d,
            x.view(),
            &split,
            &BaseKind::PlainLinear.train_config(seed),
        )
        .unwrap();
        let f = post_process(&d, Some(&run), &split, &full)
            .unwrap()
            .report
            .test_accuracy;
        let c = post_process(&d, Some(&run), &split, &correct)
            .unwrap()
            .report
            .test_accuracy;
        base_acc += 20.0 * f.base.unwrap();
        full_acc += 20.0 * f.final_;
        correct_acc += 20.0 * c.final_;
    }
    eprintln!(
        "cora plain linear: base {base_acc:.2}, correct-only {correct_acc:.2}, full {full_acc:.2}"
    );
    assert!(full_acc >= correct_acc);
    assert!(correct_acc >= base_acc - 0.5);
    assert!(full_acc >= base_acc + 1.0);
}
