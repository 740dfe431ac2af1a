use super::*;
use crate::datagen::{generate_split, GenConfig, SplitKind};
use crate::scalar::to_f64;

// Micro-scale runs: real desk architecture, two epochs, tiny data. Enough
// to exercise every regime contract without real training time.
fn micro_cfg(seed: u64) -> TrainingConfig {
    let mut cfg = TrainingConfig::desk(seed);
    cfg.epochs_regressor = 2;
    cfg.epochs_classifier = 2;
    cfg.batch_size = 16;
    cfg
}

fn micro_data() -> (DatasetSplit, DatasetSplit) {
    let cfg = GenConfig {
        classes: Some(desk_classes()),
        ..GenConfig::default()
    };
    let train = generate_split(SplitKind::Train, 12, 1001, &cfg).unwrap();
    let val = generate_split(SplitKind::Val, 6, 1002, &cfg).unwrap();
    (train, val)
}

#[test]
fn independent_and_sequential_share_bit_identical_regressors() {
    let (train, val) = micro_data();
    let cfg = micro_cfg(7);
    let ind: ModelBundle<f32> = train_independent(&train, &val, &cfg).unwrap();
    let seq: ModelBundle<f32> = train_sequential(&train, &val, &cfg).unwrap();
    let a = ind.regressor.as_ref().unwrap();
    let b = seq.regressor.as_ref().unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(ind.provenance.classifier_input, "pristine");
    assert_eq!(seq.provenance.classifier_input, "predicted");
}

#[test]
fn sequential_classifier_sees_frozen_regressor_outputs() {
    let (train, val) = micro_data();
    let cfg = micro_cfg(8);
    let seq: ModelBundle<f32> = train_sequential(&train, &val, &cfg).unwrap();
    // the frozen regressor must reproduce exactly the inputs the classifier
    // was trained on
    let reg = seq.regressor.as_ref().unwrap();
    let data = tensors_from_split::<f32>(&train);
    let a = predict_concepts(reg, &data, cfg.batch_size).unwrap();
    let b = predict_concepts(reg, &data, cfg.batch_size).unwrap();
    assert_eq!(a, b);
}

#[test]
fn joint_loss_decomposes_into_weighted_ce_plus_per_head_mse() {
    let (train, val) = micro_data();
    let cfg = micro_cfg(9);
    let joint: ModelBundle<f32> = train_joint(&train, &val, &cfg).unwrap();
    let reg = joint.regressor.as_ref().unwrap();
    let data = tensors_from_split::<f32>(&train);
    let batch = data.gather(&(0..32).collect::<Vec<_>>());

    let (total, ce, _) = joint_loss_terms(reg, &joint.classifier, &batch, 0.3).unwrap();

    // independent route: 0.3 * CE + (0.7/5) * sum of per-head MSEs
    let c_hat = reg.forward_eval(&batch.x).unwrap();
    let truth = batch.concepts.as_ref().unwrap();
    let n = batch.len();
    let mut head_mse = [0.0f64; 5];
    for ex in 0..n {
        for h in 0..5 {
            let d = to_f64(c_hat.data()[ex * 5 + h]) - to_f64(truth.data()[ex * 5 + h]);
            head_mse[h] += d * d;
        }
    }
    let per_head = 0.7 / 5.0;
    let recomposed = 0.3 * ce + per_head * head_mse.iter().map(|s| s / n as f64).sum::<f64>();
    assert!(
        (total - recomposed).abs() < 1e-6,
        "total {total} vs recomposed {recomposed}"
    );
}

#[test]
fn full_classifier_weight_reduces_to_pure_cross_entropy() {
    let (train, val) = micro_data();
    let cfg = micro_cfg(10);
    let joint: ModelBundle<f32> = train_joint(&train, &val, &cfg).unwrap();
    let reg = joint.regressor.as_ref().unwrap();
    let data = tensors_from_split::<f32>(&val);
    let (total, ce, _) = joint_loss_terms(reg, &joint.classifier, &data, 1.0).unwrap();
    assert!((total - ce).abs() < 1e-12);
}

#[test]
fn joint_weight_outside_unit_interval_is_rejected() {
    let (train, val) = micro_data();
    let mut cfg = micro_cfg(11);
    cfg.joint_classifier_weight = 1.0;
    assert!(matches!(
        train_joint::<f32>(&train, &val, &cfg),
        Err(TrainError::InvalidConfig(_))
    ));
}

#[test]
fn baseline_has_no_regressor_and_class_width_output() {
    let (train, val) = micro_data();
    let cfg = micro_cfg(12);
    let base: ModelBundle<f32> = train_baseline(&train, &val, &cfg).unwrap();
    assert!(base.regressor.is_none());
    assert!(!base.is_concept_bottleneck());
    assert_eq!(
        base.classifier.spec.output_shape().unwrap(),
        vec![train.class_list.len()]
    );
    assert_eq!(base.provenance.classifier_input, "raw-iq");
}

#[test]
fn predictions_are_deterministic_distributions_with_explanations() {
    let (train, val) = micro_data();
    let cfg = micro_cfg(13);
    let bundle: ModelBundle<f32> = train_independent(&train, &val, &cfg).unwrap();
    let iq: Vec<f32> = train.examples[0].iq.clone();
    let (dist, concepts) = predict(&bundle, &iq).unwrap();
    let (dist2, concepts2) = predict(&bundle, &iq).unwrap();
    assert_eq!(dist, dist2);
    assert_eq!(concepts, concepts2);
    let c = concepts.expect("CB bundle must explain its prediction");
    assert!(c.to_array().iter().all(|v| v.is_finite()));
    let sum: f32 = dist.iter().sum();
    assert!((sum - 1.0).abs() < 1e-6);
    assert_eq!(dist.len(), 4);

    let base: ModelBundle<f32> = train_baseline(&train, &val, &cfg).unwrap();
    let (bdist, bconcepts) = predict(&base, &iq).unwrap();
    assert!(bconcepts.is_none());
    assert_eq!(bdist.len(), 4);
}

#[test]
fn training_is_reproducible_per_seed() {
    let (train, val) = micro_data();
    let cfg = micro_cfg(14);
    let a: ModelBundle<f32> = train_joint(&train, &val, &cfg).unwrap();
    let b: ModelBundle<f32> = train_joint(&train, &val, &cfg).unwrap();
    assert_eq!(a.regressor.as_ref().unwrap().params, b.regressor.as_ref().unwrap().params);
    assert_eq!(a.classifier.params, b.classifier.params);
    assert_eq!(a.provenance.bundle_id, b.provenance.bundle_id);
}

#[test]
fn bundle_round_trips_through_disk() {
    let (train, val) = micro_data();
    let cfg = micro_cfg(15);
    let bundle: ModelBundle<f32> = train_sequential(&train, &val, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&bundle, dir.path()).unwrap();
    let back: ModelBundle<f32> = load_bundle(dir.path()).unwrap();
    assert_eq!(back.kind, Regime::Sequential);
    assert_eq!(back.class_list, bundle.class_list);
    assert_eq!(
        back.regressor.as_ref().unwrap().params,
        bundle.regressor.as_ref().unwrap().params
    );
    assert_eq!(back.classifier.params, bundle.classifier.params);
    assert_eq!(back.provenance.bundle_id, bundle.provenance.bundle_id);
}

#[test]
fn mismatched_splits_are_rejected() {
    let cfg_full = GenConfig::default();
    let cfg_desk = GenConfig {
        classes: Some(desk_classes()),
        ..GenConfig::default()
    };
    let train = generate_split(SplitKind::Train, 2, 1, &cfg_desk).unwrap();
    let val = generate_split(SplitKind::Val, 2, 2, &cfg_full).unwrap();
    assert!(matches!(
        train_independent::<f32>(&train, &val, &micro_cfg(16)),
        Err(TrainError::DataMismatch(_))
    ));
}
