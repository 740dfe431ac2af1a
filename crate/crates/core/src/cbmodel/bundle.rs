//! Bundle provenance and on-disk layout: a directory holding bundle.json
//! plus one checkpoint pair per network.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cbmodel::{ModelBundle, Profile, Regime, TrainError, TrainingConfig};
use crate::neuralcore::{
    load_network, save_network, FitReport, NetProvenance, Network,
};
use crate::scalar::{to_f64, Real};
use crate::sigsynth::ModulationScheme;

/// Derived seeds actually used by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPlan {
    pub regressor_init: u64,
    pub regressor_fit: u64,
    pub classifier_init: u64,
    pub classifier_fit: u64,
}

/// Fully-resolved configuration and training history for a bundle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleProvenance {
    pub profile: String,
    pub lr: f64,
    pub epochs_regressor: usize,
    pub epochs_classifier: usize,
    pub joint_classifier_weight: f64,
    pub per_head_weight: f64,
    pub batch_size: usize,
    pub master_seed: u64,
    pub seeds: SeedPlan,
    pub conv_kernels: usize,
    pub dense_width: usize,
    pub n_classes: usize,
    /// What the classifier consumed in training: "pristine", "predicted",
    /// "joint", or "raw-iq" for the baseline.
    pub classifier_input: String,
    /// Joint runs checkpoint on total validation loss; the others on their
    /// own validation loss. Earliest epoch wins ties everywhere.
    pub checkpoint_rule: String,
    pub regressor_fit: Option<FitReport>,
    pub classifier_fit: Option<FitReport>,
    pub bundle_id: String,
}

fn digest_bundle<T: Real>(
    kind: Regime,
    classes: &[ModulationScheme],
    regressor: Option<&Network<T>>,
    classifier: &Network<T>,
) -> String {
    let mut h = Sha256::new();
    h.update(kind.name().as_bytes());
    for c in classes {
        h.update([c.id()]);
    }
    let mut eat = |net: &Network<T>| {
        for t in &net.params {
            for &v in t.data() {
                h.update((to_f64(v) as f32).to_le_bytes());
            }
        }
    };
    if let Some(reg) = regressor {
        eat(reg);
    }
    eat(classifier);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble<T: Real>(
    kind: Regime,
    regressor: Option<Network<T>>,
    classifier: Network<T>,
    class_list: Vec<ModulationScheme>,
    cfg: &TrainingConfig,
    seeds: SeedPlan,
    regressor_fit: Option<FitReport>,
    classifier_fit: Option<FitReport>,
    classifier_input: &str,
) -> Result<ModelBundle<T>, TrainError> {
    let bundle_id = digest_bundle(kind, &class_list, regressor.as_ref(), &classifier);
    let checkpoint_rule = match kind {
        Regime::Joint => "lowest total validation loss, earliest epoch on ties",
        _ => "lowest validation loss, earliest epoch on ties",
    };
    let provenance = BundleProvenance {
        profile: cfg.profile.name().into(),
        lr: cfg.lr,
        epochs_regressor: cfg.epochs_regressor,
        epochs_classifier: cfg.epochs_classifier,
        joint_classifier_weight: cfg.joint_classifier_weight,
        per_head_weight: cfg.per_head_weight(),
        batch_size: cfg.batch_size,
        master_seed: cfg.seed,
        seeds,
        conv_kernels: cfg.profile.conv_kernels(),
        dense_width: cfg.profile.dense_width(),
        n_classes: class_list.len(),
        classifier_input: classifier_input.into(),
        checkpoint_rule: checkpoint_rule.into(),
        regressor_fit,
        classifier_fit,
        bundle_id,
    };
    Ok(ModelBundle {
        kind,
        regressor,
        classifier,
        class_list,
        provenance,
    })
}

#[derive(Serialize, Deserialize)]
struct BundleHeader {
    kind: Regime,
    class_list: Vec<ModulationScheme>,
    provenance: BundleProvenance,
}

/// Writes bundle.json plus `regressor.*` / `classifier.*` checkpoints.
pub fn save_bundle<T: Real>(bundle: &ModelBundle<T>, dir: &Path) -> Result<(), TrainError> {
    fs::create_dir_all(dir)?;
    let header = BundleHeader {
        kind: bundle.kind,
        class_list: bundle.class_list.clone(),
        provenance: bundle.provenance.clone(),
    };
    let json = serde_json::to_vec_pretty(&header).map_err(|e| TrainError::Format(e.to_string()))?;
    fs::write(dir.join("bundle.json"), json)?;

    let p = &bundle.provenance;
    let net_prov = |loss: &str, epochs: usize, fit: &Option<FitReport>, init: u64, fit_seed: u64| {
        NetProvenance {
            init_seed: init,
            fit_seed,
            lr: p.lr,
            epochs,
            batch_size: p.batch_size,
            loss: loss.into(),
            best_epoch: fit.as_ref().map_or(0, |f| f.best_epoch),
            best_val_loss: fit.as_ref().map_or(0.0, |f| f.best_val_loss),
        }
    };
    if let Some(reg) = &bundle.regressor {
        let loss = if bundle.kind == Regime::Joint { "joint" } else { "mse" };
        save_network(
            reg,
            &dir.join("regressor"),
            &net_prov(
                loss,
                p.epochs_regressor,
                &p.regressor_fit,
                p.seeds.regressor_init,
                p.seeds.regressor_fit,
            ),
        )?;
    }
    let (clf_loss, clf_epochs, clf_fit) = match bundle.kind {
        Regime::Joint => ("joint", p.epochs_regressor, &p.regressor_fit),
        Regime::Baseline => ("cross_entropy", p.epochs_regressor, &p.classifier_fit),
        _ => ("cross_entropy", p.epochs_classifier, &p.classifier_fit),
    };
    save_network(
        &bundle.classifier,
        &dir.join("classifier"),
        &net_prov(
            clf_loss,
            clf_epochs,
            clf_fit,
            p.seeds.classifier_init,
            p.seeds.classifier_fit,
        ),
    )?;
    Ok(())
}

pub fn load_bundle<T: Real>(dir: &Path) -> Result<ModelBundle<T>, TrainError> {
    let json = fs::read(dir.join("bundle.json"))?;
    let header: BundleHeader =
        serde_json::from_slice(&json).map_err(|e| TrainError::Format(e.to_string()))?;
    let regressor = if dir.join("regressor.json").exists() {
        Some(load_network::<T>(&dir.join("regressor"))?.0)
    } else {
        None
    };
    let classifier = load_network::<T>(&dir.join("classifier"))?.0;
    if header.kind != Regime::Baseline && regressor.is_none() {
        return Err(TrainError::Format(format!(
            "{} bundle is missing its regressor checkpoint",
            header.kind
        )));
    }
    Ok(ModelBundle {
        kind: header.kind,
        regressor,
        classifier,
        class_list: header.class_list,
        provenance: header.provenance,
    })
}
