//! Concept-bottleneck model assembly and the four training regimes:
//! independent, sequential, joint, and the single-network baseline.

mod arch;
mod bundle;

pub use arch::{
    baseline_spec, classifier_spec, desk_classes, regressor_spec, Profile, TrainingConfig,
    CLASSIFIER_PARAM_COUNT, REGRESSOR_PARAM_COUNT, REGRESSOR_PARAM_COUNT_CLAIMED,
};
pub use bundle::{load_bundle, save_bundle, BundleProvenance, SeedPlan};

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::concepts::ConceptVector;
use crate::datagen::DatasetSplit;
use crate::neuralcore::{
    cross_entropy_loss, fit, mse_loss, Adam, FitConfig, FitReport, LossKind, NetError,
    Network, Tensor, TrainData,
};
use crate::scalar::{cast, Real};
use crate::seed::{derive_seed, Prng};
use crate::sigsynth::ModulationScheme;

#[derive(Debug)]
pub enum TrainError {
    Net(NetError),
    InvalidConfig(String),
    DataMismatch(String),
    Io(std::io::Error),
    Format(String),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Net(e) => write!(f, "{e}"),
            TrainError::InvalidConfig(m) => write!(f, "invalid config: {m}"),
            TrainError::DataMismatch(m) => write!(f, "data mismatch: {m}"),
            TrainError::Io(e) => write!(f, "io error: {e}"),
            TrainError::Format(m) => write!(f, "bundle format: {m}"),
        }
    }
}

impl std::error::Error for TrainError {}

impl From<NetError> for TrainError {
    fn from(e: NetError) -> Self {
        TrainError::Net(e)
    }
}

impl From<std::io::Error> for TrainError {
    fn from(e: std::io::Error) -> Self {
        TrainError::Io(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Independent,
    Sequential,
    Joint,
    Baseline,
}

impl Regime {
    pub const ALL: [Self; 4] = [
        Regime::Independent,
        Regime::Sequential,
        Regime::Joint,
        Regime::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Independent => "independent",
            Regime::Sequential => "sequential",
            Regime::Joint => "joint",
            Regime::Baseline => "baseline",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|r| r.name() == name)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A trained model: regressor + classifier for the CB regimes, classifier
/// slot only for the baseline.
#[derive(Debug, Clone)]
pub struct ModelBundle<T: Real> {
    pub kind: Regime,
    pub regressor: Option<Network<T>>,
    pub classifier: Network<T>,
    pub class_list: Vec<ModulationScheme>,
    pub provenance: BundleProvenance,
}

impl<T: Real> ModelBundle<T> {
    pub fn n_classes(&self) -> usize {
        self.class_list.len()
    }

    pub fn is_concept_bottleneck(&self) -> bool {
        self.regressor.is_some()
    }
}

/// Converts a split into batched tensors: IQ as (n, 1, 2, len), concepts as
/// (n, 5), labels as class indices.
pub fn tensors_from_split<T: Real>(split: &DatasetSplit) -> TrainData<T> {
    let n = split.examples.len();
    let len = split.manifest.n_samples as usize;
    let mut x = Vec::with_capacity(n * 2 * len);
    let mut c = Vec::with_capacity(n * 5);
    let mut labels = Vec::with_capacity(n);
    for e in &split.examples {
        x.extend(e.iq.iter().map(|&v| cast::<T>(v as f64)));
        c.extend(e.concepts.iter().map(|&v| cast::<T>(v as f64)));
        labels.push(e.label_id as usize);
    }
    TrainData {
        x: Tensor::from_vec(&[n, 1, 2, len], x),
        concepts: Some(Tensor::from_vec(&[n, 5], c)),
        labels: Some(labels),
    }
}

/// Concept-vector rows for classifier training on pristine targets.
fn concepts_as_inputs<T: Real>(data: &TrainData<T>) -> Result<TrainData<T>, TrainError> {
    let c = data
        .concepts
        .as_ref()
        .ok_or(TrainError::Net(NetError::MissingTargets("concepts")))?;
    Ok(TrainData {
        x: c.clone(),
        concepts: None,
        labels: data.labels.clone(),
    })
}

fn check_splits(train: &DatasetSplit, val: &DatasetSplit) -> Result<(), TrainError> {
    if train.class_list != val.class_list {
        return Err(TrainError::DataMismatch(format!(
            "train classes {:?} != val classes {:?}",
            train.class_list, val.class_list
        )));
    }
    if train.examples.is_empty() || val.examples.is_empty() {
        return Err(TrainError::Net(NetError::EmptyDataset));
    }
    Ok(())
}

/// Seeds for every stochastic stage, derived from the config master seed.
/// The regressor pair is shared by the independent and sequential regimes,
/// which is what makes their regressors bit-identical.
fn seed_plan(cfg: &TrainingConfig) -> SeedPlan {
    SeedPlan {
        regressor_init: derive_seed(cfg.seed, &[1, 0]),
        regressor_fit: derive_seed(cfg.seed, &[1, 1]),
        classifier_init: derive_seed(cfg.seed, &[2, 0]),
        classifier_fit: derive_seed(cfg.seed, &[2, 1]),
    }
}

fn fit_regressor<T: Real>(
    train: &TrainData<T>,
    val: &TrainData<T>,
    cfg: &TrainingConfig,
    seeds: &SeedPlan,
) -> Result<(Network<T>, FitReport), TrainError> {
    let spec = regressor_spec(cfg.profile.conv_kernels(), cfg.profile.dense_width());
    let mut net = Network::init(spec, seeds.regressor_init)?;
    let fit_cfg = FitConfig {
        epochs: cfg.epochs_regressor,
        batch_size: cfg.batch_size,
        lr: cfg.lr,
    };
    let mut rng = Prng::seed_from_u64(seeds.regressor_fit);
    let report = fit(&mut net, LossKind::Mse, train, val, &fit_cfg, &mut rng)?;
    Ok((net, report))
}

fn fit_classifier<T: Real>(
    train: &TrainData<T>,
    val: &TrainData<T>,
    n_classes: usize,
    cfg: &TrainingConfig,
    seeds: &SeedPlan,
) -> Result<(Network<T>, FitReport), TrainError> {
    let mut net = Network::init(classifier_spec(n_classes), seeds.classifier_init)?;
    let fit_cfg = FitConfig {
        epochs: cfg.epochs_classifier,
        batch_size: cfg.batch_size,
        lr: cfg.lr,
    };
    let mut rng = Prng::seed_from_u64(seeds.classifier_fit);
    let report = fit(
        &mut net,
        LossKind::CrossEntropy,
        train,
        val,
        &fit_cfg,
        &mut rng,
    )?;
    Ok((net, report))
}

/// Regime 1: regressor on (x -> c) and classifier on pristine (c -> y),
/// trained separately.
pub fn train_independent<T: Real>(
    train: &DatasetSplit,
    val: &DatasetSplit,
    cfg: &TrainingConfig,
) -> Result<ModelBundle<T>, TrainError> {
    cfg.validate().map_err(TrainError::InvalidConfig)?;
    check_splits(train, val)?;
    let seeds = seed_plan(cfg);
    let train_t = tensors_from_split::<T>(train);
    let val_t = tensors_from_split::<T>(val);

    let (regressor, reg_report) = fit_regressor(&train_t, &val_t, cfg, &seeds)?;
    let clf_train = concepts_as_inputs(&train_t)?;
    let clf_val = concepts_as_inputs(&val_t)?;
    let (classifier, clf_report) =
        fit_classifier(&clf_train, &clf_val, train.class_list.len(), cfg, &seeds)?;

    bundle::assemble(
        Regime::Independent,
        Some(regressor),
        classifier,
        train.class_list.clone(),
        cfg,
        seeds,
        Some(reg_report),
        Some(clf_report),
        "pristine",
    )
}

/// Frozen best-checkpoint regressor outputs over a dataset, in eval mode.
pub fn predict_concepts<T: Real>(
    regressor: &Network<T>,
    data: &TrainData<T>,
    batch_size: usize,
) -> Result<Tensor<T>, NetError> {
    let n = data.len();
    let mut out = Vec::with_capacity(n * 5);
    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(batch_size) {
        let batch = data.x.gather_rows(chunk);
        let pred = regressor.forward_eval(&batch)?;
        out.extend_from_slice(pred.data());
    }
    Ok(Tensor::from_vec(&[n, 5], out))
}

/// Regime 2: regressor first (identical seeds/data to the independent
/// regime), then the classifier on the frozen regressor's predictions.
pub fn train_sequential<T: Real>(
    train: &DatasetSplit,
    val: &DatasetSplit,
    cfg: &TrainingConfig,
) -> Result<ModelBundle<T>, TrainError> {
    cfg.validate().map_err(TrainError::InvalidConfig)?;
    check_splits(train, val)?;
    let seeds = seed_plan(cfg);
    let train_t = tensors_from_split::<T>(train);
    let val_t = tensors_from_split::<T>(val);

    let (regressor, reg_report) = fit_regressor(&train_t, &val_t, cfg, &seeds)?;
    let clf_train = TrainData {
        x: predict_concepts(&regressor, &train_t, cfg.batch_size)?,
        concepts: None,
        labels: train_t.labels.clone(),
    };
    let clf_val = TrainData {
        x: predict_concepts(&regressor, &val_t, cfg.batch_size)?,
        concepts: None,
        labels: val_t.labels.clone(),
    };
    let (classifier, clf_report) =
        fit_classifier(&clf_train, &clf_val, train.class_list.len(), cfg, &seeds)?;

    bundle::assemble(
        Regime::Sequential,
        Some(regressor),
        classifier,
        train.class_list.clone(),
        cfg,
        seeds,
        Some(reg_report),
        Some(clf_report),
        "predicted",
    )
}

/// Joint loss on one batch in eval mode: (total, cross-entropy, mse). The
/// total is w * CE + (1 - w) * MSE over the 5 heads, i.e. a per-head weight
/// of (1 - w) / 5.
pub fn joint_loss_terms<T: Real>(
    regressor: &Network<T>,
    classifier: &Network<T>,
    data: &TrainData<T>,
    w_classifier: f64,
) -> Result<(f64, f64, f64), NetError> {
    let concepts = data
        .concepts
        .as_ref()
        .ok_or(NetError::MissingTargets("concepts"))?;
    let labels = data
        .labels
        .as_ref()
        .ok_or(NetError::MissingTargets("labels"))?;
    let c_hat = regressor.forward_eval(&data.x)?;
    let logits = classifier.forward_eval(&c_hat)?;
    let (ce, _) = cross_entropy_loss(&logits, labels)?;
    let (mse, _) = mse_loss(&c_hat, concepts)?;
    Ok((
        w_classifier * ce + (1.0 - w_classifier) * mse,
        ce,
        mse,
    ))
}

fn joint_val_loss<T: Real>(
    regressor: &Network<T>,
    classifier: &Network<T>,
    data: &TrainData<T>,
    w: f64,
    batch_size: usize,
) -> Result<f64, NetError> {
    let n = data.len();
    let indices: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for chunk in indices.chunks(batch_size) {
        let batch = data.gather(chunk);
        let (l, _, _) = joint_loss_terms(regressor, classifier, &batch, w)?;
        total += l * chunk.len() as f64;
    }
    Ok(total / n as f64)
}

/// Regime 3: one optimizer pass over both networks under the weighted sum
/// of the classification and concept losses; gradients from the classifier
/// flow through the regressor. Checkpoints on lowest total validation loss.
pub fn train_joint<T: Real>(
    train: &DatasetSplit,
    val: &DatasetSplit,
    cfg: &TrainingConfig,
) -> Result<ModelBundle<T>, TrainError> {
    cfg.validate().map_err(TrainError::InvalidConfig)?;
    check_splits(train, val)?;
    let seeds = seed_plan(cfg);
    let train_t = tensors_from_split::<T>(train);
    let val_t = tensors_from_split::<T>(val);
    let w = cfg.joint_classifier_weight;
    let k = train.class_list.len();

    let mut regressor: Network<T> = Network::init(
        regressor_spec(cfg.profile.conv_kernels(), cfg.profile.dense_width()),
        seeds.regressor_init,
    )?;
    let mut classifier: Network<T> = Network::init(classifier_spec(k), seeds.classifier_init)?;
    let mut opt_reg = Adam::new(cfg.lr, &regressor.params);
    let mut opt_clf = Adam::new(cfg.lr, &classifier.params);
    let mut rng = Prng::seed_from_u64(seeds.regressor_fit);

    let w_t: T = cast(w);
    let mse_w: T = cast(1.0 - w);
    let mut history = Vec::with_capacity(cfg.epochs_regressor);
    let mut best: Option<(f64, usize, Vec<Tensor<T>>, Vec<Tensor<T>>)> = None;
    let mut indices: Vec<usize> = (0..train_t.len()).collect();

    for epoch in 0..cfg.epochs_regressor {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in indices.chunks(cfg.batch_size) {
            let batch = train_t.gather(chunk);
            let concepts = batch.concepts.as_ref().unwrap();
            let labels = batch.labels.as_ref().unwrap();

            let (c_hat, reg_cache) = regressor.forward_train(&batch.x, &mut rng)?;
            let (logits, clf_cache) = classifier.forward_train(&c_hat, &mut rng)?;
            let (ce, mut g_logits) = cross_entropy_loss(&logits, labels)?;
            let (mse, g_mse) = mse_loss(&c_hat, concepts)?;
            let total = w * ce + (1.0 - w) * mse;
            if !total.is_finite() {
                return Err(TrainError::Net(NetError::Divergence { epoch }));
            }
            epoch_loss += total * chunk.len() as f64;

            for v in g_logits.data_mut() {
                *v = *v * w_t;
            }
            let (clf_grads, g_into_chat) = classifier.backward(&clf_cache, &g_logits);
            let mut g_chat = g_into_chat;
            for (g, &m) in g_chat.data_mut().iter_mut().zip(g_mse.data()) {
                *g = *g + mse_w * m;
            }
            let (reg_grads, _) = regressor.backward(&reg_cache, &g_chat);

            opt_reg.step(&mut regressor.params, &reg_grads)?;
            opt_clf.step(&mut classifier.params, &clf_grads)?;
        }
        let train_loss = epoch_loss / train_t.len() as f64;
        let val_loss = joint_val_loss(&regressor, &classifier, &val_t, w, cfg.batch_size)?;
        if !val_loss.is_finite() {
            return Err(TrainError::Net(NetError::Divergence { epoch }));
        }
        history.push(crate::neuralcore::EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        let improved = best.as_ref().map_or(true, |(b, _, _, _)| val_loss < *b);
        if improved {
            best = Some((
                val_loss,
                epoch,
                regressor.params.clone(),
                classifier.params.clone(),
            ));
        }
    }

    let (best_val_loss, best_epoch, reg_params, clf_params) = best.unwrap();
    regressor.params = reg_params;
    classifier.params = clf_params;
    let report = FitReport {
        history,
        best_epoch,
        best_val_loss,
    };

    bundle::assemble(
        Regime::Joint,
        Some(regressor),
        classifier,
        train.class_list.clone(),
        cfg,
        seeds,
        Some(report),
        None,
        "joint",
    )
}

/// Regime 4: the baseline network on (x -> y) with no concept supervision;
/// trained for the regressor epoch budget.
pub fn train_baseline<T: Real>(
    train: &DatasetSplit,
    val: &DatasetSplit,
    cfg: &TrainingConfig,
) -> Result<ModelBundle<T>, TrainError> {
    cfg.validate().map_err(TrainError::InvalidConfig)?;
    check_splits(train, val)?;
    let seeds = seed_plan(cfg);
    let train_t = tensors_from_split::<T>(train);
    let val_t = tensors_from_split::<T>(val);

    let spec = baseline_spec(
        cfg.profile.conv_kernels(),
        cfg.profile.dense_width(),
        train.class_list.len(),
    );
    let mut net = Network::init(spec, seeds.classifier_init)?;
    let fit_cfg = FitConfig {
        epochs: cfg.epochs_regressor,
        batch_size: cfg.batch_size,
        lr: cfg.lr,
    };
    let mut rng = Prng::seed_from_u64(seeds.classifier_fit);
    let report = fit(
        &mut net,
        LossKind::CrossEntropy,
        &train_t,
        &val_t,
        &fit_cfg,
        &mut rng,
    )?;

    bundle::assemble(
        Regime::Baseline,
        None,
        net,
        train.class_list.clone(),
        cfg,
        seeds,
        None,
        Some(report),
        "raw-iq",
    )
}

pub fn train_regime<T: Real>(
    regime: Regime,
    train: &DatasetSplit,
    val: &DatasetSplit,
    cfg: &TrainingConfig,
) -> Result<ModelBundle<T>, TrainError> {
    match regime {
        Regime::Independent => train_independent(train, val, cfg),
        Regime::Sequential => train_sequential(train, val, cfg),
        Regime::Joint => train_joint(train, val, cfg),
        Regime::Baseline => train_baseline(train, val, cfg),
    }
}

/// Class distribution (softmax) and, for CB bundles, the predicted concept
/// explanation, for one 2 x n IQ example. Eval mode, deterministic.
pub fn predict<T: Real>(
    bundle: &ModelBundle<T>,
    iq: &[T],
) -> Result<(Vec<T>, Option<ConceptVector<T>>), NetError> {
    let n = iq.len() / 2;
    let x = Tensor::from_vec(&[1, 1, 2, n], iq.to_vec());
    let (dist, concepts) = predict_batch(bundle, &x)?;
    let c = concepts.map(|t| {
        let d = t.data();
        ConceptVector::from_array([d[0], d[1], d[2], d[3], d[4]])
    });
    Ok((dist.data().to_vec(), c))
}

/// Batched prediction: softmax distributions (n, k) plus concepts (n, 5)
/// for CB bundles.
pub fn predict_batch<T: Real>(
    bundle: &ModelBundle<T>,
    x: &Tensor<T>,
) -> Result<(Tensor<T>, Option<Tensor<T>>), NetError> {
    let (logits, concepts) = match &bundle.regressor {
        Some(reg) => {
            let c_hat = reg.forward_eval(x)?;
            let logits = bundle.classifier.forward_eval(&c_hat)?;
            (logits, Some(c_hat))
        }
        None => (bundle.classifier.forward_eval(x)?, None),
    };
    let k = logits.shape()[1];
    let mut dist = logits;
    for row in dist.data_mut().chunks_mut(k) {
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    Ok((dist, concepts))
}

#[cfg(test)]
mod tests;
