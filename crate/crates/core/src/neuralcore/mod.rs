//! Deterministic minimal neural engine: tensors, the five layer types plus
//! softmax, MSE and cross-entropy losses, Adam, and a training loop with
//! best-validation checkpointing.

pub mod adam;
pub mod fit;
pub mod gradcheck;
mod layers;
pub mod loss;
mod network;
mod tensor;

pub use adam::Adam;
pub use fit::{best_epoch, eval_loss, fit, EpochStats, FitConfig, FitReport, LossKind, TrainData};
pub use layers::{LayerSpec, Padding};
pub use loss::{cross_entropy_loss, mse_loss};
pub use network::{load_network, save_network, ForwardCache, NetProvenance, Network, NetworkSpec};
pub use tensor::Tensor;

use std::fmt;

#[derive(Debug)]
pub enum NetError {
    ShapeMismatch(String),
    InvalidSpec(String),
    LabelOutOfRange { label: usize, classes: usize },
    MissingTargets(&'static str),
    EmptyDataset,
    Divergence { epoch: usize },
    Io(std::io::Error),
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::ShapeMismatch(m) => write!(f, "shape mismatch: {m}"),
            NetError::InvalidSpec(m) => write!(f, "invalid network spec: {m}"),
            NetError::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            NetError::MissingTargets(what) => write!(f, "dataset lacks {what}"),
            NetError::EmptyDataset => write!(f, "empty dataset"),
            NetError::Divergence { epoch } => {
                write!(f, "training diverged (non-finite loss) at epoch {epoch}")
            }
            NetError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for NetError {}

impl From<std::io::Error> for NetError {
    fn from(e: std::io::Error) -> Self {
        NetError::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::Prng;
    use rand::SeedableRng;

    fn t(shape: &[usize]) -> Tensor<f64> {
        Tensor::zeros(shape)
    }

    #[test]
    fn conv_shapes_chain_like_the_regressor_front_end() {
        let spec = NetworkSpec {
            input_shape: vec![1, 2, 128],
            layers: vec![
                LayerSpec::Conv2d {
                    out_channels: 96,
                    kernel: (1, 21),
                    padding: Padding::symmetric(0, 10),
                },
                LayerSpec::Conv2d {
                    out_channels: 96,
                    kernel: (2, 21),
                    padding: Padding::symmetric(0, 10),
                },
            ],
        };
        let shapes = spec.layer_shapes().unwrap();
        assert_eq!(shapes[0], vec![96, 2, 128]);
        assert_eq!(shapes[1], vec![96, 1, 128]);
    }

    #[test]
    fn dropout_in_eval_mode_is_identity() {
        let spec = NetworkSpec {
            input_shape: vec![10],
            layers: vec![LayerSpec::Dropout { rate: 0.5 }],
        };
        let net = Network::<f64>::init(spec, 1).unwrap();
        let x = Tensor::from_vec(&[3, 10], (0..30).map(|i| i as f64 * 0.1).collect());
        let out = net.forward_eval(&x).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn dropout_in_train_mode_zeroes_and_rescales() {
        let spec = NetworkSpec {
            input_shape: vec![1000],
            layers: vec![LayerSpec::Dropout { rate: 0.5 }],
        };
        let net = Network::<f64>::init(spec, 1).unwrap();
        let x = Tensor::from_vec(&[1, 1000], vec![1.0; 1000]);
        let mut rng = Prng::seed_from_u64(7);
        let (out, _) = net.forward_train(&x, &mut rng).unwrap();
        let zeros = out.data().iter().filter(|&&v| v == 0.0).count();
        let doubled = out.data().iter().filter(|&&v| (v - 2.0).abs() < 1e-12).count();
        assert_eq!(zeros + doubled, 1000);
        assert!((300..700).contains(&zeros), "{zeros} zeros");
    }

    #[test]
    fn eval_forward_consumes_no_rng_and_is_pure() {
        let spec = NetworkSpec {
            input_shape: vec![4],
            layers: vec![
                LayerSpec::Linear { out_features: 3 },
                LayerSpec::Dropout { rate: 0.5 },
                LayerSpec::Softmax,
            ],
        };
        let net = Network::<f64>::init(spec, 3).unwrap();
        let x = Tensor::from_vec(&[2, 4], vec![0.1, -0.3, 0.7, 0.2, 0.9, 0.0, -0.5, 0.4]);
        let a = net.forward_eval(&x).unwrap();
        let b = net.forward_eval(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn softmax_rows_are_probability_vectors() {
        let spec = NetworkSpec {
            input_shape: vec![6],
            layers: vec![LayerSpec::Softmax],
        };
        let net = Network::<f64>::init(spec, 2).unwrap();
        let x = Tensor::from_vec(
            &[2, 6],
            vec![5.0, -3.0, 800.0, 0.0, 1.0, 2.0, -900.0, 0.3, 0.3, 0.1, 0.0, -0.2],
        );
        let out = net.forward_eval(&x).unwrap();
        for row in out.data().chunks(6) {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let spec = NetworkSpec {
            input_shape: vec![4],
            layers: vec![LayerSpec::Linear { out_features: 3 }],
        };
        let net = Network::<f64>::init(spec, 1).unwrap();
        assert!(matches!(
            net.forward_eval(&t(&[2, 5])),
            Err(NetError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn checkpoint_round_trip_preserves_parameters() {
        let spec = NetworkSpec {
            input_shape: vec![5],
            layers: vec![
                LayerSpec::Linear { out_features: 8 },
                LayerSpec::ReLU,
                LayerSpec::Linear { out_features: 3 },
            ],
        };
        let net = Network::<f32>::init(spec, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("model");
        let prov = NetProvenance {
            init_seed: 42,
            fit_seed: 0,
            lr: 1e-4,
            epochs: 0,
            batch_size: 256,
            loss: "mse".into(),
            best_epoch: 0,
            best_val_loss: 0.0,
        };
        save_network(&net, &base, &prov).unwrap();
        let (back, prov2) = load_network::<f32>(&base).unwrap();
        assert_eq!(net.spec, back.spec);
        assert_eq!(net.params, back.params);
        assert_eq!(prov2.init_seed, 42);
    }
}
