//! Synthetic modulated-RF datasets, concept-bottleneck models for modulation
//! classification from raw IQ samples, and the evaluation surfaces that go
//! with them.
//!
//! All numeric code is generic over the scalar type via [`scalar::Real`]
//! (f32 for training throughput, f64 for finite-difference verification);
//! concrete aliases for the common instantiations live at the crate root.

pub mod cbmodel;
pub mod concepts;
pub mod datagen;
pub mod evalkit;
pub mod neuralcore;
pub mod scalar;
pub mod seed;
pub mod sigsynth;

pub use scalar::Real;
pub use seed::Prng;

/// f32 instantiations: the training profile.
pub type IqCapture32 = sigsynth::IqCapture<f32>;
pub type ConceptVector32 = concepts::ConceptVector<f32>;
pub type Tensor32 = neuralcore::Tensor<f32>;
pub type Network32 = neuralcore::Network<f32>;
pub type ModelBundle32 = cbmodel::ModelBundle<f32>;

/// f64 instantiations: the gradient-check / verification profile.
pub type IqCapture64 = sigsynth::IqCapture<f64>;
pub type ConceptVector64 = concepts::ConceptVector<f64>;
pub type Tensor64 = neuralcore::Tensor<f64>;
pub type Network64 = neuralcore::Network<f64>;
