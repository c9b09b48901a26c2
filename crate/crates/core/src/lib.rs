//! Stroke-level sketch modelling.
//!
//! The crate bundles four pieces that together form a stroke segmentation
//! pipeline for vector sketches:
//!
//! * [`sketch`]: parsing, normalization, simplification and batching of pen
//!   strokes in the 5-D offset representation.
//! * [`mdn`], [`nn`] and [`vae`]: a bidirectional-LSTM encoder and an
//!   autoregressive LSTM decoder with a bivariate Gaussian mixture output,
//!   trained per stroke as a variational autoencoder.
//! * [`idm`]: the image deformation model appearance feature and its spatial
//!   and context extensions, used as segmentation baselines.
//! * [`seg`]: an MLP stroke classifier over fixed features, with weighted
//!   cross-entropy training and k-fold evaluation.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod error;
pub mod idm;
pub mod mdn;
pub mod nn;
pub mod scalar;
pub mod seg;
pub mod sketch;
pub mod synth;
pub mod vae;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type VaeModel64 = vae::VaeModel<f64>;
pub type VaeModel32 = vae::VaeModel<f32>;
pub type SegModel64 = seg::SegModel<f64>;
pub type SegModel32 = seg::SegModel<f32>;
pub type MixtureParams64 = mdn::MixtureParams<f64>;
pub type RawMixture64 = mdn::RawMixture<f64>;
pub type LstmParams64 = nn::LstmParams<f64>;
pub type Tensor64 = nn::Tensor<f64>;
