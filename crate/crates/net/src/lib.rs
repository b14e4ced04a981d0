//! Dense-tensor polyline encoder with actor, critic and predictor heads.
//! Every forward pass has a matching hand-written backward pass.

pub mod adam;
pub mod checkpoint;
pub mod encoder;
pub mod error;
pub mod layers;
pub mod loss;
pub mod params;
pub mod policy;
pub mod predictor;
pub mod tensor;

pub use adam::{clip_global_norm, Adam, AdamConfig};
pub use checkpoint::Checkpoint;
pub use encoder::{EncoderCache, EncoderInput, EncoderParams, NODE_INPUT};
pub use error::NetError;
pub use layers::Linear;
pub use params::Params;
pub use policy::{PolicyCache, PolicyParams};
pub use predictor::{LearnedPredictor, PredictorParams, OFFSET_SCALE, PREDICTION_HORIZON};
pub use tensor::Tensor2;

/// Default hidden width.
pub const HIDDEN: usize = 64;
