//! PPO over semantic motion primitives: rollouts, advantage estimation,
//! clipped policy updates, curriculum-driven training and predictor
//! pretraining.

pub mod agent;
pub mod config;
pub mod error;
pub mod gae;
pub mod ppo;
pub mod predictor_data;
pub mod rollout;
pub mod train;

pub use agent::{Decision, PolicyAgent};
pub use config::{PpoConfig, TrainConfig};
pub use error::RlError;
pub use gae::{compute_gae, normalize};
pub use ppo::{PpoLearner, UpdateStats};
pub use rollout::{EpisodeSummary, RolloutBatch, Transition, VecEnv};
pub use train::{train, IterationLog, TrainOutcome};
