//! Occlusion-aware driving simulation core.

pub mod error;
pub mod geom2d;
pub mod smp;
pub mod world;
pub mod scenario;
pub mod safety;
pub mod env;
pub mod obs;
pub mod baselines;
