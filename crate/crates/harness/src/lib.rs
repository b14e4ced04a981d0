//! Closed-loop evaluation, ablation presets, exports and the `occsim` CLI.

pub mod ablation;
pub mod cli;
pub mod eval;
pub mod export;
pub mod policy;
pub mod replay;

pub use ablation::{ablation_preset, Ablation};
pub use eval::{evaluate, latency, summarize, EpisodeRecord, LatencySummary, MetricsSummary};
pub use policy::{load_driver, Driver, PolicyKind};
