//! Shortest-path planning over a replay buffer with learned distances.
//!
//! A distributional goal-conditioned value function predicts step distances
//! between states; an ensemble of them weights a graph over buffered states,
//! and a controller follows waypoints on the shortest path to a distant goal.

pub mod distval;
pub mod ensemble;
mod error;
pub mod gridworld;
pub mod harness;
pub mod roadmap;
mod scalar;
pub mod search;

pub use distval::{TrainConfig, ValueDistribution, ValueEstimator};
pub use ensemble::{Aggregation, EnsembleConfig, ValueEnsemble};
pub use error::{Error, Result};
pub use gridworld::{Action, EpisodeConfig, GridMap, State};
pub use roadmap::{PlannedPath, Roadmap, SearchBuffer};
pub use scalar::Scalar;
pub use search::{rollout, Controller, Decision, SearchPolicy};

pub type EstimatorF32 = ValueEstimator<f32>;
pub type EstimatorF64 = ValueEstimator<f64>;
pub type EnsembleF32 = ValueEnsemble<f32>;
pub type EnsembleF64 = ValueEnsemble<f64>;
pub type RoadmapF32 = Roadmap<f32>;
pub type RoadmapF64 = Roadmap<f64>;
pub type DistributionF32 = ValueDistribution<f32>;
pub type DistributionF64 = ValueDistribution<f64>;

/// Derives an independent stream seed from `(seed, stream)` with the
/// splitmix64 finalizer.
pub fn seed_mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
