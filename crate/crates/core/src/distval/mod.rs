//! Distributional goal-conditioned Q-learning of shortest-path distances.

mod checkpoint;
mod config;
mod distribution;
mod encoding;
mod estimator;
pub mod mlp;
mod replay;
mod tabular;

pub(crate) use checkpoint::{Reader, Writer};
pub use checkpoint::{MAGIC, VERSION};
pub use config::{BackendSpec, TrainConfig};
pub use distribution::{
    check_simplex, distributional_target, expected_distance, kl_loss, shift_into, softmax_in_place,
    ValueDistribution, LOG_CLAMP,
};
pub use encoding::Encoder;
pub use estimator::{argmin_action, argmin_action_random_ties, epsilon_greedy, Backend, Scratch, ValueEstimator, ValueHead};
pub use replay::{relabel, relabel_with_kinds, RelabelKind, ReplayBuffer, Sample};
pub use tabular::{Table, Tabular};
