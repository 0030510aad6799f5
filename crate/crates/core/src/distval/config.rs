use serde::{Deserialize, Serialize};

use super::Encoder;
use crate::error::{Error, Result};

/// Function approximator behind a value estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Tabular,
    Mlp {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default)]
        encoder: Encoder,
    },
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Tabular
    }
}

impl BackendSpec {
    pub fn is_tabular(&self) -> bool {
        matches!(self, BackendSpec::Tabular)
    }
}

/// Learner hyperparameters. `None` fields fall back to per-backend defaults:
/// learning rate 1e-4 (MLP) or 0.1 mixing rate (tabular); target updates every
/// 5 steps at rate 0.05 (MLP) or tracking the online table exactly (tabular).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub num_bins: usize,
    pub learning_rate: Option<f64>,
    pub batch_size: usize,
    pub epsilon: f64,
    pub target_update_period: Option<usize>,
    pub target_update_rate: Option<f64>,
    pub discount: f64,
    /// Probabilities of keeping the original goal, using the current state,
    /// and using a future state.
    pub relabel_probs: [f64; 3],
    /// Relabel each transition when it is drawn for a batch instead of once
    /// when its episode is stored.
    pub relabel_on_sample: bool,
    pub total_env_steps: usize,
    pub random_warmup_steps: usize,
    pub replay_capacity: usize,
    pub backend: BackendSpec,
    /// `false` swaps the distributional head for scalar squared-loss regression.
    pub distributional: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_bins: 20,
            learning_rate: None,
            batch_size: 64,
            epsilon: 0.1,
            target_update_period: None,
            target_update_rate: None,
            discount: 1.0,
            relabel_probs: [1.0 / 3.0; 3],
            relabel_on_sample: true,
            total_env_steps: 100_000,
            random_warmup_steps: 1000,
            replay_capacity: 100_000,
            backend: BackendSpec::Tabular,
            distributional: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bins < 1 {
            return Err(Error::Config("num_bins must be >= 1".into()));
        }
        if self.discount != 1.0 {
            return Err(Error::Config("distance learning is undiscounted; discount must be 1".into()));
        }
        let sum: f64 = self.relabel_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.relabel_probs.iter().any(|p| *p < 0.0) {
            return Err(Error::Config(format!("relabel_probs must be a distribution, sums to {sum}")));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config("epsilon must lie in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.replay_capacity == 0 {
            return Err(Error::Config("batch_size and replay_capacity must be positive".into()));
        }
        let tau = self.tau();
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Config("target_update_rate must lie in (0, 1]".into()));
        }
        if self.period() == 0 {
            return Err(Error::Config("target_update_period must be >= 1".into()));
        }
        if let BackendSpec::Mlp { hidden, .. } = &self.backend {
            if hidden.iter().any(|h| *h == 0) {
                return Err(Error::Config("hidden layer sizes must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn lr(&self) -> f64 {
        self.learning_rate.unwrap_or(if self.backend.is_tabular() { 0.1 } else { 1e-4 })
    }

    pub fn period(&self) -> usize {
        self.target_update_period.unwrap_or(if self.backend.is_tabular() { 1 } else { 5 })
    }

    pub fn tau(&self) -> f64 {
        self.target_update_rate.unwrap_or(if self.backend.is_tabular() { 1.0 } else { 0.05 })
    }

    /// Whether the target parameters are an exact alias of the online ones.
    pub fn target_tracks_online(&self) -> bool {
        self.period() == 1 && self.tau() == 1.0
    }
}
