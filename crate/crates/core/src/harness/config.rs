use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distval::TrainConfig;
use crate::ensemble::EnsembleConfig;
use crate::error::{Error, Result};
use crate::gridworld::{builtin_map, EpisodeConfig, GridMap};

/// Multi-map training and held-out evaluation on generated mazes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneralizeConfig {
    pub maze_size: usize,
    pub train_seeds: Vec<u64>,
    pub held_out_seeds: Vec<u64>,
    /// Random-walk observations collected per held-out maze before dedup.
    pub random_observations: usize,
}

impl Default for GeneralizeConfig {
    fn default() -> Self {
        Self {
            maze_size: 15,
            train_seeds: (0..20).collect(),
            held_out_seeds: (1000..1010).collect(),
            random_observations: 1000,
        }
    }
}

impl GeneralizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_seeds.is_empty() || self.held_out_seeds.is_empty() {
            return Err(Error::Config("generalize needs training and held-out maze seeds".into()));
        }
        if let Some(s) = self.held_out_seeds.iter().find(|s| self.train_seeds.contains(s)) {
            return Err(Error::HeldOutOverlap(*s));
        }
        Ok(())
    }

    /// [`GeneralizeConfig::validate`] plus a backend that can transfer across
    /// layouts: a table indexed by cell cannot.
    pub fn validate_for(&self, train: &TrainConfig) -> Result<()> {
        self.validate()?;
        if train.backend.is_tabular() {
            return Err(Error::Config("generalization needs the mlp backend (ideally with the local_view encoder)".into()));
        }
        Ok(())
    }

    pub fn train_maps(&self) -> Result<Vec<GridMap>> {
        self.train_seeds.iter().map(|&s| crate::gridworld::random_maze(s, self.maze_size)).collect()
    }

    pub fn held_out_maps(&self) -> Result<Vec<GridMap>> {
        self.held_out_seeds.iter().map(|&s| crate::gridworld::random_maze(s, self.maze_size)).collect()
    }
}

/// One sweep axis; `values` falls back to the axis defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub axis: Option<String>,
    pub values: Option<Vec<String>>,
}

/// Everything a train, eval, sweep, generalize or distcheck run needs. Every
/// field has a default, so `{}` is a valid config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Builtin map name; ignored when `map_file` is set.
    pub map: String,
    pub map_file: Option<PathBuf>,
    pub episode: EpisodeConfig,
    pub train: TrainConfig,
    pub ensemble: EnsembleConfig,
    pub maxdist: f64,
    pub buffer_size: usize,
    pub eval_distances: Vec<u32>,
    pub trials_per_distance: usize,
    /// Step budget of an evaluation rollout.
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Environment steps between intermediate checkpoints; 0 keeps only the final one.
    pub checkpoint_every: usize,
    /// Environment steps between greedy success probes; 0 disables probing.
    pub probe_every: usize,
    pub probe_trials: usize,
    pub replan_every_step: bool,
    pub sweep: SweepConfig,
    pub generalize: GeneralizeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            map: "four_rooms".into(),
            map_file: None,
            episode: EpisodeConfig::default(),
            train: TrainConfig::default(),
            ensemble: EnsembleConfig::default(),
            maxdist: 3.0,
            buffer_size: 1000,
            eval_distances: vec![2, 5, 10, 15, 20, 25, 30],
            trials_per_distance: 30,
            horizon: 100,
            seeds: vec![0, 1, 2],
            output_dir: PathBuf::from("runs/default"),
            checkpoint_every: 0,
            probe_every: 10_000,
            probe_trials: 20,
            replan_every_step: true,
            sweep: SweepConfig::default(),
            generalize: GeneralizeConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("RunConfig serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.episode.validate()?;
        self.train.validate()?;
        self.ensemble.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if !(self.maxdist > 0.0) {
            return Err(Error::Config("maxdist must be positive".into()));
        }
        if self.horizon == 0 || self.trials_per_distance == 0 {
            return Err(Error::Config("horizon and trials_per_distance must be positive".into()));
        }
        if self.map_file.is_none() {
            self.map.parse::<crate::gridworld::MapName>()?;
        }
        Ok(())
    }

    pub fn load_map(&self) -> Result<GridMap> {
        match &self.map_file {
            Some(p) => GridMap::load(p),
            None => builtin_map(&self.map),
        }
    }

    /// Directory holding the artifacts of one training seed.
    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.output_dir.join(format!("seed_{seed}"))
    }
}
