use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::eval::{worker_pool, EvalContext};
use super::records::{write_csv, Method};
use super::train::{save_outcome, train};
use crate::ensemble::ValueEnsemble;
use crate::error::Result;
use crate::roadmap::{Roadmap, SearchBuffer};
use crate::{seed_mix, Scalar};

const WALK_STREAM: u64 = 0x3a1c;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizeRecord {
    pub maze_seed: u64,
    pub method: Method,
    pub seed: u64,
    pub distance: u32,
    pub success_rate: f64,
    pub mean_steps: Option<f64>,
    /// Distinct states among the random-walk observations.
    pub buffer_nodes: usize,
}

/// Trains one ensemble across all training mazes, drawing a maze per episode.
pub fn train_multi<T: Scalar>(cfg: &RunConfig, seed: u64) -> Result<ValueEnsemble<T>> {
    cfg.generalize.validate_for(&cfg.train)?;
    let maps = cfg.generalize.train_maps()?;
    Ok(train::<T>(cfg, &maps, seed, None)?.ensemble)
}

/// On every held-out maze: a fresh search buffer from random-walk
/// observations, a roadmap under the frozen ensemble, and SoRB versus
/// greedy-only rollouts.
pub fn evaluate_held_out<T: Scalar>(cfg: &RunConfig, ens: &ValueEnsemble<T>, seed: u64) -> Result<Vec<GeneralizeRecord>> {
    cfg.generalize.validate()?;
    let mut out = Vec::new();
    for (&maze_seed, map) in cfg.generalize.held_out_seeds.iter().zip(cfg.generalize.held_out_maps()?) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(seed_mix(seed, WALK_STREAM), maze_seed));
        let buffer = SearchBuffer::random_walk(&map, &cfg.episode, cfg.generalize.random_observations, &mut rng);
        let nodes = buffer.len();
        let roadmap = Roadmap::build(buffer, ens, &map, T::of(cfg.maxdist));
        let ctx = EvalContext {
            map: &map,
            episode: &cfg.episode,
            ensemble: ens,
            roadmap: &roadmap,
            horizon: cfg.horizon,
            replan_every_step: cfg.replan_every_step,
        };
        let recs = ctx.evaluate(seed_mix(seed, maze_seed), &cfg.eval_distances, cfg.trials_per_distance, &[Method::Sorb, Method::GreedyOnly]);
        out.extend(recs.into_iter().map(|r| GeneralizeRecord {
            maze_seed,
            method: r.method,
            seed,
            distance: r.distance,
            success_rate: r.success_rate,
            mean_steps: r.mean_steps,
            buffer_nodes: nodes,
        }));
    }
    Ok(out)
}

/// `cmd_generalize`: loads `seed_<seed>/ensemble.sore` from the checkpoint
/// directory, or trains across the training mazes when no checkpoint is
/// given; writes `output_dir/generalize.csv`.
pub fn cmd_generalize<T: Scalar>(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<Vec<GeneralizeRecord>> {
    cfg.generalize.validate_for(&cfg.train)?;
    let pool = worker_pool()?;
    let mut records = Vec::new();
    for &seed in &cfg.seeds {
        let ens = match checkpoint {
            Some(p) if p.is_dir() => ValueEnsemble::<T>::load(&p.join(format!("seed_{seed}")).join("ensemble.sore"), cfg.train.lr())?,
            Some(p) => ValueEnsemble::<T>::load(p, cfg.train.lr())?,
            None => {
                let maps = cfg.generalize.train_maps()?;
                let outcome = pool.install(|| train::<T>(cfg, &maps, seed, None))?;
                save_outcome(&outcome, &cfg.seed_dir(seed))?;
                outcome.ensemble
            }
        };
        records.extend(pool.install(|| evaluate_held_out(cfg, &ens, seed))?);
    }
    fs::create_dir_all(&cfg.output_dir)?;
    write_csv(&cfg.output_dir.join("generalize.csv"), &records)?;
    Ok(records)
}
