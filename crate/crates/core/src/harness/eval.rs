use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::RunConfig;
use super::records::{success_svg, write_csv, EvalRecord, Method};
use super::train::read_states_csv;
use crate::ensemble::ValueEnsemble;
use crate::error::{Error, Result};
use crate::gridworld::oracle::bfs_bounded;
use crate::gridworld::{EpisodeConfig, GridMap, State};
use crate::roadmap::{BufferSource, Roadmap, SearchBuffer};
use crate::search::{rollout, Controller, GreedyController, RandomController, SearchPolicy};
use crate::{seed_mix, Scalar};

const PAIR_STREAM: u64 = 0x9a125;
const ROLLOUT_STREAM: u64 = 0x2011;

/// Start draws that may find no goal at the requested distance before a
/// bucket is abandoned.
pub const MAX_FAILED_STARTS: usize = 5000;

/// `n` (start, goal) pairs at exactly `distance` oracle steps: starts are
/// uniform over free cells, goals uniform over the cells at that distance.
/// `None` after [`MAX_FAILED_STARTS`] starts without a candidate.
pub fn sample_pairs(map: &GridMap, distance: u32, n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<(State, State)>> {
    let free = map.free_cells();
    let mut pairs = Vec::with_capacity(n);
    let mut failures = 0;
    while pairs.len() < n {
        let s = *free.choose(rng)?;
        let dist = bfs_bounded(map, s, distance);
        let ring: Vec<State> = free.iter().copied().filter(|g| dist[map.index(*g)] == Some(distance)).collect();
        match ring.choose(rng) {
            Some(&g) => pairs.push((s, g)),
            None => {
                failures += 1;
                if failures >= MAX_FAILED_STARTS {
                    return None;
                }
            }
        }
    }
    Some(pairs)
}

/// Thread pool sized by `SORB_THREADS` when set, else rayon's default.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SORB_THREADS") {
        let n: usize = v.parse().map_err(|_| Error::Config(format!("SORB_THREADS must be a positive integer, got `{v}`")))?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

/// What a method needs beyond the map.
pub struct EvalContext<'a, T> {
    pub map: &'a GridMap,
    pub episode: &'a EpisodeConfig,
    pub ensemble: &'a ValueEnsemble<T>,
    pub roadmap: &'a Roadmap<T>,
    pub horizon: usize,
    pub replan_every_step: bool,
}

impl<T: Scalar> EvalContext<'_, T> {
    /// Success and step count of one rollout per pair; the rollout RNG
    /// depends only on `(rollout_seed, pair index)`.
    pub fn run(&self, method: Method, pairs: &[(State, State)], rollout_seed: u64) -> Vec<(bool, usize)> {
        pairs
            .par_iter()
            .enumerate()
            .map(|(i, &(s, g))| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(rollout_seed, i as u64));
                let mut controller: Box<dyn Controller<T> + '_> = match method {
                    Method::Sorb => {
                        let sp = SearchPolicy::new(self.roadmap, self.ensemble);
                        Box::new(if self.replan_every_step { sp } else { sp.sticky() })
                    }
                    Method::GreedyOnly => Box::new(GreedyController::new(self.ensemble)),
                    Method::Random => Box::new(RandomController),
                };
                let r = rollout(controller.as_mut(), self.map, self.episode, s, g, self.horizon, &mut rng);
                (r.success, r.steps)
            })
            .collect()
    }

    /// One record per `(method, distance)`. Pairs and rollout noise are
    /// shared across methods. Buckets without pairs are skipped.
    pub fn evaluate(&self, seed: u64, distances: &[u32], trials: usize, methods: &[Method]) -> Vec<EvalRecord> {
        let mut out = Vec::new();
        for &d in distances {
            let mut prng = ChaCha8Rng::seed_from_u64(seed_mix(seed_mix(seed, PAIR_STREAM), d as u64));
            let Some(pairs) = sample_pairs(self.map, d, trials, &mut prng) else {
                log::warn!("no pairs at distance {d} on {}; bucket skipped", self.map.name());
                continue;
            };
            let rollout_seed = seed_mix(seed_mix(seed, ROLLOUT_STREAM), d as u64);
            for &m in methods {
                out.push(summarize(m, seed, d, &self.run(m, &pairs, rollout_seed)));
            }
        }
        out
    }
}

pub fn summarize(method: Method, seed: u64, distance: u32, results: &[(bool, usize)]) -> EvalRecord {
    let wins: Vec<usize> = results.iter().filter(|r| r.0).map(|r| r.1).collect();
    EvalRecord {
        method,
        seed,
        distance,
        success_rate: wins.len() as f64 / results.len().max(1) as f64,
        mean_steps: (!wins.is_empty()).then(|| wins.iter().sum::<usize>() as f64 / wins.len() as f64),
    }
}

/// Resolves the ensemble and buffer files of `seed`: a checkpoint directory
/// holds `seed_<seed>/`, a checkpoint file sits next to its `buffer.csv`,
/// and no checkpoint means the config's own output directory.
pub fn checkpoint_paths(cfg: &RunConfig, checkpoint: Option<&Path>, seed: u64) -> (PathBuf, PathBuf) {
    let dir = match checkpoint {
        None => cfg.seed_dir(seed),
        Some(p) if p.is_dir() => p.join(format!("seed_{seed}")),
        Some(p) => return (p.to_path_buf(), p.with_file_name("buffer.csv")),
    };
    (dir.join("ensemble.sore"), dir.join("buffer.csv"))
}

pub fn load_trained<T: Scalar>(cfg: &RunConfig, checkpoint: Option<&Path>, seed: u64, map: &GridMap) -> Result<(ValueEnsemble<T>, Vec<State>)> {
    let (ens_path, buf_path) = checkpoint_paths(cfg, checkpoint, seed);
    let ens = ValueEnsemble::<T>::load(&ens_path, cfg.train.lr())?;
    if let Some(m) = ens.members().first() {
        if m.map_name() != map.name() {
            return Err(Error::Config(format!("checkpoint was trained on `{}`, not `{}`", m.map_name(), map.name())));
        }
    }
    let states = read_states_csv(&buf_path)?;
    for s in &states {
        map.check_state(*s)?;
    }
    Ok((ens, states))
}

/// `cmd_eval`: SoRB, greedy-only and random rollouts for every seed and
/// distance; writes `eval.csv` and `eval.svg` into `output_dir`.
pub fn cmd_eval<T: Scalar>(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<Vec<EvalRecord>> {
    let map = cfg.load_map()?;
    let pool = worker_pool()?;
    let mut records = Vec::new();
    for &seed in &cfg.seeds {
        let (ens, states) = load_trained::<T>(cfg, checkpoint, seed, &map)?;
        let buffer = SearchBuffer::from_states(states.into_iter().take(cfg.buffer_size), BufferSource::TrainingSubsample);
        let roadmap = Roadmap::build(buffer, &ens, &map, T::of(cfg.maxdist));
        let ctx = EvalContext {
            map: &map,
            episode: &cfg.episode,
            ensemble: &ens,
            roadmap: &roadmap,
            horizon: cfg.horizon,
            replan_every_step: cfg.replan_every_step,
        };
        records.extend(pool.install(|| ctx.evaluate(seed, &cfg.eval_distances, cfg.trials_per_distance, &Method::ALL)));
    }
    fs::create_dir_all(&cfg.output_dir)?;
    write_csv(&cfg.output_dir.join("eval.csv"), &records)?;
    fs::write(cfg.output_dir.join("eval.svg"), success_svg(&records, &format!("success on {}", map.name())))?;
    Ok(records)
}
