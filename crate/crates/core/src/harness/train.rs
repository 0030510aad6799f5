use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::records::write_csv;
use crate::distval::{argmin_action_random_ties, epsilon_greedy, relabel, ReplayBuffer, Sample, Scratch};
use crate::ensemble::ValueEnsemble;
use crate::error::{Error, Result};
use crate::gridworld::{reset, step, Action, GridMap, State};
use crate::roadmap::{BufferSource, SearchBuffer};
use crate::search::{rollout, GreedyController};
use crate::{seed_mix, Scalar};

pub(crate) const ENV_STREAM: u64 = 0xe4e1;
const PROBE_STREAM: u64 = 0x9b0e;
const BUFFER_STREAM: u64 = 0xb0ff;

/// Search buffers are stored at least this large so smaller sizes can be
/// taken as prefixes.
pub const STORED_BUFFER_MIN: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub step: usize,
    /// Mean over ensemble members of the batch loss.
    pub loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub step: usize,
    pub success_rate: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub seed: u64,
    pub ensemble: ValueEnsemble<T>,
    pub buffer: ReplayBuffer,
    /// Distinct visited states of the first map, shuffled.
    pub search_states: Vec<State>,
    pub losses: Vec<LossRow>,
    pub probes: Vec<ProbeRow>,
}

impl<T: Scalar> TrainOutcome<T> {
    pub fn search_buffer(&self, size: usize) -> SearchBuffer {
        SearchBuffer::from_states(self.search_states.iter().copied().take(size), BufferSource::TrainingSubsample)
    }
}

/// Greedy success rate over `trials` episodes drawn like training episodes.
pub fn probe_success<T: Scalar>(cfg: &RunConfig, map: &GridMap, ens: &ValueEnsemble<T>, seed: u64, trials: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    for _ in 0..trials {
        let (s, g) = reset(map, &cfg.episode, &mut rng);
        let mut c = GreedyController::new(ens);
        ok += rollout(&mut c, map, &cfg.episode, s, g, cfg.episode.max_steps, &mut rng).success as usize;
    }
    ok as f64 / trials.max(1) as f64
}

/// Collects data with an epsilon-greedy ensemble policy (uniform actions
/// for the first `random_warmup_steps`, exact ties broken at random),
/// stores every finished episode, and runs one ensemble update per
/// environment step once warmup is over. Goals are relabeled per batch draw
/// or once per stored episode, following `relabel_on_sample`. With several maps, each episode draws one
/// uniformly. `out` receives intermediate checkpoints when enabled.
pub fn train<T: Scalar>(cfg: &RunConfig, maps: &[GridMap], seed: u64, out: Option<&Path>) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if maps.is_empty() || maps.len() > u16::MAX as usize {
        return Err(Error::Config("training needs between 1 and 65535 maps".into()));
    }
    let tc = &cfg.train;
    let ep = &cfg.episode;
    let mut ensemble = ValueEnsemble::<T>::new(&maps[0], &cfg.ensemble, tc, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(seed, ENV_STREAM));
    let mut buffer = ReplayBuffer::with_episode(tc.replay_capacity, ep.clone());
    let mut scratch = Scratch::default();
    let mut losses = Vec::new();
    let mut probes = Vec::new();
    let mut steps = 0;
    while steps < tc.total_env_steps {
        let map_id = if maps.len() > 1 { rng.gen_range(0..maps.len()) } else { 0 };
        let map = &maps[map_id];
        let (mut s, g) = reset(map, ep, &mut rng);
        let mut trajectory = Vec::with_capacity(ep.max_steps);
        for t in 0..ep.max_steps {
            if steps >= tc.total_env_steps {
                break;
            }
            let action = if steps < tc.random_warmup_steps {
                Action::random(&mut rng)
            } else {
                // exact ties only arise between untrained tabular rows
                let d = ensemble.mean_action_distances_with(&mut scratch, map, s, g);
                let greedy = argmin_action_random_ties(&d, &mut rng);
                epsilon_greedy(greedy, tc.epsilon, &mut rng)
            };
            let mut tr = step(map, s, action, g, ep, &mut rng);
            tr.timeout = !tr.done && t + 1 == ep.max_steps;
            trajectory.push(tr);
            s = tr.next_state;
            steps += 1;
            if steps > tc.random_warmup_steps && buffer.len() >= tc.batch_size {
                let member_losses = ensemble.train_all(&buffer, maps, tc)?;
                let mean = member_losses.iter().map(|l| l.to_f64_lossless()).sum::<f64>() / member_losses.len() as f64;
                losses.push(LossRow { step: steps, loss: mean });
            }
            if cfg.probe_every > 0 && steps % cfg.probe_every == 0 {
                let rate = probe_success(cfg, &maps[0], &ensemble, seed_mix(seed, PROBE_STREAM ^ steps as u64), cfg.probe_trials);
                probes.push(ProbeRow { step: steps, success_rate: rate });
            }
            if let Some(dir) = out {
                if cfg.checkpoint_every > 0 && steps % cfg.checkpoint_every == 0 {
                    ensemble.save(&dir.join(format!("ensemble_{steps}.sore")))?;
                }
            }
            if tr.done {
                break;
            }
        }
        if tc.relabel_on_sample {
            buffer.push_episode(map_id as u16, map, &trajectory);
        } else if !trajectory.is_empty() {
            let relabeled = relabel(map, ep, &trajectory, tc.relabel_probs, &mut rng)?;
            buffer.extend(relabeled.into_iter().map(|tr| Sample::new(map_id as u16, map, ep, tr)));
        }
    }
    let mut brng = ChaCha8Rng::seed_from_u64(seed_mix(seed, BUFFER_STREAM));
    let visited = buffer.samples().iter().filter(|s| s.map == 0).map(|s| s.transition.state);
    let size = cfg.buffer_size.max(STORED_BUFFER_MIN);
    let search_states = SearchBuffer::subsample(visited, size, &mut brng).nodes().to_vec();
    Ok(TrainOutcome { seed, ensemble, buffer, search_states, losses, probes })
}

/// Writes `ensemble.sore`, `buffer.csv`, `losses.csv` and `probe.csv` into `dir`.
pub fn save_outcome<T: Scalar>(outcome: &TrainOutcome<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    outcome.ensemble.save(&dir.join("ensemble.sore"))?;
    write_states_csv(&dir.join("buffer.csv"), &outcome.search_states)?;
    write_csv(&dir.join("losses.csv"), &outcome.losses)?;
    write_csv(&dir.join("probe.csv"), &outcome.probes)?;
    Ok(())
}

pub fn write_states_csv(path: &Path, states: &[State]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "x", "y"])?;
    for (i, s) in states.iter().enumerate() {
        w.write_record([i.to_string(), s.x.to_string(), s.y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_states_csv(path: &Path) -> Result<Vec<State>> {
    #[derive(Deserialize)]
    struct Row {
        #[allow(dead_code)]
        index: usize,
        x: usize,
        y: usize,
    }
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<Row>().map(|row| row.map(|r| State::new(r.x, r.y)).map_err(Error::from)).collect()
}

/// `cmd_train`: one training run per configured seed, artifacts under
/// `output_dir/seed_<seed>/`.
pub fn cmd_train<T: Scalar>(cfg: &RunConfig) -> Result<Vec<TrainOutcome<T>>> {
    let map = cfg.load_map()?;
    fs::create_dir_all(&cfg.output_dir)?;
    fs::write(cfg.output_dir.join("config.json"), cfg.to_json())?;
    let mut outcomes = Vec::new();
    for &seed in &cfg.seeds {
        let dir = cfg.seed_dir(seed);
        fs::create_dir_all(&dir)?;
        log::info!("training seed {seed} on {}", map.name());
        let outcome = train::<T>(cfg, std::slice::from_ref(&map), seed, Some(&dir))?;
        save_outcome(&outcome, &dir)?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

/// Loss moving averages over `window` steps.
pub fn moving_average(losses: &[LossRow], window: usize) -> Vec<f64> {
    if window == 0 || losses.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(losses.len() - window + 1);
    let mut sum: f64 = losses[..window].iter().map(|r| r.loss).sum();
    out.push(sum / window as f64);
    for i in window..losses.len() {
        sum += losses[i].loss - losses[i - window].loss;
        out.push(sum / window as f64);
    }
    out
}
