use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::eval::{load_trained, sample_pairs};
use super::records::write_csv;
use crate::distval::Scratch;
use crate::ensemble::ValueEnsemble;
use crate::error::Result;
use crate::gridworld::oracle::bfs_distances;
use crate::gridworld::GridMap;
use crate::search::{rollout, GreedyController};
use crate::{seed_mix, Scalar};

const CALIBRATION_STREAM: u64 = 0xca11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub sx: usize,
    pub sy: usize,
    pub gx: usize,
    pub gy: usize,
    pub oracle: u32,
    pub predicted: f64,
    /// Greedy rollout from s reached g within the horizon.
    pub success: bool,
}

/// Largest finite oracle distance on the map.
pub fn diameter(map: &GridMap) -> u32 {
    map.free_cells()
        .iter()
        .flat_map(|&s| bfs_distances(map, s).into_iter().flatten())
        .max()
        .unwrap_or(0)
}

/// `per_distance` pairs at every oracle distance from 0 to the diameter,
/// each with its aggregated predicted distance and a greedy rollout.
pub fn calibration<T: Scalar>(cfg: &RunConfig, map: &GridMap, ens: &ValueEnsemble<T>, seed: u64, per_distance: usize) -> Vec<CalibrationRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(seed, CALIBRATION_STREAM));
    let mut scratch = Scratch::default();
    let mut rows = Vec::new();
    for d in 0..=diameter(map) {
        let Some(pairs) = sample_pairs(map, d, per_distance, &mut rng) else { continue };
        for (s, g) in pairs {
            let mut c = GreedyController::new(ens);
            let r = rollout(&mut c, map, &cfg.episode, s, g, cfg.horizon, &mut rng);
            rows.push(CalibrationRow {
                sx: s.x,
                sy: s.y,
                gx: g.x,
                gy: g.y,
                oracle: d,
                predicted: ens.aggregate_distance_with(&mut scratch, map, s, g).to_f64_lossless(),
                success: r.success,
            });
        }
    }
    rows
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// `cmd_distcheck`: writes `output_dir/distcheck_seed_<seed>.csv`.
pub fn cmd_distcheck<T: Scalar>(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<Vec<CalibrationRow>> {
    let map = cfg.load_map()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut all = Vec::new();
    for &seed in &cfg.seeds {
        let (ens, _) = load_trained::<T>(cfg, checkpoint, seed, &map)?;
        let rows = calibration(cfg, &map, &ens, seed, cfg.trials_per_distance);
        write_csv(&cfg.output_dir.join(format!("distcheck_seed_{seed}.csv")), &rows)?;
        all.extend(rows);
    }
    Ok(all)
}
