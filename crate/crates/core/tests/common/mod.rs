//! Oracles shared by the integration suites.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sorb::distval::kl_loss;
use sorb::distval::mlp::Mlp;
use sorb::gridworld::builtin_map;
use sorb::roadmap::DistanceMatrix;
use sorb::{Aggregation, EpisodeConfig, TrainConfig, ValueEnsemble, ValueEstimator};

/// Per-source Dijkstra over integer weights; `None` marks unreachable.
pub fn dijkstra(adj: &[Vec<Option<u64>>], src: usize) -> Vec<Option<u64>> {
    let n = adj.len();
    let mut dist = vec![None; n];
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist[u].is_some() {
            continue;
        }
        dist[u] = Some(d);
        for v in 0..n {
            if let Some(w) = adj[u][v] {
                if dist[v].is_none() {
                    heap.push(Reverse((d + w, v)));
                }
            }
        }
    }
    dist
}

pub fn random_graph(rng: &mut ChaCha8Rng) -> Vec<Vec<Option<u64>>> {
    let n = rng.gen_range(1..=20);
    let density = rng.gen_range(0.05..0.6);
    (0..n)
        .map(|i| (0..n).map(|j| (i != j && rng.gen_bool(density)).then(|| rng.gen_range(0..=12))).collect())
        .collect()
}

pub fn to_matrix(adj: &[Vec<Option<u64>>]) -> DistanceMatrix<f64> {
    let rows: Vec<Vec<f64>> = adj
        .iter()
        .enumerate()
        .map(|(i, r)| r.iter().enumerate().map(|(j, w)| if i == j { 0.0 } else { w.map_or(f64::INFINITY, |w| w as f64) }).collect())
        .collect();
    DistanceMatrix::from_rows(&rows)
}

/// u_maze tabular estimator driven to the value-iteration fixed point of a
/// noiseless map, where every predicted distance is `min(BFS distance, N)`.
pub fn converged_u_maze(bins: usize) -> ValueEnsemble<f64> {
    let map = builtin_map("u_maze").unwrap();
    let episode = EpisodeConfig { slip_prob: 0.0, ..Default::default() };
    let cfg = TrainConfig { num_bins: bins, ..Default::default() };
    let mut est = ValueEstimator::<f64>::new(&map, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    for _ in 0..=bins + 2 {
        est.value_iteration_sweep(&map, &episode, 1.0).unwrap();
    }
    ValueEnsemble::from_members(vec![est], Aggregation::Max).unwrap()
}

pub const ACTIONS: usize = 4;
pub const STEP: f64 = 1e-5;
/// Hidden pre-activations closer than this to zero would let the
/// finite-difference step cross a ReLU kink.
const KINK_MARGIN: f64 = 1e-3;

/// Independent forward pass from the documented parameter layout; returns
/// the output layer and the smallest |pre-activation| of any hidden unit.
pub fn reference_forward(sizes: &[usize], params: &[f64], input: &[f64]) -> (Vec<f64>, f64) {
    let mut x = input.to_vec();
    let mut off = 0;
    let mut margin = f64::INFINITY;
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let mut z: Vec<f64> = params[off + n_in * n_out..off + n_in * n_out + n_out].to_vec();
        for i in 0..n_in {
            for o in 0..n_out {
                z[o] += x[i] * params[off + i * n_out + o];
            }
        }
        off += n_in * n_out + n_out;
        if l + 2 < sizes.len() {
            margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        x = z;
    }
    (x, margin)
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub type Example = (Vec<f64>, usize, Vec<f64>);

pub fn batch_loss(sizes: &[usize], params: &[f64], batch: &[Example]) -> f64 {
    let width = sizes[sizes.len() - 1] / ACTIONS;
    let total: f64 = batch
        .iter()
        .map(|(x, a, t)| {
            let (out, _) = reference_forward(sizes, params, x);
            kl_loss(&softmax(&out[a * width..(a + 1) * width]), t)
        })
        .sum();
    total / batch.len() as f64
}

pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// Largest relative error between the analytic KL gradient and central
/// differences over `draws` random networks and batches.
pub fn max_gradient_error(draws_wanted: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut draws = 0;
    while draws < draws_wanted {
        let input = rng.gen_range(2..7);
        let hidden: Vec<usize> = (0..rng.gen_range(1..3)).map(|_| rng.gen_range(3..9)).collect();
        let width = rng.gen_range(2..6);
        let mut sizes = vec![input];
        sizes.extend(&hidden);
        sizes.push(ACTIONS * width);
        let count: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let params: Vec<f64> = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let batch: Vec<Example> = (0..rng.gen_range(1..6))
            .map(|_| {
                let x = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (x, rng.gen_range(0..ACTIONS), random_simplex(&mut rng, width))
            })
            .collect();
        if batch.iter().any(|(x, _, _)| reference_forward(&sizes, &params, x).1 < KINK_MARGIN) {
            continue;
        }
        draws += 1;

        let net = Mlp::from_params(&sizes, params.clone()).unwrap();
        let mut ws = net.workspace();
        for (x, _, _) in &batch {
            let out = net.forward(x, &mut ws).unwrap().to_vec();
            let (reference, _) = reference_forward(&sizes, &params, x);
            for (a, b) in out.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let examples: Vec<(&[f64], usize, &[f64])> = batch.iter().map(|(x, a, t)| (&x[..], *a, &t[..])).collect();
        let mut grads = vec![0.0; count];
        let loss = net.kl_loss_and_gradient(&examples, ACTIONS, &mut ws, &mut grads).unwrap();
        assert!((loss - batch_loss(&sizes, &params, &batch)).abs() < 1e-12);

        let mut p = params.clone();
        for k in 0..count {
            p[k] = params[k] + STEP;
            let up = batch_loss(&sizes, &p, &batch);
            p[k] = params[k] - STEP;
            let down = batch_loss(&sizes, &p, &batch);
            p[k] = params[k];
            let numeric = (up - down) / (2.0 * STEP);
            let scale = grads[k].abs().max(numeric.abs());
            // both sides vanish for parameters feeding dead units
            let rel = if scale < 1e-9 { 0.0 } else { (grads[k] - numeric).abs() / scale };
            worst = worst.max(rel);
        }
    }
    worst
}
