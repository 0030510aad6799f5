use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::floyd::{floyd_warshall, DistanceMatrix, Successors};
use crate::distval::Scratch;
use crate::ensemble::ValueEnsemble;
use crate::error::{Error, Result};
use crate::gridworld::{random_walk_states, EpisodeConfig, GridMap, State};
use crate::Scalar;

/// Where the roadmap nodes came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BufferSource {
    TrainingSubsample,
    RandomWalk,
    Explicit,
}

/// Distinct states used as roadmap nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchBuffer {
    nodes: Vec<State>,
    source: BufferSource,
}

fn distinct(states: impl IntoIterator<Item = State>) -> Vec<State> {
    let mut seen = HashSet::new();
    states.into_iter().filter(|s| seen.insert(*s)).collect()
}

impl SearchBuffer {
    pub fn empty() -> Self {
        Self { nodes: Vec::new(), source: BufferSource::Explicit }
    }

    /// Deduplicates `states`, keeping first occurrences in order.
    pub fn from_states(states: impl IntoIterator<Item = State>, source: BufferSource) -> Self {
        Self { nodes: distinct(states), source }
    }

    /// Uniform subsample of at most `size` distinct states.
    pub fn subsample<R: Rng + ?Sized>(states: impl IntoIterator<Item = State>, size: usize, rng: &mut R) -> Self {
        let mut nodes = distinct(states);
        if nodes.len() > size {
            let (picked, _) = nodes.partial_shuffle(rng, size);
            nodes = picked.to_vec();
        }
        Self { nodes, source: BufferSource::TrainingSubsample }
    }

    /// States visited by `n` steps of random-policy rollouts, deduplicated.
    pub fn random_walk<R: Rng + ?Sized>(map: &GridMap, cfg: &EpisodeConfig, n: usize, rng: &mut R) -> Self {
        Self { nodes: distinct(random_walk_states(map, cfg, n, rng)), source: BufferSource::RandomWalk }
    }

    pub fn nodes(&self) -> &[State] {
        &self.nodes
    }

    pub fn source(&self) -> BufferSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// First `k` nodes, for nested buffer-size sweeps.
    pub fn truncated(&self, k: usize) -> Self {
        Self { nodes: self.nodes[..k.min(self.nodes.len())].to_vec(), source: self.source }
    }
}

/// Result of a start-to-goal query.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedPath<T> {
    /// Estimated total length in steps.
    pub total: T,
    /// Buffer states to visit in order; empty when the direct route wins.
    pub waypoints: Vec<State>,
}

/// Directed graph over buffer states with cached all-pairs distances.
#[derive(Clone, Debug)]
pub struct Roadmap<T> {
    buffer: SearchBuffer,
    edge_weights: DistanceMatrix<T>,
    maxdist: T,
    apsp: DistanceMatrix<T>,
    successors: Successors,
}

impl<T: Scalar> Roadmap<T> {
    /// Evaluates the ensemble on every ordered node pair, drops edges of
    /// length `>= maxdist`, and caches Floyd-Warshall distances.
    pub fn build(buffer: SearchBuffer, ens: &ValueEnsemble<T>, map: &GridMap, maxdist: T) -> Self {
        let n = buffer.len();
        let mut raw = DistanceMatrix::new(n);
        let mut scratch = Scratch::default();
        for (i, &u) in buffer.nodes.iter().enumerate() {
            for (j, &v) in buffer.nodes.iter().enumerate() {
                if i != j {
                    raw.set(i, j, ens.aggregate_distance_with(&mut scratch, map, u, v));
                }
            }
        }
        Self::from_edge_weights(buffer, raw, maxdist)
    }

    /// Builds from precomputed raw (unpruned) pairwise distances.
    pub fn from_edge_weights(buffer: SearchBuffer, edge_weights: DistanceMatrix<T>, maxdist: T) -> Self {
        let n = buffer.len();
        assert_eq!(edge_weights.len(), n, "one weight row per node");
        let mut pruned = DistanceMatrix::new(n);
        for i in 0..n {
            for j in 0..n {
                let w = edge_weights.get(i, j);
                if i != j && w < maxdist {
                    pruned.set(i, j, w);
                }
            }
        }
        let (apsp, successors) = floyd_warshall(&pruned);
        Self { buffer, edge_weights, maxdist, apsp, successors }
    }

    /// Re-evaluates every edge with the current ensemble parameters.
    pub fn refresh(&self, ens: &ValueEnsemble<T>, map: &GridMap) -> Self {
        Self::build(self.buffer.clone(), ens, map, self.maxdist)
    }

    /// Same raw edges pruned at a different threshold; no new value calls.
    pub fn with_maxdist(&self, maxdist: T) -> Self {
        Self::from_edge_weights(self.buffer.clone(), self.edge_weights.clone(), maxdist)
    }

    /// Roadmap over the first `k` buffer nodes, reusing their raw edges.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.buffer.len());
        let rows: Vec<Vec<T>> = (0..k).map(|i| self.edge_weights.row(i)[..k].to_vec()).collect();
        Self::from_edge_weights(self.buffer.truncated(k), DistanceMatrix::from_rows(&rows), self.maxdist)
    }

    pub fn buffer(&self) -> &SearchBuffer {
        &self.buffer
    }

    pub fn maxdist(&self) -> T {
        self.maxdist
    }

    pub fn apsp(&self) -> &DistanceMatrix<T> {
        &self.apsp
    }

    pub fn edge_weights(&self) -> &DistanceMatrix<T> {
        &self.edge_weights
    }

    pub fn successors(&self) -> &Successors {
        &self.successors
    }

    fn pruned(&self, d: T) -> T {
        if d < self.maxdist {
            d
        } else {
            T::infinity()
        }
    }

    /// `min(min_{u,v} d(s,u) + D[u][v] + d(v,g), d(s,g))` where every fresh
    /// distance is pruned at `maxdist`. Needs `O(|B|)` ensemble evaluations.
    pub fn shortest_path_with(
        &self,
        scratch: &mut Scratch<T>,
        ens: &ValueEnsemble<T>,
        map: &GridMap,
        s: State,
        g: State,
    ) -> Result<PlannedPath<T>> {
        let direct = self.pruned(ens.aggregate_distance_with(scratch, map, s, g));
        let nodes = &self.buffer.nodes;
        let from_start: Vec<(usize, T)> = nodes
            .iter()
            .enumerate()
            .map(|(u, &node)| (u, self.pruned(ens.aggregate_distance_with(scratch, map, s, node))))
            .filter(|(_, d)| d.is_finite())
            .collect();
        let to_goal: Vec<(usize, T)> = nodes
            .iter()
            .enumerate()
            .map(|(v, &node)| (v, self.pruned(ens.aggregate_distance_with(scratch, map, node, g))))
            .filter(|(_, d)| d.is_finite())
            .collect();
        let mut best = (T::infinity(), 0usize, 0usize);
        for &(u, dsu) in &from_start {
            let row = self.apsp.row(u);
            for &(v, dvg) in &to_goal {
                let total = dsu + row[v] + dvg;
                if total < best.0 {
                    best = (total, u, v);
                }
            }
        }
        if !best.0.is_finite() && !direct.is_finite() {
            return Err(Error::NoPath);
        }
        if direct <= best.0 {
            return Ok(PlannedPath { total: direct, waypoints: Vec::new() });
        }
        let (total, u, v) = best;
        let path = self.successors.path(u, v).ok_or(Error::NoPath)?;
        Ok(PlannedPath { total, waypoints: path.into_iter().map(|i| nodes[i]).collect() })
    }

    pub fn shortest_path(&self, ens: &ValueEnsemble<T>, map: &GridMap, s: State, g: State) -> Result<PlannedPath<T>> {
        self.shortest_path_with(&mut Scratch::default(), ens, map, s, g)
    }

    /// Writes `u_index,v_index,weight` for every unpruned directed edge.
    pub fn write_edges_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["u_index", "v_index", "weight"])?;
        let n = self.buffer.len();
        for i in 0..n {
            for j in 0..n {
                let d = self.edge_weights.get(i, j);
                if i != j && d < self.maxdist {
                    w.write_record([i.to_string(), j.to_string(), d.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `index,x,y` for every node.
    pub fn write_nodes_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["index", "x", "y"])?;
        for (i, s) in self.buffer.nodes.iter().enumerate() {
            w.write_record([i.to_string(), s.x.to_string(), s.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::distval::TrainConfig;
    use crate::ensemble::EnsembleConfig;
    use crate::gridworld::builtin_map;

    fn untrained(map: &GridMap) -> ValueEnsemble<f64> {
        ValueEnsemble::new(map, &EnsembleConfig::default(), &TrainConfig::default(), 0).unwrap()
    }

    #[test]
    fn pruned_pair_without_intermediate_is_infinite() {
        let buf = SearchBuffer::from_states([State::new(1, 1), State::new(3, 1)], BufferSource::Explicit);
        let w = DistanceMatrix::from_rows(&[vec![0.0, 5.0], vec![5.0, 0.0]]);
        let rm = Roadmap::from_edge_weights(buf, w, 3.0);
        assert_eq!(rm.apsp().get(0, 1), f64::INFINITY);
    }

    #[test]
    fn two_hop_composition() {
        let buf = SearchBuffer::from_states([State::new(1, 1), State::new(2, 1), State::new(3, 1)], BufferSource::Explicit);
        let w = DistanceMatrix::from_rows(&[vec![0.0, 1.5, 4.0], vec![9.0, 0.0, 2.0], vec![9.0, 9.0, 0.0]]);
        let rm = Roadmap::from_edge_weights(buf, w, 3.0);
        assert_eq!(rm.apsp().get(0, 2), 3.5);
        assert_eq!(rm.successors().path(0, 2), Some(vec![0, 1, 2]));
    }

    #[test]
    fn empty_buffer_uses_direct_distance_or_fails() {
        let m = builtin_map("u_maze").unwrap();
        let ens = untrained(&m);
        let rm = Roadmap::build(SearchBuffer::empty(), &ens, &m, 3.0);
        // untrained distances are N/2 = 10 >= maxdist
        assert!(matches!(rm.shortest_path(&ens, &m, State::new(1, 1), State::new(2, 1)), Err(Error::NoPath)));
        let wide = rm.with_maxdist(11.0);
        let p = wide.shortest_path(&ens, &m, State::new(1, 1), State::new(2, 1)).unwrap();
        assert_eq!(p, PlannedPath { total: 10.0, waypoints: vec![] });
    }

    #[test]
    fn subsample_is_distinct_and_bounded() {
        let states = [State::new(1, 1), State::new(1, 1), State::new(2, 1), State::new(3, 1)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = SearchBuffer::subsample(states, 2, &mut rng);
        assert_eq!(b.len(), 2);
        assert_ne!(b.nodes()[0], b.nodes()[1]);
        assert_eq!(SearchBuffer::subsample(states, 10, &mut rng).len(), 3);
    }

    #[test]
    fn csv_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let buf = SearchBuffer::from_states([State::new(1, 1), State::new(2, 1)], BufferSource::Explicit);
        let w = DistanceMatrix::from_rows(&[vec![0.0, 1.0], vec![4.0, 0.0]]);
        let rm = Roadmap::from_edge_weights(buf, w, 3.0);
        rm.write_edges_csv(&dir.path().join("e.csv")).unwrap();
        rm.write_nodes_csv(&dir.path().join("n.csv")).unwrap();
        let edges = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
        assert_eq!(edges, "u_index,v_index,weight\n0,1,1\n");
        let nodes = std::fs::read_to_string(dir.path().join("n.csv")).unwrap();
        assert_eq!(nodes, "index,x,y\n0,1,1\n1,2,1\n");
    }
}
