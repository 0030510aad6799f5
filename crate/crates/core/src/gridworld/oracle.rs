//! Exact shortest-path distances on the noiseless grid, by breadth-first search.

use std::collections::VecDeque;

use super::{Action, GridMap, State};

/// BFS step counts from `from` to every cell, indexed by [`GridMap::index`].
/// `None` marks walls and cells in other connected components.
pub fn bfs_distances(map: &GridMap, from: State) -> Vec<Option<u32>> {
    bfs_bounded(map, from, u32::MAX)
}

/// Like [`bfs_distances`] but stops expanding past `limit` steps.
pub fn bfs_bounded(map: &GridMap, from: State, limit: u32) -> Vec<Option<u32>> {
    let mut dist = vec![None; map.num_cells()];
    if !map.is_free(from) {
        return dist;
    }
    let mut queue = VecDeque::new();
    dist[map.index(from)] = Some(0);
    queue.push_back(from);
    while let Some(s) = queue.pop_front() {
        let d = dist[map.index(s)].unwrap_or(0);
        if d >= limit {
            continue;
        }
        for a in Action::ALL {
            if let Some(n) = a.apply(map, s) {
                let slot = &mut dist[map.index(n)];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
    }
    dist
}

/// Exact step count from `s` to `g`, or `None` when no path exists.
pub fn oracle_distance(map: &GridMap, s: State, g: State) -> Option<u32> {
    if s == g {
        return map.is_free(s).then_some(0);
    }
    bfs_distances(map, s)[map.index(g)]
}

/// True when `a` can reach `b` in at most `radius` noiseless steps.
pub fn within_radius(map: &GridMap, a: State, b: State, radius: u32) -> bool {
    if a == b {
        return true;
    }
    if radius == 0 || a.manhattan(b) > radius as usize {
        return false;
    }
    bfs_bounded(map, a, radius)[map.index(b)].is_some()
}

/// Row-major table of all-pairs BFS distances over free cells; practical for
/// maps up to a few thousand free cells.
#[derive(Clone, Debug)]
pub struct DistanceTable {
    rows: Vec<Vec<Option<u32>>>,
    slot: Vec<Option<usize>>,
}

impl DistanceTable {
    pub fn new(map: &GridMap) -> Self {
        let mut slot = vec![None; map.num_cells()];
        for (i, s) in map.free_cells().iter().enumerate() {
            slot[map.index(*s)] = Some(i);
        }
        let rows = map.free_cells().iter().map(|&s| bfs_distances(map, s)).collect();
        Self { rows, slot }
    }

    pub fn get(&self, map: &GridMap, s: State, g: State) -> Option<u32> {
        let row = self.slot[map.index(s)]?;
        self.rows[row][map.index(g)]
    }
}
