mod common;

use common::{dijkstra, random_graph, to_matrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sorb::roadmap::{floyd_warshall, BufferSource, DistanceMatrix, Roadmap, SearchBuffer};
use sorb::State;

#[test]
fn floyd_warshall_matches_dijkstra_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..200 {
        let adj = random_graph(&mut rng);
        let n = adj.len();
        let (dist, succ) = floyd_warshall(&to_matrix(&adj));
        for i in 0..n {
            let oracle = dijkstra(&adj, i);
            for j in 0..n {
                let expect = oracle[j].map_or(f64::INFINITY, |d| d as f64);
                assert_eq!(dist.get(i, j), expect, "({i}, {j}) of {n}");
                match succ.path(i, j) {
                    Some(path) => {
                        assert!(expect.is_finite());
                        assert_eq!((path[0], *path.last().unwrap()), (i, j));
                        let sum: u64 = path.windows(2).map(|e| adj[e[0]][e[1]].expect("path uses real edges")).sum();
                        assert_eq!(sum as f64, expect);
                    }
                    None => assert!(expect.is_infinite()),
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    assert!(dist.get(i, j) <= dist.get(i, k) + dist.get(k, j));
                }
            }
        }
    }
}

#[test]
fn zero_weight_edges_and_self_loops() {
    // a zero edge still counts as an edge; the diagonal is always zero
    let w = DistanceMatrix::from_rows(&[vec![5.0, 0.0, f64::INFINITY], vec![f64::INFINITY, 5.0, 0.0], vec![1.0, f64::INFINITY, 5.0]]);
    let (d, s) = floyd_warshall(&w);
    assert_eq!((d.get(0, 0), d.get(0, 2), d.get(1, 0)), (0.0, 0.0, 1.0));
    assert_eq!(s.path(0, 2), Some(vec![0, 1, 2]));
}

fn line_buffer(n: usize) -> SearchBuffer {
    SearchBuffer::from_states((0..n).map(|i| State::new(i + 1, 1)), BufferSource::Explicit)
}

fn weights(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..10.0, n), n)
}

proptest! {
    #[test]
    fn raising_maxdist_never_lengthens_paths(
        rows in (2usize..10).prop_flat_map(weights),
        lo in 0.5f64..6.0,
        extra in 0.0f64..6.0,
    ) {
        let n = rows.len();
        let raw = DistanceMatrix::from_rows(&rows);
        let tight = Roadmap::from_edge_weights(line_buffer(n), raw.clone(), lo);
        let loose = tight.with_maxdist(lo + extra);
        for i in 0..n {
            for j in 0..n {
                prop_assert!(loose.apsp().get(i, j) <= tight.apsp().get(i, j));
            }
        }
    }

    #[test]
    fn every_planned_hop_is_an_unpruned_edge(
        rows in (2usize..10).prop_flat_map(weights),
        maxdist in 0.5f64..8.0,
    ) {
        let n = rows.len();
        let rm = Roadmap::from_edge_weights(line_buffer(n), DistanceMatrix::from_rows(&rows), maxdist);
        for i in 0..n {
            for j in 0..n {
                let d = rm.apsp().get(i, j);
                if let Some(path) = rm.successors().path(i, j) {
                    let mut sum = 0.0;
                    for e in path.windows(2) {
                        let w = rm.edge_weights().get(e[0], e[1]);
                        prop_assert!(w < maxdist);
                        sum += w;
                    }
                    prop_assert!((sum - d).abs() < 1e-9);
                } else {
                    prop_assert!(d.is_infinite());
                }
            }
        }
    }

    #[test]
    fn truncation_matches_a_fresh_build(rows in (2usize..10).prop_flat_map(weights), k in 0usize..10) {
        let n = rows.len();
        let full = Roadmap::from_edge_weights(line_buffer(n), DistanceMatrix::from_rows(&rows), 4.0);
        let k = k.min(n);
        let prefix: Vec<Vec<f64>> = rows[..k].iter().map(|r| r[..k].to_vec()).collect();
        let fresh = Roadmap::from_edge_weights(line_buffer(k), DistanceMatrix::from_rows(&prefix), 4.0);
        let cut = full.truncated(k);
        prop_assert_eq!(cut.apsp(), fresh.apsp());
    }
}
