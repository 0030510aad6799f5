use std::cmp::Ordering;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sorb::gridworld::{builtin_map, oracle_distance, DistanceTable};
use sorb::roadmap::BufferSource;
use sorb::{
    rollout, Aggregation, Controller, EpisodeConfig, GridMap, Roadmap, SearchBuffer, SearchPolicy, State, TrainConfig,
    ValueEnsemble, ValueEstimator,
};

const BINS: usize = 20;

struct Fixture {
    map: GridMap,
    table: DistanceTable,
    ens: ValueEnsemble<f64>,
}

/// u_maze estimator driven to the value-iteration fixed point, where every
/// predicted distance is `min(BFS distance, N)`.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let map = builtin_map("u_maze").unwrap();
        let episode = EpisodeConfig { slip_prob: 0.0, ..Default::default() };
        let cfg = TrainConfig { num_bins: BINS, ..Default::default() };
        let mut est = ValueEstimator::<f64>::new(&map, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for _ in 0..=BINS + 2 {
            est.value_iteration_sweep(&map, &episode, 1.0).unwrap();
        }
        let ens = ValueEnsemble::from_members(vec![est], Aggregation::Max).unwrap();
        let table = DistanceTable::new(&map);
        Fixture { map, table, ens }
    })
}

fn capped(f: &Fixture, a: State, b: State) -> f64 {
    f.table.get(&f.map, a, b).unwrap().min(BINS as u32) as f64
}

/// Dijkstra from `s` to `g` over `{s, g} + nodes`, keeping only edges shorter
/// than `maxdist`.
fn oracle_plan(f: &Fixture, nodes: &[State], s: State, g: State, maxdist: f64) -> f64 {
    let mut all = vec![s];
    all.extend_from_slice(nodes);
    all.push(g);
    let n = all.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[0] = 0.0;
    for _ in 0..n {
        let Some(u) = (0..n).filter(|&i| !done[i]).min_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap_or(Ordering::Equal)) else {
            break;
        };
        if dist[u].is_infinite() {
            break;
        }
        done[u] = true;
        for v in 0..n {
            let w = capped(f, all[u], all[v]);
            if v != u && w < maxdist && dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
            }
        }
    }
    dist[n - 1]
}

fn pick_nodes(map: &GridMap, picks: &[usize]) -> Vec<State> {
    let free = map.free_cells();
    let mut nodes: Vec<State> = picks.iter().map(|&i| free[i % free.len()]).collect();
    nodes.sort_by_key(|s| (s.y, s.x));
    nodes.dedup();
    nodes
}

fn buffer(nodes: &[State]) -> SearchBuffer {
    SearchBuffer::from_states(nodes.iter().copied(), BufferSource::Explicit)
}

fn maxdists() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![1.0, 2.0, 3.0, 5.0, 8.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn query_matches_graph_search_oracle(
        picks in prop::collection::vec(0usize..10_000, 0..40),
        si in 0usize..10_000,
        gi in 0usize..10_000,
        maxdist in maxdists(),
    ) {
        let f = fixture();
        let free = f.map.free_cells();
        let (s, g) = (free[si % free.len()], free[gi % free.len()]);
        let nodes = pick_nodes(&f.map, &picks);
        let rm = Roadmap::build(buffer(&nodes), &f.ens, &f.map, maxdist);
        let expect = oracle_plan(f, &nodes, s, g, maxdist);
        match rm.shortest_path(&f.ens, &f.map, s, g) {
            Ok(p) => {
                prop_assert!((p.total - expect).abs() < 1e-9, "{} vs {expect}", p.total);
                if let (Some(first), Some(last)) = (p.waypoints.first(), p.waypoints.last()) {
                    let mut sum = capped(f, s, *first) + capped(f, *last, g);
                    for w in p.waypoints.windows(2) {
                        let hop = capped(f, w[0], w[1]);
                        prop_assert!(hop < maxdist);
                        sum += hop;
                    }
                    prop_assert!((sum - p.total).abs() < 1e-9);
                }
            }
            Err(_) => prop_assert!(expect.is_infinite()),
        }
    }

    #[test]
    fn decisions_follow_the_waypoint_rule(
        picks in prop::collection::vec(0usize..10_000, 0..40),
        si in 0usize..10_000,
        gi in 0usize..10_000,
        maxdist in maxdists(),
    ) {
        let f = fixture();
        let free = f.map.free_cells();
        let (s, g) = (free[si % free.len()], free[gi % free.len()]);
        let nodes = pick_nodes(&f.map, &picks);
        let rm = Roadmap::build(buffer(&nodes), &f.ens, &f.map, maxdist);
        let mut policy = SearchPolicy::new(&rm, &f.ens);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = policy.decide(&f.map, s, g, &mut rng);
        prop_assert_eq!(d.action, f.ens.greedy_action(&f.map, s, d.target));
        prop_assert!((d.d_s_g - capped(f, s, g)).abs() < 1e-9);
        if d.conditioned_on_goal {
            prop_assert_eq!(d.target, g);
            if let Some(dw) = d.d_s_w1 {
                prop_assert!(!(dw < d.d_s_g || d.d_s_g > maxdist));
            }
        } else {
            prop_assert!(nodes.contains(&d.target));
            prop_assert!(d.target != s);
            let dw = d.d_s_w1.unwrap();
            prop_assert!(dw < d.d_s_g || d.d_s_g > maxdist);
        }
    }

    #[test]
    fn rollouts_are_reproducible(picks in prop::collection::vec(0usize..10_000, 0..30), seed in 0u64..1000) {
        let f = fixture();
        let nodes = pick_nodes(&f.map, &picks);
        let rm = Roadmap::build(buffer(&nodes), &f.ens, &f.map, 3.0);
        let cfg = EpisodeConfig::default();
        let (s, g) = (State::new(2, 13), State::new(12, 13));
        let run = |seed| {
            let mut policy = SearchPolicy::new(&rm, &f.ens);
            rollout(&mut policy, &f.map, &cfg, s, g, 100, &mut ChaCha8Rng::seed_from_u64(seed))
        };
        prop_assert_eq!(run(seed), run(seed));
    }
}

#[test]
fn fixture_is_at_the_fixed_point() {
    let f = fixture();
    let (s, g) = (State::new(2, 13), State::new(12, 13));
    assert_eq!(oracle_distance(&f.map, s, g), Some(30));
    assert_eq!(f.ens.aggregate_distance(&f.map, s, g), BINS as f64);
    assert_eq!(f.ens.aggregate_distance(&f.map, s, State::new(2, 5)), 8.0);
}

#[test]
fn dense_buffer_reaches_the_far_arm_noiselessly() {
    let f = fixture();
    let rm = Roadmap::build(buffer(f.map.free_cells()), &f.ens, &f.map, 3.0);
    let cfg = EpisodeConfig { slip_prob: 0.0, ..Default::default() };
    let (s, g) = (State::new(2, 13), State::new(12, 13));
    let mut policy = SearchPolicy::new(&rm, &f.ens);
    let r = rollout(&mut policy, &f.map, &cfg, s, g, 100, &mut ChaCha8Rng::seed_from_u64(0));
    assert!(r.success);
    assert_eq!(r.steps, 30);
}
