use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{bfs_bounded, within_radius};
use super::GridMap;

/// A free cell of some map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct State {
    pub x: usize,
    pub y: usize,
}

impl State {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: State) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    North = 0,
    South = 1,
    East = 2,
    West = 3,
}

impl Action {
    pub const COUNT: usize = 4;
    pub const ALL: [Action; 4] = [Action::North, Action::South, Action::East, Action::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn delta(self) -> (i64, i64) {
        match self {
            Action::North => (0, -1),
            Action::South => (0, 1),
            Action::East => (1, 0),
            Action::West => (-1, 0),
        }
    }

    /// The neighboring cell in this direction, or `None` if it is a wall.
    pub fn apply(self, map: &GridMap, s: State) -> Option<State> {
        let (dx, dy) = self.delta();
        let (x, y) = (s.x as i64 + dx, s.y as i64 + dy);
        if map.is_wall(x, y) {
            None
        } else {
            Some(State::new(x as usize, y as usize))
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Action {
        Self::ALL[rng.gen_range(0..Self::COUNT)]
    }
}

/// Episode semantics shared by training and evaluation rollouts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// Horizon `T`.
    pub max_steps: usize,
    /// Probability that the executed direction is replaced by a random one.
    pub slip_prob: f64,
    /// Goal is reached within this many noiseless steps; 0 means the exact cell.
    pub goal_radius: u32,
    pub nearby_goal_prob: f64,
    pub nearby_goal_steps: u32,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { max_steps: 100, slip_prob: 0.1, goal_radius: 0, nearby_goal_prob: 0.8, nearby_goal_steps: 4 }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.max_steps == 0 {
            return Err(crate::Error::Config("episode max_steps must be >= 1".into()));
        }
        if !prob(self.slip_prob) || !prob(self.nearby_goal_prob) {
            return Err(crate::Error::Config("episode probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn reached(&self, map: &GridMap, s: State, goal: State) -> bool {
        within_radius(map, s, goal, self.goal_radius)
    }
}

/// One environment step. The reward is always -1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: State,
    pub action: Action,
    pub next_state: State,
    pub goal: State,
    pub reward: f64,
    /// `next_state` is within the goal radius of `goal`.
    pub done: bool,
    /// The episode hit its horizon on this step without reaching the goal.
    pub timeout: bool,
}

/// Samples a start uniformly over free cells and a goal from the mixture of
/// "nearby" (within `nearby_goal_steps`) and uniform goals.
pub fn reset<R: Rng + ?Sized>(map: &GridMap, cfg: &EpisodeConfig, rng: &mut R) -> (State, State) {
    let free = map.free_cells();
    let start = *free.choose(rng).expect("maps have at least two free cells");
    if rng.gen_bool(cfg.nearby_goal_prob) {
        let dist = bfs_bounded(map, start, cfg.nearby_goal_steps);
        let near: Vec<State> = free
            .iter()
            .copied()
            .filter(|&s| s != start && dist[map.index(s)].is_some())
            .collect();
        if let Some(&g) = near.choose(rng) {
            return (start, g);
        }
    }
    // uniform over free cells other than the start
    let mut i = rng.gen_range(0..free.len() - 1);
    if free[i] == start {
        i = free.len() - 1;
    }
    (start, free[i])
}

/// Applies `action` from `state`. Moves into walls leave the agent in place.
/// `timeout` is always false here; the caller owns the step counter.
pub fn step<R: Rng + ?Sized>(
    map: &GridMap,
    state: State,
    action: Action,
    goal: State,
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Transition {
    let executed = if cfg.slip_prob > 0.0 && rng.gen_bool(cfg.slip_prob) { Action::random(rng) } else { action };
    let next_state = executed.apply(map, state).unwrap_or(state);
    Transition {
        state,
        action,
        next_state,
        goal,
        reward: -1.0,
        done: cfg.reached(map, next_state, goal),
        timeout: false,
    }
}

/// Collects `n` states visited by uniform-random rollouts of length `T`,
/// restarting from a fresh reset after each episode. Duplicates are kept.
pub fn random_walk_states<R: Rng + ?Sized>(map: &GridMap, cfg: &EpisodeConfig, n: usize, rng: &mut R) -> Vec<State> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (mut s, g) = reset(map, cfg, rng);
        out.push(s);
        for _ in 0..cfg.max_steps {
            if out.len() >= n {
                break;
            }
            let t = step(map, s, Action::random(rng), g, cfg, rng);
            s = t.next_state;
            out.push(s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::gridworld::oracle::{oracle_distance, DistanceTable};
    use crate::gridworld::builtin_map;

    fn noiseless() -> EpisodeConfig {
        EpisodeConfig { slip_prob: 0.0, ..Default::default() }
    }

    #[test]
    fn action_encoding_is_stable() {
        for (i, a) in Action::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(Action::from_index(i), Some(*a));
        }
        assert_eq!(Action::from_index(4), None);
    }

    #[test]
    fn bumping_a_wall_stays_put() {
        let m = builtin_map("four_rooms").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = State::new(1, 1);
        let t = step(&m, s, Action::North, State::new(5, 5), &noiseless(), &mut rng);
        assert_eq!(t.next_state, s);
        assert_eq!(t.reward, -1.0);
        assert!(!t.done && !t.timeout);
    }

    #[test]
    fn stepping_onto_goal_is_done() {
        let m = builtin_map("four_rooms").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = step(&m, State::new(1, 1), Action::East, State::new(2, 1), &noiseless(), &mut rng);
        assert!(t.done);
    }

    #[test]
    fn exhaustive_reward_and_projection() {
        let m = builtin_map("u_maze").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = noiseless();
        for &s in m.free_cells() {
            for a in Action::ALL {
                let t = step(&m, s, a, s, &cfg, &mut rng);
                assert_eq!(t.reward, -1.0);
                assert!(m.is_free(t.next_state));
                assert!(t.state.manhattan(t.next_state) <= 1);
                if t.done {
                    assert!(oracle_distance(&m, t.next_state, t.goal).unwrap() <= cfg.goal_radius);
                }
            }
        }
    }

    #[test]
    fn nearby_goal_rate() {
        let m = builtin_map("four_rooms").unwrap();
        let table = DistanceTable::new(&m);
        let cfg = EpisodeConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let near = (0..n)
            .filter(|_| {
                let (s, g) = reset(&m, &cfg, &mut rng);
                assert_ne!(s, g);
                table.get(&m, s, g).unwrap() <= 4
            })
            .count();
        assert!(near as f64 / n as f64 >= 0.75, "near fraction {}", near as f64 / n as f64);
    }

    #[test]
    fn uniform_goal_marginal() {
        // chi-square goodness of fit against the uniform goal marginal
        let m = builtin_map("u_maze").unwrap();
        let cfg = EpisodeConfig { nearby_goal_prob: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let mut counts = vec![0usize; m.num_cells()];
        for _ in 0..n {
            let (s, g) = reset(&m, &cfg, &mut rng);
            assert_ne!(s, g);
            counts[m.index(g)] += 1;
        }
        let k = m.free_cells().len();
        let expected = n as f64 / k as f64;
        let chi2: f64 = m
            .free_cells()
            .iter()
            .map(|s| (counts[m.index(*s)] as f64 - expected).powi(2) / expected)
            .sum();
        // df = k - 1; mean + 4 standard deviations
        let df = (k - 1) as f64;
        assert!(chi2 < df + 4.0 * (2.0 * df).sqrt(), "chi2 {chi2} df {df}");
    }

    #[test]
    fn reset_is_deterministic() {
        let m = builtin_map("four_rooms").unwrap();
        let cfg = EpisodeConfig::default();
        let a = reset(&m, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        let b = reset(&m, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn random_walk_counts_and_determinism() {
        let m = builtin_map("random_maze:3:15").unwrap();
        let cfg = EpisodeConfig::default();
        let a = random_walk_states(&m, &cfg, 1000, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a.len(), 1000);
        assert!(a.iter().all(|s| m.is_free(*s)));
        let b = random_walk_states(&m, &cfg, 1000, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let one = random_walk_states(&m, &cfg, 1, &mut rng);
        let (start, _) = reset(&m, &cfg, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(one, vec![start]);
    }
}
