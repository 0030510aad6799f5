use rand::Rng;

use crate::error::{Error, Result};
use crate::gridworld::{EpisodeConfig, GridMap, State, Transition};

/// A stored transition plus the map it came from and whether its starting
/// state already satisfies the goal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    /// Index into the map set used for training.
    pub map: u16,
    pub transition: Transition,
    pub at_goal: bool,
    /// Transitions of the same episode stored right after this one.
    pub remaining: u32,
}

impl Sample {
    pub fn new(map_id: u16, map: &GridMap, cfg: &EpisodeConfig, transition: Transition) -> Self {
        let at_goal = cfg.reached(map, transition.state, transition.goal);
        Self { map: map_id, transition, at_goal, remaining: 0 }
    }

    /// Same transition with `goal` substituted and `done`/`at_goal` recomputed.
    pub fn with_goal(&self, map: &GridMap, cfg: &EpisodeConfig, goal: State) -> Self {
        let mut tr = self.transition;
        tr.goal = goal;
        tr.done = cfg.reached(map, tr.next_state, goal);
        tr.timeout = self.transition.timeout && !tr.done;
        Self { transition: tr, at_goal: cfg.reached(map, tr.state, goal), ..*self }
    }
}

/// Fixed-capacity ring buffer that overwrites the oldest sample.
///
/// Episodes pushed with [`ReplayBuffer::push_episode`] are stored
/// contiguously in ring order. Since the oldest entries go first, the later
/// transitions of a stored sample's episode are always still present.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Sample>,
    next: usize,
    episode: EpisodeConfig,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self::with_episode(capacity, EpisodeConfig::default())
    }

    /// `episode` decides goal satisfaction when goals are relabeled at
    /// sampling time.
    pub fn with_episode(capacity: usize, episode: EpisodeConfig) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 20)), next: 0, episode }
    }

    /// Stores one episode with its original goals, in order.
    pub fn push_episode(&mut self, map_id: u16, map: &GridMap, trajectory: &[Transition]) {
        let n = trajectory.len();
        for (t, tr) in trajectory.iter().enumerate() {
            let mut s = Sample::new(map_id, map, &self.episode, *tr);
            s.remaining = (n - 1 - t) as u32;
            self.push(s);
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, sample: Sample) {
        if self.items.len() < self.capacity {
            self.items.push(sample);
        } else {
            self.items[self.next] = sample;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn extend(&mut self, samples: impl IntoIterator<Item = Sample>) {
        for s in samples {
            self.push(s);
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.items
    }

    /// `n` draws, uniform with replacement over the stored samples.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Sample>> {
        if self.items.len() < n || self.items.is_empty() {
            return Err(Error::InsufficientBuffer { have: self.items.len(), need: n.max(1) });
        }
        Ok((0..n).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect())
    }

    /// `n` uniform draws, each relabeled on the fly: the stored goal, the
    /// current state, or a uniformly chosen later state of its episode
    /// (including its own `next_state`), with probabilities `probs`.
    pub fn sample_relabeled<R: Rng + ?Sized>(&self, n: usize, probs: [f64; 3], maps: &[GridMap], rng: &mut R) -> Result<Vec<Sample>> {
        if self.items.len() < n || self.items.is_empty() {
            return Err(Error::InsufficientBuffer { have: self.items.len(), need: n.max(1) });
        }
        Ok((0..n)
            .map(|_| {
                let i = rng.gen_range(0..self.items.len());
                let s = &self.items[i];
                let u: f64 = rng.gen();
                let map = &maps[s.map as usize];
                if u < probs[0] {
                    *s
                } else if u < probs[0] + probs[1] {
                    s.with_goal(map, &self.episode, s.transition.state)
                } else {
                    let k = rng.gen_range(0..=s.remaining as usize);
                    let future = self.items[(i + k) % self.capacity].transition.next_state;
                    s.with_goal(map, &self.episode, future)
                }
            })
            .collect())
    }
}

/// Which goal a relabeled transition ended up with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelabelKind {
    Original,
    Current,
    Future,
}

/// Picks a goal for every transition of one episode: the original goal, the
/// current state, or a uniformly chosen later state of the same trajectory,
/// with probabilities `probs`. Later states include the final `next_state`,
/// so every transition has at least one future candidate. `done` is
/// recomputed against the new goal.
pub fn relabel_with_kinds<R: Rng + ?Sized>(
    map: &GridMap,
    cfg: &EpisodeConfig,
    trajectory: &[Transition],
    probs: [f64; 3],
    rng: &mut R,
) -> Result<Vec<(Transition, RelabelKind)>> {
    if trajectory.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let n = trajectory.len();
    Ok(trajectory
        .iter()
        .enumerate()
        .map(|(t, tr)| {
            let u: f64 = rng.gen();
            let (goal, kind) = if u < probs[0] {
                (tr.goal, RelabelKind::Original)
            } else if u < probs[0] + probs[1] {
                (tr.state, RelabelKind::Current)
            } else {
                // state index t' in (t, n]; state n is the last next_state
                let future = rng.gen_range(t + 1..=n);
                (trajectory[future - 1].next_state, RelabelKind::Future)
            };
            let mut out = *tr;
            if kind != RelabelKind::Original {
                out.goal = goal;
                out.done = cfg.reached(map, out.next_state, goal);
                out.timeout = tr.timeout && !out.done;
            }
            (out, kind)
        })
        .collect())
}

/// [`relabel_with_kinds`] with the kinds dropped.
pub fn relabel<R: Rng + ?Sized>(
    map: &GridMap,
    cfg: &EpisodeConfig,
    trajectory: &[Transition],
    probs: [f64; 3],
    rng: &mut R,
) -> Result<Vec<Transition>> {
    Ok(relabel_with_kinds(map, cfg, trajectory, probs, rng)?.into_iter().map(|(t, _)| t).collect())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::gridworld::{builtin_map, step, Action, State};

    const THIRDS: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

    fn walk(map: &GridMap, cfg: &EpisodeConfig, len: usize, rng: &mut ChaCha8Rng) -> Vec<Transition> {
        let mut s = State::new(3, 3);
        let goal = State::new(17, 17);
        (0..len)
            .map(|_| {
                let t = step(map, s, Action::random(rng), goal, cfg, rng);
                s = t.next_state;
                t
            })
            .collect()
    }

    #[test]
    fn ring_overwrites_oldest() {
        let m = builtin_map("four_rooms").unwrap();
        let cfg = EpisodeConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let traj = walk(&m, &cfg, 5, &mut rng);
        let mut buf = ReplayBuffer::new(3);
        for t in &traj {
            buf.push(Sample::new(0, &m, &cfg, *t));
        }
        assert_eq!(buf.len(), 3);
        let stored: Vec<Transition> = buf.samples().iter().map(|s| s.transition).collect();
        assert_eq!(stored, vec![traj[3], traj[4], traj[2]]);
        assert!(buf.sample(4, &mut rng).is_err());
        assert_eq!(buf.sample(3, &mut rng).unwrap().len(), 3);
    }

    #[test]
    fn sample_time_relabeling_stays_within_the_episode() {
        let m = builtin_map("four_rooms").unwrap();
        let cfg = EpisodeConfig { slip_prob: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // capacity 7 wraps the second episode around the ring
        let mut buf = ReplayBuffer::with_episode(7, cfg.clone());
        let first = walk(&m, &cfg, 4, &mut rng);
        let second = walk(&m, &cfg, 5, &mut rng);
        buf.push_episode(0, &m, &first);
        buf.push_episode(0, &m, &second);
        let maps = [m];
        let mut kinds = [0usize; 3];
        let draws: Vec<Sample> = (0..1000).flat_map(|_| buf.sample_relabeled(3, THIRDS, &maps, &mut rng).unwrap()).collect();
        for s in draws {
            let tr = s.transition;
            let episode = if second.iter().any(|t| t.state == tr.state && t.next_state == tr.next_state) { &second } else { &first };
            let t = episode.iter().position(|x| x.state == tr.state && x.next_state == tr.next_state && x.action == tr.action).unwrap();
            if tr.goal == State::new(17, 17) {
                kinds[0] += 1;
            } else if tr.goal == tr.state && s.at_goal {
                kinds[1] += 1;
            } else {
                assert!(episode[t..].iter().any(|x| x.next_state == tr.goal), "goal outside the episode future");
                kinds[2] += 1;
            }
            assert_eq!(tr.done, tr.next_state == tr.goal);
        }
        assert!(kinds.iter().all(|&k| k > 800), "{kinds:?}");
    }

    #[test]
    fn empty_trajectory_is_an_error() {
        let m = builtin_map("four_rooms").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            relabel(&m, &EpisodeConfig::default(), &[], THIRDS, &mut rng),
            Err(Error::EmptyTrajectory)
        ));
    }

    #[test]
    fn current_state_goal_is_at_goal() {
        let m = builtin_map("four_rooms").unwrap();
        let cfg = EpisodeConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let traj = walk(&m, &cfg, 20, &mut rng);
        let out = relabel_with_kinds(&m, &cfg, &traj, [0.0, 1.0, 0.0], &mut rng).unwrap();
        for (t, kind) in out {
            assert_eq!(kind, RelabelKind::Current);
            assert!(Sample::new(0, &m, &cfg, t).at_goal);
        }
    }

    #[test]
    fn next_state_goal_is_done() {
        let m = builtin_map("four_rooms").unwrap();
        let cfg = EpisodeConfig { slip_prob: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let traj = walk(&m, &cfg, 1, &mut rng);
        // a one-step trajectory can only relabel to s_{t+1}
        let out = relabel_with_kinds(&m, &cfg, &traj, [0.0, 0.0, 1.0], &mut rng).unwrap();
        assert_eq!(out[0].0.goal, traj[0].next_state);
        assert!(out[0].0.done);
    }

    #[test]
    fn kind_frequencies_are_a_third_each() {
        let m = builtin_map("four_rooms").unwrap();
        let cfg = EpisodeConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let traj = walk(&m, &cfg, 100, &mut rng);
        let mut counts = [0usize; 3];
        for _ in 0..300 {
            for (_, kind) in relabel_with_kinds(&m, &cfg, &traj, THIRDS, &mut rng).unwrap() {
                counts[kind as usize] += 1;
            }
        }
        for c in counts {
            let f = c as f64 / 30_000.0;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
    }
}
