//! Goal-conditioned distance estimators over the two backends.

use rand::Rng;

use super::distribution::{expected_distance, interpolated, kl_loss, renormalize, shift_into, ValueDistribution};
use super::mlp::{Adam, Mlp, Workspace};
use super::replay::{ReplayBuffer, Sample};
use super::tabular::{entry_key, Tabular};
use super::{BackendSpec, Encoder, TrainConfig};
use crate::error::{Error, Result};
use crate::gridworld::{Action, EpisodeConfig, GridMap, State};
use crate::Scalar;

/// What the estimator outputs per action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueHead {
    /// `N + 1` bin probabilities.
    Distributional,
    /// One scalar distance clipped to `[0, N]`.
    Scalar,
}

impl ValueHead {
    pub fn width(self, num_bins: usize) -> usize {
        match self {
            ValueHead::Distributional => num_bins + 1,
            ValueHead::Scalar => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MlpBackend<T> {
    pub(crate) encoder: Encoder,
    pub(crate) net: Mlp<T>,
    pub(crate) target: Mlp<T>,
    pub(crate) opt: Adam<T>,
    pub(crate) grads: Vec<T>,
}

#[derive(Clone, Debug)]
pub enum Backend<T> {
    Tabular(Tabular<T>),
    Mlp(MlpBackend<T>),
}

/// Reusable buffers for repeated evaluation.
#[derive(Clone, Debug, Default)]
pub struct Scratch<T> {
    ws: Workspace<T>,
    input: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct ValueEstimator<T> {
    pub(crate) backend: Backend<T>,
    pub(crate) head: ValueHead,
    pub(crate) num_bins: usize,
    pub(crate) map_name: String,
    pub(crate) updates: u64,
}

impl<T: Scalar> ValueEstimator<T> {
    /// Fresh estimator for `map`. Tabular rows start uniform (or at `N / 2`
    /// for the scalar head); MLP weights are drawn from `rng`.
    pub fn new<R: Rng + ?Sized>(map: &GridMap, cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let head = if cfg.distributional { ValueHead::Distributional } else { ValueHead::Scalar };
        let n = cfg.num_bins;
        let width = head.width(n);
        let backend = match &cfg.backend {
            BackendSpec::Tabular => {
                let init = match head {
                    ValueHead::Distributional => T::one() / T::of_usize(n + 1),
                    ValueHead::Scalar => T::of_usize(n) / T::of(2.0),
                };
                Backend::Tabular(Tabular::new(map, width, init, !cfg.target_tracks_online()))
            }
            BackendSpec::Mlp { hidden, encoder } => {
                let mut sizes = vec![encoder.input_dim(map.width(), map.height())];
                sizes.extend(hidden.iter().copied());
                sizes.push(Action::COUNT * width);
                let net = Mlp::new(&sizes, rng);
                let opt = Adam::new(net.params().len(), T::of(cfg.lr()));
                Backend::Mlp(MlpBackend {
                    encoder: *encoder,
                    target: net.clone(),
                    grads: vec![T::zero(); net.params().len()],
                    net,
                    opt,
                })
            }
        };
        Ok(Self { backend, head, num_bins: n, map_name: map.name().to_string(), updates: 0 })
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn head(&self) -> ValueHead {
        self.head
    }

    pub fn backend(&self) -> &Backend<T> {
        &self.backend
    }

    pub fn map_name(&self) -> &str {
        &self.map_name
    }

    /// Number of completed training steps.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn scratch(&self) -> Scratch<T> {
        Scratch::default()
    }

    fn check_pair(&self, map: &GridMap, s: State, g: State) -> Result<()> {
        map.check_state(s)?;
        map.check_state(g)?;
        if let Backend::Tabular(tab) = &self.backend {
            if !tab.fits(map) {
                return Err(Error::InvalidState { x: s.x, y: s.y, map: map.name().to_string() });
            }
        }
        Ok(())
    }

    /// Raw per-action head rows for `(s, g)`, concatenated.
    fn raw_rows<'a>(&'a self, map: &GridMap, s: State, g: State, use_target: bool, scratch: &'a mut Scratch<T>) -> RowsRef<'a, T> {
        match &self.backend {
            Backend::Tabular(tab) => {
                let table = tab.table(use_target);
                RowsRef::Table(Action::ALL.map(|a| table.get(entry_key(map, s, g, a))), table.init())
            }
            Backend::Mlp(m) => {
                let net = if use_target { &m.target } else { &m.net };
                scratch.input.resize(net.input_dim(), T::zero());
                m.encoder.encode(map, s, g, &mut scratch.input);
                let out = net.forward(&scratch.input, &mut scratch.ws).expect("encoder matches network input");
                RowsRef::Logits(out)
            }
        }
    }

    /// Expected distance of each action's prediction.
    pub fn action_distances_with(&self, scratch: &mut Scratch<T>, map: &GridMap, s: State, g: State, use_target: bool) -> [T; 4] {
        let n = self.num_bins;
        let width = self.head.width(n);
        let head = self.head;
        let rows = self.raw_rows(map, s, g, use_target, scratch);
        let mut out = [T::zero(); 4];
        match rows {
            RowsRef::Table(rows, init) => {
                for (o, row) in out.iter_mut().zip(rows) {
                    *o = match (row, head) {
                        (None, ValueHead::Distributional) => T::of_usize(n) / T::of(2.0),
                        (None, ValueHead::Scalar) => init,
                        (Some(r), ValueHead::Distributional) => expected_distance(r),
                        (Some(r), ValueHead::Scalar) => clip(r[0], n),
                    };
                }
            }
            RowsRef::Logits(logits) => {
                let mut buf = vec![T::zero(); width];
                for (a, o) in out.iter_mut().enumerate() {
                    buf.copy_from_slice(&logits[a * width..(a + 1) * width]);
                    *o = match head {
                        ValueHead::Distributional => {
                            super::distribution::softmax_in_place(&mut buf);
                            expected_distance(&buf)
                        }
                        ValueHead::Scalar => clip(buf[0], n),
                    };
                }
            }
        }
        out
    }

    pub fn action_distances(&self, map: &GridMap, s: State, g: State) -> [T; 4] {
        self.action_distances_with(&mut Scratch::default(), map, s, g, false)
    }

    /// One distribution per action, in [`Action`] index order.
    pub fn predict(&self, map: &GridMap, s: State, g: State, use_target: bool) -> Result<Vec<ValueDistribution<T>>> {
        self.check_pair(map, s, g)?;
        let mut scratch = Scratch::default();
        Ok(self.predict_with(&mut scratch, map, s, g, use_target))
    }

    fn predict_with(&self, scratch: &mut Scratch<T>, map: &GridMap, s: State, g: State, use_target: bool) -> Vec<ValueDistribution<T>> {
        let n = self.num_bins;
        let width = self.head.width(n);
        let head = self.head;
        match self.raw_rows(map, s, g, use_target, scratch) {
            RowsRef::Table(rows, init) => rows
                .iter()
                .map(|row| match (row, head) {
                    (None, ValueHead::Distributional) => ValueDistribution::uniform(n),
                    (None, ValueHead::Scalar) => interpolated(n, init),
                    (Some(r), ValueHead::Distributional) => ValueDistribution::from_raw(r.to_vec()),
                    (Some(r), ValueHead::Scalar) => interpolated(n, r[0]),
                })
                .collect(),
            RowsRef::Logits(logits) => (0..Action::COUNT)
                .map(|a| {
                    let mut r = logits[a * width..(a + 1) * width].to_vec();
                    match head {
                        ValueHead::Distributional => {
                            super::distribution::softmax_in_place(&mut r);
                            ValueDistribution::from_raw(r)
                        }
                        ValueHead::Scalar => interpolated(n, r[0]),
                    }
                })
                .collect(),
        }
    }

    /// Smallest per-action expected distance: the estimate of `d(s, g)`.
    pub fn distance_with(&self, scratch: &mut Scratch<T>, map: &GridMap, s: State, g: State) -> T {
        let d = self.action_distances_with(scratch, map, s, g, false);
        d.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn distance(&self, map: &GridMap, s: State, g: State) -> T {
        self.distance_with(&mut Scratch::default(), map, s, g)
    }

    /// Action with the smallest expected distance; ties go to the lowest index.
    pub fn greedy_action(&self, map: &GridMap, s: State, g: State) -> Action {
        argmin_action(&self.action_distances(map, s, g))
    }

    /// Distribution of the greedy action under the target parameters.
    fn best_target_row(&self, scratch: &mut Scratch<T>, map: &GridMap, s: State, g: State, out: &mut [T]) {
        let n = self.num_bins;
        let width = self.head.width(n);
        let head = self.head;
        match self.raw_rows(map, s, g, true, scratch) {
            RowsRef::Table(rows, init) => {
                let dist = |row: Option<&[T]>| match (row, head) {
                    (None, ValueHead::Distributional) => T::of_usize(n) / T::of(2.0),
                    (None, ValueHead::Scalar) => clip(init, n),
                    (Some(r), ValueHead::Distributional) => expected_distance(r),
                    (Some(r), ValueHead::Scalar) => clip(r[0], n),
                };
                let best = rows
                    .iter()
                    .map(|&r| dist(r))
                    .enumerate()
                    .fold((0, T::infinity()), |acc, (a, d)| if d < acc.1 { (a, d) } else { acc })
                    .0;
                match rows[best] {
                    Some(r) => out.copy_from_slice(r),
                    None => out.fill(init),
                }
                if head == ValueHead::Scalar {
                    out[0] = clip(out[0], n);
                }
            }
            RowsRef::Logits(logits) => {
                let mut best = T::infinity();
                let mut buf = vec![T::zero(); width];
                for a in 0..Action::COUNT {
                    buf.copy_from_slice(&logits[a * width..(a + 1) * width]);
                    let d = match head {
                        ValueHead::Distributional => {
                            super::distribution::softmax_in_place(&mut buf);
                            expected_distance(&buf)
                        }
                        ValueHead::Scalar => {
                            buf[0] = clip(buf[0], n);
                            buf[0]
                        }
                    };
                    if d < best {
                        best = d;
                        out.copy_from_slice(&buf);
                    }
                }
            }
        }
    }

    /// Backup target for one stored sample, written into `out` (head width).
    fn target_for(&self, scratch: &mut Scratch<T>, map: &GridMap, sample: &Sample, out: &mut [T]) {
        let n = self.num_bins;
        let tr = &sample.transition;
        match self.head {
            ValueHead::Distributional => {
                if sample.at_goal {
                    out.fill(T::zero());
                    out[0] = T::one();
                } else if tr.done {
                    // next state is the goal: the shift of a point mass at 0
                    out.fill(T::zero());
                    out[1.min(n)] = T::one();
                } else {
                    let mut next = vec![T::zero(); n + 1];
                    self.best_target_row(scratch, map, tr.next_state, tr.goal, &mut next);
                    shift_into(&next, out);
                }
            }
            ValueHead::Scalar => {
                out[0] = if sample.at_goal {
                    T::zero()
                } else if tr.done {
                    T::one()
                } else {
                    let mut next = [T::zero()];
                    self.best_target_row(scratch, map, tr.next_state, tr.goal, &mut next);
                    clip(T::one() + next[0], n)
                };
            }
        }
    }

    /// One learning step on a uniform batch from `buffer`; returns the mean
    /// loss before the update (KL for the distributional head, squared error
    /// for the scalar head).
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        maps: &[GridMap],
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<T> {
        if cfg.relabel_on_sample {
            let batch = buffer.sample_relabeled(cfg.batch_size, cfg.relabel_probs, maps, rng)?;
            let refs: Vec<&Sample> = batch.iter().collect();
            self.train_on(&refs, maps, cfg)
        } else {
            let batch = buffer.sample(cfg.batch_size, rng)?;
            self.train_on(&batch, maps, cfg)
        }
    }

    pub fn train_on(&mut self, batch: &[&Sample], maps: &[GridMap], cfg: &TrainConfig) -> Result<T> {
        let width = self.head.width(self.num_bins);
        let mut scratch = Scratch::default();
        let mut targets = vec![T::zero(); batch.len() * width];
        let loss = match &self.backend {
            Backend::Tabular(_) => {
                let lr = T::of(cfg.lr());
                let mut total = T::zero();
                let mut target = vec![T::zero(); width];
                for sample in batch {
                    let map = &maps[sample.map as usize];
                    self.target_for(&mut scratch, map, sample, &mut target);
                    let head = self.head;
                    let Backend::Tabular(tab) = &mut self.backend else { unreachable!() };
                    let tr = &sample.transition;
                    let r = tab.online.get_or_init(entry_key(map, tr.state, tr.goal, tr.action));
                    match head {
                        ValueHead::Distributional => {
                            total = total + kl_loss(r, &target);
                            for (p, &t) in r.iter_mut().zip(&target) {
                                *p = (T::one() - lr) * *p + lr * t;
                            }
                            renormalize(r);
                        }
                        ValueHead::Scalar => {
                            let err = r[0] - target[0];
                            total = total + err * err;
                            r[0] = r[0] - lr * err;
                        }
                    }
                }
                total / T::of_usize(batch.len().max(1))
            }
            Backend::Mlp(_) => {
                for (sample, t) in batch.iter().zip(targets.chunks_exact_mut(width)) {
                    let map = &maps[sample.map as usize];
                    self.target_for(&mut scratch, map, sample, t);
                }
                let head = self.head;
                let Backend::Mlp(m) = &mut self.backend else { unreachable!() };
                let dim = m.net.input_dim();
                let mut inputs = vec![T::zero(); batch.len() * dim];
                for (sample, x) in batch.iter().zip(inputs.chunks_exact_mut(dim)) {
                    let map = &maps[sample.map as usize];
                    m.encoder.encode(map, sample.transition.state, sample.transition.goal, x);
                }
                m.grads.fill(T::zero());
                let loss = match head {
                    ValueHead::Distributional => {
                        let examples: Vec<(&[T], usize, &[T])> = batch
                            .iter()
                            .zip(inputs.chunks_exact(dim))
                            .zip(targets.chunks_exact(width))
                            .map(|((s, x), t)| (x, s.transition.action.index(), t))
                            .collect();
                        m.net.kl_loss_and_gradient(&examples, Action::COUNT, &mut scratch.ws, &mut m.grads)?
                    }
                    ValueHead::Scalar => {
                        let examples: Vec<(&[T], usize, T)> = batch
                            .iter()
                            .zip(inputs.chunks_exact(dim))
                            .zip(targets.iter())
                            .map(|((s, x), t)| (x, s.transition.action.index(), *t))
                            .collect();
                        m.net.squared_loss_and_gradient(&examples, &mut scratch.ws, &mut m.grads)?
                    }
                };
                m.opt.step(m.net.params_mut(), &m.grads);
                loss
            }
        };
        self.updates += 1;
        if self.updates % cfg.period() as u64 == 0 {
            self.update_target(T::of(cfg.tau()));
        }
        Ok(loss)
    }

    /// Soft update of the target parameters toward the online ones.
    pub fn update_target(&mut self, tau: T) {
        match &mut self.backend {
            Backend::Tabular(tab) => {
                if let Some(target) = &mut tab.target {
                    target.soft_update_from(&tab.online, tau);
                }
            }
            Backend::Mlp(m) => m.target.soft_update_from(&m.net, tau),
        }
    }

    /// One synchronous exhaustive Bellman sweep over every `(s, g, a)` of a
    /// noiseless map (tabular backend only), mixing each entry toward its
    /// target at `rate`. Returns the largest absolute change of any entry.
    pub fn value_iteration_sweep(&mut self, map: &GridMap, episode: &EpisodeConfig, rate: T) -> Result<T> {
        let Backend::Tabular(tab) = &self.backend else {
            return Err(Error::Config("value iteration needs the tabular backend".into()));
        };
        if !tab.fits(map) {
            return Err(Error::Config("map does not match the tabular estimator".into()));
        }
        let width = self.head.width(self.num_bins);
        let free = map.free_cells();
        let mut scratch = Scratch::default();
        let mut updates: Vec<(u64, Vec<T>)> = Vec::with_capacity(free.len() * free.len() * Action::COUNT);
        let mut target = vec![T::zero(); width];
        for &g in free {
            for &s in free {
                for a in Action::ALL {
                    let next = a.apply(map, s).unwrap_or(s);
                    let tr = crate::gridworld::Transition {
                        state: s,
                        action: a,
                        next_state: next,
                        goal: g,
                        reward: -1.0,
                        done: episode.reached(map, next, g),
                        timeout: false,
                    };
                    let sample = Sample { map: 0, transition: tr, at_goal: episode.reached(map, s, g), remaining: 0 };
                    self.target_for(&mut scratch, map, &sample, &mut target);
                    updates.push((entry_key(map, s, g, a), target.clone()));
                }
            }
        }
        let Backend::Tabular(tab) = &mut self.backend else { unreachable!() };
        let mut max_change = T::zero();
        for (key, target_row) in updates {
            let row = tab.online.get_or_init(key);
            for (p, t) in row.iter_mut().zip(target_row) {
                let new = (T::one() - rate) * *p + rate * t;
                max_change = max_change.max((new - *p).abs());
                *p = new;
            }
            if self.head == ValueHead::Distributional {
                renormalize(row);
            }
        }
        self.updates += 1;
        if let Some(t) = &mut tab.target {
            *t = tab.online.clone();
        }
        Ok(max_change)
    }

    pub fn mlp(&self) -> Option<&Mlp<T>> {
        match &self.backend {
            Backend::Mlp(m) => Some(&m.net),
            Backend::Tabular(_) => None,
        }
    }

    /// Flat view of the online parameters, for diagnostics.
    pub fn flat_params(&self) -> Vec<T> {
        match &self.backend {
            Backend::Mlp(m) => m.net.params().to_vec(),
            Backend::Tabular(tab) => {
                let mut out = Vec::new();
                for k in tab.online.sorted_keys() {
                    out.extend_from_slice(tab.online.get(k).unwrap());
                }
                out
            }
        }
    }
}

enum RowsRef<'a, T> {
    /// Per-action table entries; a missing entry reads as all `init`.
    Table([Option<&'a [T]>; 4], T),
    Logits(&'a [T]),
}

fn clip<T: Scalar>(v: T, n: usize) -> T {
    v.max(T::zero()).min(T::of_usize(n))
}

/// Index of the smallest entry, lowest index on ties.
pub fn argmin_action<T: Scalar>(d: &[T; 4]) -> Action {
    let mut best = 0;
    for a in 1..4 {
        if d[a] < d[best] {
            best = a;
        }
    }
    Action::ALL[best]
}

/// Uniform choice among the actions tied for the smallest entry.
pub fn argmin_action_random_ties<T: Scalar, R: Rng + ?Sized>(d: &[T; 4], rng: &mut R) -> Action {
    let best = d.iter().copied().fold(T::infinity(), T::min);
    let tied: Vec<usize> = (0..4).filter(|&a| d[a] == best).collect();
    match tied.len() {
        0 => Action::ALL[0],
        1 => Action::ALL[tied[0]],
        n => Action::ALL[tied[rng.gen_range(0..n)]],
    }
}

/// With probability `epsilon` a uniformly random action (which may coincide
/// with the greedy one), otherwise `greedy`.
pub fn epsilon_greedy<R: Rng + ?Sized>(greedy: Action, epsilon: f64, rng: &mut R) -> Action {
    if epsilon > 0.0 && rng.gen_bool(epsilon) {
        Action::random(rng)
    } else {
        greedy
    }
}
