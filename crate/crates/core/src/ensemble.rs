//! Independent ensembles of value estimators and their aggregated distances.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distval::{argmin_action, ReplayBuffer, Scratch, TrainConfig, ValueEstimator, Reader, Writer};
use crate::error::{Error, Result};
use crate::gridworld::{Action, GridMap, State};
use crate::{seed_mix, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Pessimistic: the largest member distance.
    Max,
    Mean,
}

impl Aggregation {
    pub fn tag(self) -> u8 {
        match self {
            Aggregation::Max => 0,
            Aggregation::Mean => 1,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Aggregation::Max),
            1 => Some(Aggregation::Mean),
            _ => None,
        }
    }

    pub fn reduce<T: Scalar>(self, values: &[T]) -> T {
        match self {
            Aggregation::Max => values.iter().copied().fold(T::neg_infinity(), T::max),
            Aggregation::Mean => values.iter().copied().sum::<T>() / T::of_usize(values.len()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub size: usize,
    pub aggregation: Aggregation,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { size: 3, aggregation: Aggregation::Max }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Config("ensemble size must be >= 1".into()));
        }
        Ok(())
    }
}

/// `K` estimators with no shared parameters. Each member owns the RNG that
/// draws its training batches, so members see different batches from the
/// same buffer.
#[derive(Clone, Debug)]
pub struct ValueEnsemble<T> {
    members: Vec<ValueEstimator<T>>,
    config: EnsembleConfig,
    batch_rngs: Vec<ChaCha8Rng>,
}

impl<T: Scalar> ValueEnsemble<T> {
    /// Members are initialized from seeds derived from `seed`.
    pub fn new(map: &GridMap, config: &EnsembleConfig, train: &TrainConfig, seed: u64) -> Result<Self> {
        let seeds: Vec<u64> = (0..config.size as u64).map(|i| seed_mix(seed, 0x5eed_0000 + i)).collect();
        Self::with_member_seeds(map, config, train, &seeds)
    }

    /// One seed per member, used for both initialization and batch sampling.
    pub fn with_member_seeds(map: &GridMap, config: &EnsembleConfig, train: &TrainConfig, seeds: &[u64]) -> Result<Self> {
        config.validate()?;
        if seeds.len() != config.size {
            return Err(Error::Config(format!("{} member seeds for ensemble of {}", seeds.len(), config.size)));
        }
        let mut members = Vec::with_capacity(seeds.len());
        let mut batch_rngs = Vec::with_capacity(seeds.len());
        for &s in seeds {
            let mut init = ChaCha8Rng::seed_from_u64(s);
            members.push(ValueEstimator::new(map, train, &mut init)?);
            batch_rngs.push(ChaCha8Rng::seed_from_u64(seed_mix(s, 1)));
        }
        Ok(Self { members, config: config.clone(), batch_rngs })
    }

    pub fn from_members(members: Vec<ValueEstimator<T>>, aggregation: Aggregation) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("ensemble needs at least one member".into()));
        }
        let config = EnsembleConfig { size: members.len(), aggregation };
        let batch_rngs = (0..members.len() as u64).map(|i| ChaCha8Rng::seed_from_u64(seed_mix(0, i))).collect();
        Ok(Self { members, config, batch_rngs })
    }

    pub fn members(&self) -> &[ValueEstimator<T>] {
        &self.members
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn num_bins(&self) -> usize {
        self.members[0].num_bins()
    }

    pub fn set_aggregation(&mut self, aggregation: Aggregation) {
        self.config.aggregation = aggregation;
    }

    /// A copy restricted to the first `k` members.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.clamp(1, self.members.len());
        Self {
            members: self.members[..k].to_vec(),
            config: EnsembleConfig { size: k, aggregation: self.config.aggregation },
            batch_rngs: self.batch_rngs[..k].to_vec(),
        }
    }

    /// One `train_step` per member, each on its own batch. Returns member losses.
    pub fn train_all(&mut self, buffer: &ReplayBuffer, maps: &[GridMap], cfg: &TrainConfig) -> Result<Vec<T>> {
        self.members
            .iter_mut()
            .zip(self.batch_rngs.iter_mut())
            .map(|(m, rng)| m.train_step(buffer, maps, cfg, rng))
            .collect()
    }

    pub fn member_distances_with(&self, scratch: &mut Scratch<T>, map: &GridMap, s: State, g: State) -> Vec<T> {
        self.members.iter().map(|m| m.distance_with(scratch, map, s, g)).collect()
    }

    pub fn aggregate_distance_with(&self, scratch: &mut Scratch<T>, map: &GridMap, s: State, g: State) -> T {
        let mut acc = match self.config.aggregation {
            Aggregation::Max => T::neg_infinity(),
            Aggregation::Mean => T::zero(),
        };
        for m in &self.members {
            let d = m.distance_with(scratch, map, s, g);
            acc = match self.config.aggregation {
                Aggregation::Max => acc.max(d),
                Aggregation::Mean => acc + d,
            };
        }
        match self.config.aggregation {
            Aggregation::Max => acc,
            Aggregation::Mean => acc / T::of_usize(self.members.len()),
        }
    }

    /// Per member, the expected distance of its best action; then max or mean.
    pub fn aggregate_distance(&self, map: &GridMap, s: State, g: State) -> T {
        self.aggregate_distance_with(&mut Scratch::default(), map, s, g)
    }

    /// Greedy action of the ensemble policy: the argmin of the member-averaged
    /// per-action distances. Equals the member's greedy action when `K = 1`.
    pub fn greedy_action_with(&self, scratch: &mut Scratch<T>, map: &GridMap, s: State, g: State) -> Action {
        if self.members.len() == 1 {
            return argmin_action(&self.members[0].action_distances_with(scratch, map, s, g, false));
        }
        let mut sum = [T::zero(); 4];
        for m in &self.members {
            let d = m.action_distances_with(scratch, map, s, g, false);
            for a in 0..4 {
                sum[a] = sum[a] + d[a];
            }
        }
        argmin_action(&sum)
    }

    /// Member-averaged per-action distances.
    pub fn mean_action_distances_with(&self, scratch: &mut Scratch<T>, map: &GridMap, s: State, g: State) -> [T; 4] {
        let mut sum = [T::zero(); 4];
        for m in &self.members {
            let d = m.action_distances_with(scratch, map, s, g, false);
            for a in 0..4 {
                sum[a] = sum[a] + d[a];
            }
        }
        let k = T::of_usize(self.members.len());
        sum.map(|v| v / k)
    }

    pub fn greedy_action(&self, map: &GridMap, s: State, g: State) -> Action {
        self.greedy_action_with(&mut Scratch::default(), map, s, g)
    }

    /// `magic "SORE" | u32 version | u32 K | u8 aggregation | K x (u64 len | member checkpoint)`.
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = Writer(out);
        w.bytes(ENSEMBLE_MAGIC)?;
        w.u32(crate::distval::VERSION)?;
        w.u32(self.members.len() as u32)?;
        w.u8(self.config.aggregation.tag())?;
        for m in &self.members {
            let bytes = m.to_bytes()?;
            w.u64(bytes.len() as u64)?;
            w.bytes(&bytes)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn read_from<R: Read>(input: R, learning_rate: f64) -> Result<Self> {
        let mut r = Reader(input);
        if &r.array::<4>()? != ENSEMBLE_MAGIC {
            return Err(Error::Checkpoint("bad ensemble magic".into()));
        }
        let version = r.u32()?;
        if version != crate::distval::VERSION {
            return Err(Error::Checkpoint(format!("unsupported ensemble version {version}")));
        }
        let k = r.u32()? as usize;
        if k == 0 || k > 1024 {
            return Err(Error::Checkpoint(format!("ensemble size {k}")));
        }
        let aggregation =
            Aggregation::from_tag(r.u8()?).ok_or_else(|| Error::Checkpoint("unknown aggregation tag".into()))?;
        let mut members = Vec::with_capacity(k);
        for _ in 0..k {
            let len = r.len(1 << 40, "member byte")?;
            let mut bytes = vec![0u8; len];
            r.0.read_exact(&mut bytes).map_err(|e| Error::Checkpoint(format!("truncated member: {e}")))?;
            members.push(ValueEstimator::from_bytes(&bytes, learning_rate)?);
        }
        Self::from_members(members, aggregation)
    }

    pub fn from_bytes(bytes: &[u8], learning_rate: f64) -> Result<Self> {
        Self::read_from(bytes, learning_rate)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path, learning_rate: f64) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file), learning_rate)
    }
}

pub const ENSEMBLE_MAGIC: &[u8; 4] = b"SORE";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distval::{BackendSpec, Encoder, ReplayBuffer, Sample};
    use crate::gridworld::{builtin_map, reset, step, EpisodeConfig};

    #[test]
    fn reduce_examples() {
        let v = [2.0f64, 3.0, 10.0];
        assert_eq!(Aggregation::Max.reduce(&v), 10.0);
        assert_eq!(Aggregation::Mean.reduce(&v), 5.0);
        assert_eq!(Aggregation::Mean.reduce(&[4.5f64]), 4.5);
        assert_eq!(Aggregation::Max.reduce(&[4.5f64]), 4.5);
    }

    fn buffer(map: &GridMap, n: usize, seed: u64) -> ReplayBuffer {
        let cfg = EpisodeConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut buf = ReplayBuffer::new(n);
        while buf.len() < n {
            let (mut s, g) = reset(map, &cfg, &mut rng);
            for _ in 0..20 {
                let t = step(map, s, Action::random(&mut rng), g, &cfg, &mut rng);
                buf.push(Sample::new(0, map, &cfg, t));
                s = t.next_state;
                if t.done {
                    break;
                }
            }
        }
        buf
    }

    fn mlp_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 16,
            learning_rate: Some(1e-3),
            backend: BackendSpec::Mlp { hidden: vec![16], encoder: Encoder::Coordinates },
            ..Default::default()
        }
    }

    #[test]
    fn single_member_matches_plain_estimator() {
        let m = builtin_map("four_rooms").unwrap();
        let cfg = mlp_cfg();
        let buf = buffer(&m, 500, 1);
        let ens_cfg = EnsembleConfig { size: 1, aggregation: Aggregation::Max };
        let mut ens = ValueEnsemble::<f64>::with_member_seeds(&m, &ens_cfg, &cfg, &[42]).unwrap();
        let mut solo = ValueEstimator::<f64>::new(&m, &cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(42, 1));
        for _ in 0..20 {
            let a = ens.train_all(&buf, std::slice::from_ref(&m), &cfg).unwrap();
            let b = solo.train_step(&buf, std::slice::from_ref(&m), &cfg, &mut rng).unwrap();
            assert_eq!(a, vec![b]);
        }
        let (s, g) = (State::new(2, 2), State::new(14, 3));
        assert_eq!(ens.aggregate_distance(&m, s, g), solo.distance(&m, s, g));
        assert_eq!(ens.greedy_action(&m, s, g), solo.greedy_action(&m, s, g));
    }

    #[test]
    fn identical_seeds_give_identical_members() {
        let m = builtin_map("four_rooms").unwrap();
        let cfg = mlp_cfg();
        let buf = buffer(&m, 300, 2);
        let ens_cfg = EnsembleConfig { size: 3, aggregation: Aggregation::Max };
        let mut ens = ValueEnsemble::<f64>::with_member_seeds(&m, &ens_cfg, &cfg, &[7, 7, 7]).unwrap();
        for _ in 0..10 {
            ens.train_all(&buf, std::slice::from_ref(&m), &cfg).unwrap();
        }
        let p0 = ens.members()[0].flat_params();
        assert!(ens.members().iter().all(|mem| mem.flat_params() == p0));
    }

    #[test]
    fn independent_members_differ() {
        let m = builtin_map("four_rooms").unwrap();
        let cfg = mlp_cfg();
        let ens = ValueEnsemble::<f64>::new(&m, &EnsembleConfig::default(), &cfg, 3).unwrap();
        assert_eq!(ens.len(), 3);
        assert_ne!(ens.members()[0].flat_params(), ens.members()[1].flat_params());
    }

    #[test]
    fn ensemble_checkpoint_round_trip() {
        let m = builtin_map("u_maze").unwrap();
        let ens = ValueEnsemble::<f32>::new(&m, &EnsembleConfig::default(), &mlp_cfg(), 5).unwrap();
        let bytes = ens.to_bytes().unwrap();
        let back = ValueEnsemble::<f32>::from_bytes(&bytes, 1e-3).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.config(), ens.config());
    }
}
