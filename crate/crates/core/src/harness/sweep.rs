use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::eval::{load_trained, worker_pool, EvalContext};
use super::records::{write_csv, EvalRecord, Method};
use super::train::train;
use crate::ensemble::{Aggregation, ValueEnsemble};
use crate::error::{Error, Result};
use crate::gridworld::{GridMap, State};
use crate::roadmap::{BufferSource, Roadmap, SearchBuffer};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    BufferSize,
    Maxdist,
    Ensemble,
    Aggregation,
    Distributional,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "buffer_size" => Axis::BufferSize,
            "maxdist" => Axis::Maxdist,
            "ensemble" => Axis::Ensemble,
            "aggregation" => Axis::Aggregation,
            "distributional" => Axis::Distributional,
            _ => return Err(Error::UnknownAxis(s.to_string())),
        })
    }
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::BufferSize => "buffer_size",
            Axis::Maxdist => "maxdist",
            Axis::Ensemble => "ensemble",
            Axis::Aggregation => "aggregation",
            Axis::Distributional => "distributional",
        }
    }

    pub fn default_values(self) -> Vec<String> {
        let v: &[&str] = match self {
            Axis::BufferSize => &["50", "100", "250", "500", "1000"],
            Axis::Maxdist => &["1", "2", "3", "5", "8"],
            Axis::Ensemble => &["1", "3"],
            Axis::Aggregation => &["max", "mean"],
            Axis::Distributional => &["on", "off"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Whether a setting changes the learned parameters.
    pub fn needs_retraining(self) -> bool {
        matches!(self, Axis::Ensemble | Axis::Distributional)
    }
}

/// One parsed axis value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Setting {
    BufferSize(usize),
    Maxdist(f64),
    Ensemble(usize),
    Aggregation(Aggregation),
    Distributional(bool),
}

pub fn parse_setting(axis: Axis, value: &str) -> Result<Setting> {
    let bad = || Error::Config(format!("invalid {} value `{value}`", axis.name()));
    Ok(match axis {
        Axis::BufferSize => Setting::BufferSize(value.parse().map_err(|_| bad())?),
        Axis::Maxdist => Setting::Maxdist(value.parse().ok().filter(|v: &f64| *v > 0.0).ok_or_else(bad)?),
        Axis::Ensemble => Setting::Ensemble(value.parse().ok().filter(|k| *k > 0).ok_or_else(bad)?),
        Axis::Aggregation => Setting::Aggregation(match value {
            "max" => Aggregation::Max,
            "mean" => Aggregation::Mean,
            _ => return Err(bad()),
        }),
        Axis::Distributional => Setting::Distributional(match value {
            "on" => true,
            "off" => false,
            _ => return Err(bad()),
        }),
    })
}

impl Setting {
    /// `cfg` with this setting applied.
    pub fn apply(self, cfg: &RunConfig) -> RunConfig {
        let mut c = cfg.clone();
        match self {
            Setting::BufferSize(k) => c.buffer_size = k,
            Setting::Maxdist(d) => c.maxdist = d,
            Setting::Ensemble(k) => c.ensemble.size = k,
            Setting::Aggregation(a) => c.ensemble.aggregation = a,
            Setting::Distributional(on) => c.train.distributional = on,
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub axis: Axis,
    pub setting: String,
    pub method: Method,
    pub seed: u64,
    pub distance: u32,
    pub success_rate: f64,
    pub mean_steps: Option<f64>,
}

impl SweepRecord {
    fn from_eval(axis: Axis, setting: &str, r: EvalRecord) -> Self {
        Self {
            axis,
            setting: setting.to_string(),
            method: r.method,
            seed: r.seed,
            distance: r.distance,
            success_rate: r.success_rate,
            mean_steps: r.mean_steps,
        }
    }
}

/// A trained ensemble and its stored search states.
pub struct Trained<T> {
    pub seed: u64,
    pub ensemble: ValueEnsemble<T>,
    pub search_states: Vec<State>,
}

fn eval_settings<T: Scalar>(
    cfg: &RunConfig,
    map: &GridMap,
    axis: Axis,
    values: &[String],
    run: &Trained<T>,
    methods: &[Method],
) -> Result<Vec<SweepRecord>> {
    let settings: Vec<Setting> = values.iter().map(|v| parse_setting(axis, v)).collect::<Result<_>>()?;
    let mut ens = run.ensemble.clone();
    let largest = match axis {
        Axis::BufferSize => settings.iter().map(|s| if let Setting::BufferSize(k) = s { *k } else { 0 }).max().unwrap_or(0),
        _ => cfg.buffer_size,
    };
    if largest > run.search_states.len() {
        log::warn!("buffer of {largest} requested but only {} states stored", run.search_states.len());
    }
    let nodes = SearchBuffer::from_states(run.search_states.iter().copied().take(largest), BufferSource::TrainingSubsample);
    let mut base = Roadmap::build(nodes.clone(), &ens, map, T::of(cfg.maxdist));
    let mut out = Vec::new();
    for (value, setting) in values.iter().zip(settings) {
        let c = setting.apply(cfg);
        let roadmap = match setting {
            Setting::BufferSize(k) => base.truncated(k),
            Setting::Maxdist(d) => base.with_maxdist(T::of(d)),
            Setting::Aggregation(a) => {
                ens.set_aggregation(a);
                base = Roadmap::build(nodes.clone(), &ens, map, T::of(cfg.maxdist));
                base.clone()
            }
            _ => base.clone(),
        };
        let ctx = EvalContext {
            map,
            episode: &c.episode,
            ensemble: &ens,
            roadmap: &roadmap,
            horizon: c.horizon,
            replan_every_step: c.replan_every_step,
        };
        let recs = ctx.evaluate(run.seed, &c.eval_distances, c.trials_per_distance, methods);
        out.extend(recs.into_iter().map(|r| SweepRecord::from_eval(axis, value, r)));
    }
    Ok(out)
}

/// Re-evaluates already trained runs across settings of a non-training axis
/// (buffer size, maxdist, aggregation). Raw edges are computed once per run.
pub fn sweep_reeval<T: Scalar>(cfg: &RunConfig, map: &GridMap, axis: Axis, values: &[String], runs: &[Trained<T>]) -> Result<Vec<SweepRecord>> {
    if axis.needs_retraining() {
        return Err(Error::Config(format!("axis {} needs retraining", axis.name())));
    }
    let mut out = Vec::new();
    for run in runs {
        out.extend(eval_settings(cfg, map, axis, values, run, &[Method::Sorb])?);
    }
    Ok(out)
}

/// Trains one run per (setting, seed) and evaluates it.
pub fn sweep_retrain<T: Scalar>(cfg: &RunConfig, map: &GridMap, axis: Axis, values: &[String]) -> Result<Vec<SweepRecord>> {
    let mut out = Vec::new();
    for value in values {
        let c = parse_setting(axis, value)?.apply(cfg);
        for &seed in &c.seeds {
            let o = train::<T>(&c, std::slice::from_ref(map), seed, None)?;
            let run = Trained { seed, ensemble: o.ensemble, search_states: o.search_states };
            let recs = eval_settings(&c, map, Axis::BufferSize, &[c.buffer_size.to_string()], &run, &[Method::Sorb])?;
            out.extend(recs.into_iter().map(|r| SweepRecord { axis, setting: value.clone(), ..r }));
        }
    }
    Ok(out)
}

/// `cmd_sweep`: one CSV row per (setting, seed, distance) in
/// `output_dir/sweep_<axis>.csv`.
pub fn cmd_sweep<T: Scalar>(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<Vec<SweepRecord>> {
    let axis_name = cfg.sweep.axis.as_deref().ok_or_else(|| Error::Config("sweep.axis is not set".into()))?;
    let axis: Axis = axis_name.parse()?;
    let values = cfg.sweep.values.clone().unwrap_or_else(|| axis.default_values());
    for v in &values {
        parse_setting(axis, v)?;
    }
    let map = cfg.load_map()?;
    let pool = worker_pool()?;
    let records = pool.install(|| -> Result<Vec<SweepRecord>> {
        if axis.needs_retraining() {
            return sweep_retrain::<T>(cfg, &map, axis, &values);
        }
        let mut runs = Vec::new();
        for &seed in &cfg.seeds {
            let (ensemble, search_states) = load_trained::<T>(cfg, checkpoint, seed, &map)?;
            runs.push(Trained { seed, ensemble, search_states });
        }
        sweep_reeval(cfg, &map, axis, &values, &runs)
    })?;
    fs::create_dir_all(&cfg.output_dir)?;
    write_csv(&cfg.output_dir.join(format!("sweep_{}.csv", axis.name())), &records)?;
    Ok(records)
}
