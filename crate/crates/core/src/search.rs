//! Waypoint-following controller and evaluation rollouts.

use std::path::Path;

use rand::Rng;

use crate::distval::Scratch;
use crate::ensemble::ValueEnsemble;
use crate::error::Result;
use crate::gridworld::{step, Action, EpisodeConfig, GridMap, State};
use crate::roadmap::Roadmap;
use crate::Scalar;

/// One controller step with the quantities that chose it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision<T> {
    pub action: Action,
    /// The state the low-level policy was conditioned on.
    pub target: State,
    pub conditioned_on_goal: bool,
    /// Aggregated distance to the first waypoint; `None` without a plan.
    pub d_s_w1: Option<T>,
    pub d_s_g: T,
}

/// Anything that maps `(s, g)` to an action, possibly with per-episode state.
pub trait Controller<T> {
    /// Clears per-episode state.
    fn reset(&mut self) {}

    fn decide(&mut self, map: &GridMap, s: State, g: State, rng: &mut dyn rand::RngCore) -> Decision<T>;
}

/// Plain goal-conditioned ensemble policy.
pub struct GreedyController<'a, T> {
    ensemble: &'a ValueEnsemble<T>,
    scratch: Scratch<T>,
}

impl<'a, T: Scalar> GreedyController<'a, T> {
    pub fn new(ensemble: &'a ValueEnsemble<T>) -> Self {
        Self { ensemble, scratch: Scratch::default() }
    }
}

impl<T: Scalar> Controller<T> for GreedyController<'_, T> {
    fn decide(&mut self, map: &GridMap, s: State, g: State, _rng: &mut dyn rand::RngCore) -> Decision<T> {
        Decision {
            action: self.ensemble.greedy_action_with(&mut self.scratch, map, s, g),
            target: g,
            conditioned_on_goal: true,
            d_s_w1: None,
            d_s_g: self.ensemble.aggregate_distance_with(&mut self.scratch, map, s, g),
        }
    }
}

/// Uniformly random actions.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomController;

impl<T: Scalar> Controller<T> for RandomController {
    fn decide(&mut self, _map: &GridMap, _s: State, g: State, rng: &mut dyn rand::RngCore) -> Decision<T> {
        Decision { action: Action::random(rng), target: g, conditioned_on_goal: true, d_s_w1: None, d_s_g: T::nan() }
    }
}

/// Plans over a roadmap and conditions the ensemble policy on the first
/// waypoint or on the goal.
pub struct SearchPolicy<'a, T> {
    roadmap: &'a Roadmap<T>,
    ensemble: &'a ValueEnsemble<T>,
    replan_every_step: bool,
    plan: Vec<State>,
    scratch: Scratch<T>,
}

impl<'a, T: Scalar> SearchPolicy<'a, T> {
    pub fn new(roadmap: &'a Roadmap<T>, ensemble: &'a ValueEnsemble<T>) -> Self {
        Self { roadmap, ensemble, replan_every_step: true, plan: Vec::new(), scratch: Scratch::default() }
    }

    /// Sticky mode plans once and advances through waypoints on arrival,
    /// replanning only when the plan is exhausted.
    pub fn sticky(mut self) -> Self {
        self.replan_every_step = false;
        self
    }

    pub fn maxdist(&self) -> T {
        self.roadmap.maxdist()
    }

    pub fn replans_every_step(&self) -> bool {
        self.replan_every_step
    }

    fn replan(&mut self, map: &GridMap, s: State, g: State) {
        self.plan = match self.roadmap.shortest_path_with(&mut self.scratch, self.ensemble, map, s, g) {
            Ok(p) => p.waypoints,
            Err(_) => Vec::new(),
        };
        self.plan.reverse();
    }

    fn first_waypoint(&mut self, s: State) -> Option<State> {
        // a waypoint equal to the current cell carries no direction
        while self.plan.last() == Some(&s) {
            self.plan.pop();
        }
        self.plan.last().copied()
    }
}

impl<T: Scalar> Controller<T> for SearchPolicy<'_, T> {
    fn reset(&mut self) {
        self.plan.clear();
    }

    fn decide(&mut self, map: &GridMap, s: State, g: State, _rng: &mut dyn rand::RngCore) -> Decision<T> {
        if self.replan_every_step || self.first_waypoint(s).is_none() {
            self.replan(map, s, g);
        }
        let ens = self.ensemble;
        let d_s_g = ens.aggregate_distance_with(&mut self.scratch, map, s, g);
        let w1 = self.first_waypoint(s);
        let d_s_w1 = w1.map(|w| ens.aggregate_distance_with(&mut self.scratch, map, s, w));
        let waypoint = match (w1, d_s_w1) {
            (Some(w), Some(dw)) if dw < d_s_g || d_s_g > self.roadmap.maxdist() => Some(w),
            _ => None,
        };
        let target = waypoint.unwrap_or(g);
        Decision {
            action: ens.greedy_action_with(&mut self.scratch, map, s, target),
            target,
            conditioned_on_goal: waypoint.is_none(),
            d_s_w1,
            d_s_g,
        }
    }
}

/// One row of a rollout trace: the state at time `t` and what the
/// controller was conditioned on there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceStep {
    pub t: usize,
    pub state: State,
    pub target: State,
    pub conditioned_on_goal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub success: bool,
    pub steps: usize,
    /// Visited states starting with `s0`; one longer than `decisions`.
    pub states: Vec<State>,
    pub decisions: Vec<TraceStep>,
}

/// Runs `controller` from `s0` until the goal is reached or `horizon`
/// steps elapse. Success requires reaching the goal within the horizon.
pub fn rollout<T, C, R>(
    controller: &mut C,
    map: &GridMap,
    cfg: &EpisodeConfig,
    s0: State,
    g: State,
    horizon: usize,
    rng: &mut R,
) -> Rollout
where
    T: Scalar,
    C: Controller<T> + ?Sized,
    R: Rng,
{
    controller.reset();
    let mut s = s0;
    let mut states = vec![s0];
    let mut decisions = Vec::new();
    if cfg.reached(map, s0, g) {
        return Rollout { success: true, steps: 0, states, decisions };
    }
    for t in 0..horizon {
        let d = controller.decide(map, s, g, rng);
        decisions.push(TraceStep { t, state: s, target: d.target, conditioned_on_goal: d.conditioned_on_goal });
        let tr = step(map, s, d.action, g, cfg, rng);
        s = tr.next_state;
        states.push(s);
        if tr.done {
            return Rollout { success: true, steps: t + 1, states, decisions };
        }
    }
    Rollout { success: false, steps: horizon, states, decisions }
}

impl Rollout {
    /// Writes `t,x,y,waypoint_x,waypoint_y,conditioned_on_goal`.
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "x", "y", "waypoint_x", "waypoint_y", "conditioned_on_goal"])?;
        for d in &self.decisions {
            w.write_record([
                d.t.to_string(),
                d.state.x.to_string(),
                d.state.y.to_string(),
                d.target.x.to_string(),
                d.target.y.to_string(),
                (d.conditioned_on_goal as u8).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
