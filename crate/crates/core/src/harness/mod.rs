//! Experiment orchestration: training runs, evaluation curves, ablation
//! sweeps, generalization studies and distance calibration, with CSV and
//! SVG output.

mod config;
mod distcheck;
mod eval;
mod generalize;
mod records;
mod sweep;
mod train;

pub use config::{GeneralizeConfig, RunConfig, SweepConfig};
pub use distcheck::{calibration, cmd_distcheck, diameter, spearman, CalibrationRow};
pub use eval::{checkpoint_paths, cmd_eval, load_trained, sample_pairs, summarize, worker_pool, EvalContext, MAX_FAILED_STARTS};
pub use generalize::{cmd_generalize, evaluate_held_out, train_multi, GeneralizeRecord};
pub use records::{mean_success, read_csv, success_svg, write_csv, EvalRecord, Method};
pub use sweep::{cmd_sweep, parse_setting, sweep_reeval, sweep_retrain, Axis, Setting, SweepRecord, Trained};
pub use train::{
    cmd_train, moving_average, probe_success, read_states_csv, save_outcome, train, write_states_csv, LossRow, ProbeRow,
    TrainOutcome, STORED_BUFFER_MIN,
};
