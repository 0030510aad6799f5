//! Occupancy-grid navigation environments with goal-conditioned episodes.

mod env;
mod map;
pub mod oracle;

pub use env::{random_walk_states, reset, step, Action, EpisodeConfig, State, Transition};
pub use map::{builtin_map, random_maze, GridMap, MapName};
pub use oracle::{bfs_distances, oracle_distance, DistanceTable};
