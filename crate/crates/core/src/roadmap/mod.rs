//! Roadmap graphs over buffered states and amortized shortest-path queries.

mod floyd;
mod graph;

pub use floyd::{floyd_warshall, DistanceMatrix, Successors};
pub use graph::{BufferSource, PlannedPath, Roadmap, SearchBuffer};
