//! Road networks and traffic demand: generation, validation, text I/O.

mod demand;
pub mod fixtures;
mod generate;
pub mod geometry;
mod io;
mod network;

pub use demand::{block_weights, generate_demand, RouteTable, Trip, TripTable, DEMAND_BLOCK_SECONDS};
pub use generate::{generate_network, synthesize_program, GenerationParams, DEFAULT_SPEED_LIMIT};
pub use io::{
    load_network, load_trips, network_from_str, network_to_string, save_network, save_trips, trips_from_str,
    trips_to_string,
};
pub use network::*;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invariant `{invariant}` violated: {detail}")]
    Validation { invariant: String, detail: String },
    #[error("no routable pairs: the network has no route of at least two lanes")]
    NoRoutablePairs,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
