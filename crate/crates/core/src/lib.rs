//! Coverage games for mobile visual sensor networks.
//!
//! Agents on a lattice choose a position and a camera control; each earns
//! an equal share of the value of every cell it sees, minus a cost equal to
//! its footprint area. The crate provides the game itself, four
//! payoff-based learning dynamics, brute-force oracles for equilibria and
//! optima, exact Markov-chain analysis of the constant-rate dynamics, and an
//! experiment harness.

pub mod error;
pub mod game;
pub mod geometry;
pub mod harness;
pub mod learning;
pub mod markov;
pub mod oracles;

pub use error::{Error, Result};
pub use game::{AgentAction, DeviationQuantities, GameSpec, MStarMode, Profile, WeightField};
pub use geometry::{CameraControl, CameraModel, CameraParams, Coord, Footprint, GridWorld};
pub use learning::{Algorithm, ExplorationSchedule};
pub use harness::{load_config, ExperimentConfig, MetricsSummary};
