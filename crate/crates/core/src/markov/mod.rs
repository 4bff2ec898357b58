//! Exact analysis of the constant-rate learners as Markov chains over pairs
//! of consecutive profiles.

mod analysis;
mod build;
mod ergodicity;
mod matrix;
mod space;
mod stationary;

pub use analysis::*;
pub use build::{
    build_dhacl_matrix, build_dhscl_matrix, dhacl_rates, dhscl_agent_prob, dhscl_selected,
    DhaclRates,
};
pub use ergodicity::{ergodicity_coefficient, ergodicity_coefficient_dense};
pub use matrix::{dense_mul, TransitionMatrix};
pub use space::{ChainKind, PairStateSpace, DEFAULT_STATE_CAP};
pub use stationary::{
    check_structure, gth_dense, is_irreducible, period, residual, stationary_distribution,
    stationary_distribution_blocked, stationary_power, SolverMethod, SolverOptions, Stationary,
    StructureReport, DEFAULT_DENSE_MAX,
};
