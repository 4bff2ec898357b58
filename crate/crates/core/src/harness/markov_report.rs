use serde::Serialize;

use crate::error::Result;
use crate::markov::{
    dhacl_resistances, dhscl_resistances, stability_support, unperturbed_report, Chain, ChainKind,
    ResistanceRow, SolverOptions, StabilityReport, UnperturbedReport,
};
use crate::oracles::EnumeratedGame;

use super::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize)]
pub struct MarkovReport {
    pub chain: &'static str,
    pub states: usize,
    /// Exponents `m_i` used for the asynchronous chain.
    pub m: Option<Vec<f64>>,
    pub unperturbed: UnperturbedReport,
    pub stability: StabilityReport,
    pub resistance_epsilons: Vec<f64>,
    pub resistances: Vec<ResistanceRow>,
    /// Largest `|fitted − predicted|` over the resistance table.
    pub max_resistance_error: f64,
}

/// `m_i` for the chain analysis: the configured values, else the midpoint
/// `(K + 2) m* / 2` of the admissible interval for every agent.
pub fn analysis_exponents(config: &ExperimentConfig, m_star: f64) -> Vec<f64> {
    match &config.schedule.m {
        Some(m) => m.clone(),
        None => {
            let k = config.schedule.k.unwrap_or(4.0);
            vec![0.5 * (k + 2.0) * m_star; config.game.n_agents]
        }
    }
}

/// Stationary masses over the configured ladder, the unperturbed recurrent
/// classes and a resistance table for the constant-rate counterpart of the
/// configured learner.
///
/// The resistance table covers every transition out of `(s*, s*)` for the
/// first optimum `s*`, and out of `(s*, s¹)` for every unilateral feasible
/// deviation `s¹` of `s*` (asynchronous) or every joint one (synchronous).
pub fn analyze_markov(config: &ExperimentConfig) -> Result<MarkovReport> {
    let spec = config.game_spec()?;
    let game = EnumeratedGame::new(&spec, config.caps.oracle)?;
    let opts = SolverOptions {
        dense_max: config.caps.dense,
        ..SolverOptions::default()
    };
    let chain = if config.algorithm.is_async() {
        let m_star = config.m_star(&spec)?;
        Chain::asynchronous(&game, analysis_exponents(config, m_star), config.caps.states)?
    } else {
        Chain::synchronous(&game, config.caps.states)?
    };
    let unperturbed = unperturbed_report(&chain)?;
    let stability = stability_support(&chain, &config.markov.epsilons, &opts)?;
    let ladder = config.markov.resistance_epsilons.clone();
    let s_star = game.optimum_indices()[0];
    let mut resistances = Vec::new();
    let from: Vec<usize> = (0..chain.space.len())
        .filter(|&k| chain.space.state(k).0 == s_star)
        .collect();
    if !ladder.is_empty() {
        for k in from {
            let rows = match chain.kind() {
                ChainKind::Synchronous => dhscl_resistances(&chain, k, &ladder)?,
                ChainKind::Asynchronous => dhacl_resistances(&chain, k, &ladder)?,
            };
            resistances.extend(rows);
        }
    }
    let max_resistance_error = resistances.iter().map(ResistanceRow::error).fold(0.0, f64::max);
    Ok(MarkovReport {
        chain: stability.chain,
        states: chain.space.len(),
        m: chain.m.clone(),
        unperturbed,
        stability,
        resistance_epsilons: ladder,
        resistances,
        max_resistance_error,
    })
}
