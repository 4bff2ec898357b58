use serde::Serialize;

use crate::error::Result;
use crate::game::{GameSpec, MStarMode, Profile, WeightField};
use crate::oracles::{
    verify_delta_symmetry, verify_global_identity, verify_graph_containment, verify_potential_with,
    EnumeratedGame, IdentityReport,
};

use super::config::ExperimentConfig;

/// Tolerance of the identity suite.
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct IdentityOutcome {
    #[serde(flatten)]
    pub report: IdentityReport,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub profiles: usize,
    pub tolerance: f64,
    pub negative_control: bool,
    pub identities: Vec<IdentityOutcome>,
    pub pass: bool,
}

/// Runs the identity suite on the configured game. In negative-control
/// mode the utilities of the second half of the profiles are evaluated with
/// a corrupted weight field while the potential keeps the true one, so the
/// potential identity must fail.
pub fn verify(config: &ExperimentConfig, negative_control: bool) -> Result<VerifyReport> {
    let spec = config.game_spec()?;
    verify_spec(&spec, config.caps.oracle, negative_control)
}

pub fn verify_spec(spec: &GameSpec, cap: u128, negative_control: bool) -> Result<VerifyReport> {
    let g = EnumeratedGame::new(spec, cap)?;
    let potential = if negative_control {
        let mut w = spec.weights().values().to_vec();
        let hot = (0..w.len()).max_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap_or(0);
        w[hot] += 1.0;
        let corrupted = spec.with_weights(WeightField::new(spec.world(), w)?)?;
        let half = g.len() / 2;
        let e = g.enumeration;
        verify_potential_with(
            &g,
            |k, i| {
                if k < half {
                    g.utility(k, i)
                } else {
                    corrupted.utility(&e.profile(k), i)
                }
            },
            |k| g.potential(k),
        )
    } else {
        verify_potential_with(&g, |k, i| g.utility(k, i), |k| g.potential(k))
    };
    let identities: Vec<IdentityOutcome> = [
        potential,
        verify_global_identity(&g),
        verify_delta_symmetry(&g),
        verify_graph_containment(&g),
    ]
    .into_iter()
    .map(|report| IdentityOutcome {
        pass: report.passes(IDENTITY_TOL),
        report,
    })
    .collect();
    Ok(VerifyReport {
        profiles: g.len(),
        tolerance: IDENTITY_TOL,
        negative_control,
        pass: identities.iter().all(|o| o.pass),
        identities,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub profiles: usize,
    pub nash: Vec<Profile>,
    pub optima: Vec<Profile>,
    pub max_global_objective: f64,
    pub m_star_exact: Option<f64>,
    pub m_star_bound: f64,
    pub warnings: Vec<String>,
}

/// Nash set, global optima and `m*` of the configured game.
pub fn oracle(config: &ExperimentConfig) -> Result<OracleReport> {
    let spec = config.game_spec()?;
    let g = EnumeratedGame::new(&spec, config.caps.oracle)?;
    let e = g.enumeration;
    let mut warnings = config.boundary_warnings()?;
    let m_star_exact = match spec.m_star(MStarMode::Exact, config.caps.m_star) {
        Ok(m) => Some(m),
        Err(err) => {
            warnings.push(format!("exact m* skipped: {err}"));
            None
        }
    };
    Ok(OracleReport {
        profiles: g.len(),
        nash: g.nash_indices().into_iter().map(|k| e.profile(k)).collect(),
        optima: g.optimum_indices().into_iter().map(|k| e.profile(k)).collect(),
        max_global_objective: g.max_global_objective(),
        m_star_exact,
        m_star_bound: spec.m_star_bound(),
        warnings,
    })
}
