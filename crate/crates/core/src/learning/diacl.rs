use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{AgentAction, GameSpec, Profile};

use super::{uniform_profile, Audit};

/// Relative slack used for `m_i` when `K = 2` leaves `(2m*, Km*]` empty.
pub const DEGENERATE_M_SLACK: f64 = 1e-6;

/// Memory of one asynchronous learner.
///
/// `curr_action` is the action chosen at the agent's last activation and
/// `baseline_action` the one chosen at the activation before that (the
/// initial action until two activations have happened). The adjusted
/// utilities are `u_i − Δ_i` values for the two, computed at the last
/// activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DiaclAgentState {
    pub curr_action: AgentAction,
    pub baseline_action: AgentAction,
    pub curr_adjusted_utility: f64,
    pub baseline_adjusted_utility: f64,
    pub m: f64,
    pub activation_count: u64,
    /// Joint profile right after the last activation, `s(γ_i(t)+1)`.
    snapshot: Profile,
    /// `u_i(snapshot)`.
    snapshot_utility: f64,
}

impl DiaclAgentState {
    /// `ρ_i(baseline, current)` from the stored adjusted utilities.
    pub fn rho(&self) -> f64 {
        self.curr_adjusted_utility - self.baseline_adjusted_utility
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiaclState {
    pub profile: Profile,
    pub agents: Vec<DiaclAgentState>,
}

/// Per-agent experiment exponents.
#[derive(Debug, Clone, PartialEq)]
pub enum MChoice {
    /// `m_i` drawn uniformly from `(2m*, Km*]` (after the initial profile).
    Random { k: f64 },
    Explicit(Vec<f64>),
}

/// Checks `m_i ∈ (2m*, Km*]`.
pub fn check_m(m: f64, k: f64, m_star: f64) -> Result<()> {
    if m > 2.0 * m_star && m <= k * m_star * (1.0 + DEGENERATE_M_SLACK) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "m_i = {m} outside (2m*, Km*] = ({}, {}]",
            2.0 * m_star,
            k * m_star
        )))
    }
}

/// Uniform placement and controls, then `m_i` per agent. The baseline of
/// every agent starts at its initial action.
pub fn diacl_init<R: Rng>(
    spec: &GameSpec,
    rng: &mut R,
    k: f64,
    m_star: f64,
    m_choice: &MChoice,
) -> Result<DiaclState> {
    if !(k >= 2.0) {
        return Err(Error::Domain(format!("K must be >= 2, got {k}")));
    }
    if !(m_star > 0.0) {
        return Err(Error::Domain(format!("m* must be > 0, got {m_star}")));
    }
    let profile = uniform_profile(spec, rng);
    let n = spec.n_agents();
    let ms: Vec<f64> = match m_choice {
        MChoice::Random { .. } if k == 2.0 => vec![2.0 * m_star * (1.0 + DEGENERATE_M_SLACK); n],
        MChoice::Random { .. } => (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                // 1 − u ∈ (0, 1] keeps the left end open
                2.0 * m_star + (k - 2.0) * m_star * (1.0 - u)
            })
            .collect(),
        MChoice::Explicit(v) => {
            if v.len() != n {
                return Err(Error::Domain(format!(
                    "expected {n} explicit m_i values, got {}",
                    v.len()
                )));
            }
            v.iter().try_for_each(|&m| check_m(m, k, m_star))?;
            v.clone()
        }
    };
    let utils = spec.utilities(&profile);
    let agents = (0..n)
        .map(|i| DiaclAgentState {
            curr_action: profile[i],
            baseline_action: profile[i],
            curr_adjusted_utility: utils[i],
            baseline_adjusted_utility: utils[i],
            m: ms[i],
            activation_count: 0,
            snapshot: profile.clone(),
            snapshot_utility: utils[i],
        })
        .collect();
    Ok(DiaclState { profile, agents })
}

/// `P(revert to baseline)` in the two-point rule, `ε^ρ / (1 + ε^ρ)`,
/// evaluated without overflow.
pub fn revert_probability(epsilon: f64, rho: f64) -> f64 {
    if rho >= 0.0 {
        let e = epsilon.powf(rho);
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + epsilon.powf(-rho))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiaclEvent {
    pub active: usize,
    pub experimented: bool,
}

/// One asynchronous update at rate `epsilon`.
///
/// RNG order: active agent, experiment coin, then either one index draw or
/// one two-point coin.
pub fn diacl_step<R: Rng>(
    spec: &GameSpec,
    epsilon: f64,
    state: &mut DiaclState,
    rng: &mut R,
    audit: &mut Audit,
) -> Result<DiaclEvent> {
    let n = spec.n_agents();
    let i = rng.gen_range(0..n);
    let agent = &state.agents[i];
    let explore = rng.gen::<f64>() < epsilon.powf(agent.m);
    let chosen = if explore {
        let pos = agent.curr_action.position;
        let candidates: Vec<AgentAction> = spec
            .feasible_actions(pos)?
            .into_iter()
            .filter(|a| *a != agent.curr_action && *a != agent.baseline_action)
            .collect();
        if candidates.is_empty() {
            return Err(Error::Config(format!(
                "no experiment candidates at {pos}: |F_i| must be at least 3"
            )));
        }
        candidates[rng.gen_range(0..candidates.len())]
    } else if rng.gen::<f64>() < revert_probability(epsilon, agent.rho()) {
        agent.baseline_action
    } else {
        agent.curr_action
    };

    let profile = state.profile.with(i, chosen);
    let u_new = audit.utility(spec, &profile, i);
    let agent = &mut state.agents[i];
    let dq = spec.deviation_with_utilities(&agent.snapshot, &profile, i, agent.snapshot_utility, u_new);
    agent.baseline_action = agent.curr_action;
    agent.curr_action = chosen;
    agent.curr_adjusted_utility = u_new - dq.delta_10;
    agent.baseline_adjusted_utility = agent.snapshot_utility - dq.delta_01;
    agent.snapshot = profile.clone();
    agent.snapshot_utility = u_new;
    agent.activation_count += 1;
    state.profile = profile;
    Ok(DiaclEvent {
        active: i,
        experimented: explore,
    })
}
