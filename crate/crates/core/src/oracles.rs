//! Exhaustive ground truth on enumerable instances.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{AgentAction, GameSpec, Profile};

/// Absolute tolerance for utility comparisons in NE and argmax tests.
pub const TIE_TOL: f64 = 1e-9;

/// Default limit on profile × deviation checks.
pub const DEFAULT_ORACLE_CAP: u128 = 1_000_000;

/// Iterates `A = Π_i (Q × C)` in canonical order (agent 0 most significant,
/// each agent's actions ordered by cell then control).
pub struct ProfileIter<'a> {
    enumeration: Enumeration<'a>,
    next: usize,
}

impl<'a> ProfileIter<'a> {
    pub fn new(spec: &'a GameSpec) -> Self {
        ProfileIter {
            enumeration: Enumeration::new(spec),
            next: 0,
        }
    }
}

impl Iterator for ProfileIter<'_> {
    type Item = Profile;
    fn next(&mut self) -> Option<Profile> {
        (self.next < self.enumeration.len()).then(|| {
            self.next += 1;
            self.enumeration.profile(self.next - 1)
        })
    }
}

/// Index arithmetic for the canonical profile enumeration.
#[derive(Debug, Clone, Copy)]
pub struct Enumeration<'a> {
    spec: &'a GameSpec,
    per_agent: usize,
    len: usize,
}

impl<'a> Enumeration<'a> {
    /// Panics if `|A|` does not fit in `usize`; callers check caps first.
    pub fn new(spec: &'a GameSpec) -> Self {
        let per_agent = spec.actions_per_agent();
        let len = usize::try_from(spec.profile_count()).expect("profile space fits in usize");
        Enumeration {
            spec,
            per_agent,
            len,
        }
    }

    pub fn spec(&self) -> &'a GameSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn action_index(&self, a: &AgentAction) -> usize {
        let cell = self.spec.world().index_of(a.position).expect("action inside the grid");
        cell * self.spec.n_controls() + a.ctrl
    }

    pub fn action(&self, k: usize) -> AgentAction {
        let nc = self.spec.n_controls();
        AgentAction::new(self.spec.world().coord(k / nc), k % nc)
    }

    pub fn index(&self, p: &Profile) -> usize {
        p.0.iter()
            .fold(0, |acc, a| acc * self.per_agent + self.action_index(a))
    }

    pub fn profile(&self, mut idx: usize) -> Profile {
        let n = self.spec.n_agents();
        let mut actions = vec![AgentAction::new(self.spec.world().coord(0), 0); n];
        for slot in actions.iter_mut().rev() {
            *slot = self.action(idx % self.per_agent);
            idx /= self.per_agent;
        }
        Profile(actions)
    }

    /// Index of the profile obtained by replacing agent `i`'s action.
    pub fn replace(&self, idx: usize, i: usize, action_index: usize) -> usize {
        let n = self.spec.n_agents();
        let stride = self.per_agent.pow((n - 1 - i) as u32);
        let current = (idx / stride) % self.per_agent;
        idx - current * stride + action_index * stride
    }

    pub fn agent_action_index(&self, idx: usize, i: usize) -> usize {
        let n = self.spec.n_agents();
        let stride = self.per_agent.pow((n - 1 - i) as u32);
        (idx / stride) % self.per_agent
    }
}

/// Every profile's utility vector and potential, computed once.
pub struct EnumeratedGame<'a> {
    pub enumeration: Enumeration<'a>,
    /// Row-major `[profile][agent]`.
    utilities: Vec<f64>,
    potentials: Vec<f64>,
    /// Feasible action indices per action index (canonical order).
    feasible: Vec<Vec<usize>>,
}

impl<'a> EnumeratedGame<'a> {
    /// Enumerates the game if `|A| × Σ_i max|F_i|` fits under `cap`.
    pub fn new(spec: &'a GameSpec, cap: u128) -> Result<Self> {
        let checks = deviation_checks(spec);
        if checks > cap {
            return Err(Error::capacity(
                "profile enumeration",
                checks,
                cap,
                "fall back to Monte-Carlo spot checks",
            ));
        }
        let enumeration = Enumeration::new(spec);
        let n = spec.n_agents();
        let rows: Vec<(Vec<f64>, f64)> = (0..enumeration.len())
            .into_par_iter()
            .map(|k| {
                let p = enumeration.profile(k);
                (spec.utilities(&p), spec.potential(&p))
            })
            .collect();
        let mut utilities = Vec::with_capacity(rows.len() * n);
        let mut potentials = Vec::with_capacity(rows.len());
        for (u, phi) in rows {
            utilities.extend(u);
            potentials.push(phi);
        }
        let feasible = (0..spec.actions_per_agent())
            .map(|k| {
                let a = enumeration.action(k);
                spec.feasible_actions(a.position)
                    .expect("action inside the grid")
                    .iter()
                    .map(|b| enumeration.action_index(b))
                    .collect()
            })
            .collect();
        Ok(EnumeratedGame {
            enumeration,
            utilities,
            potentials,
            feasible,
        })
    }

    pub fn spec(&self) -> &'a GameSpec {
        self.enumeration.spec()
    }

    pub fn len(&self) -> usize {
        self.enumeration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.enumeration.is_empty()
    }

    pub fn utility(&self, idx: usize, i: usize) -> f64 {
        self.utilities[idx * self.spec().n_agents() + i]
    }

    pub fn utilities(&self, idx: usize) -> &[f64] {
        let n = self.spec().n_agents();
        &self.utilities[idx * n..(idx + 1) * n]
    }

    pub fn potential(&self, idx: usize) -> f64 {
        self.potentials[idx]
    }

    pub fn global_objective(&self, idx: usize) -> f64 {
        self.utilities(idx).iter().sum()
    }

    /// Feasible action indices from the action with index `k`.
    pub fn feasible_from(&self, k: usize) -> &[usize] {
        &self.feasible[k]
    }

    /// Profiles reachable by a unilateral feasible move of agent `i`
    /// (including `idx` itself), in canonical order.
    pub fn unilateral(&self, idx: usize, i: usize) -> impl Iterator<Item = usize> + '_ {
        let k = self.enumeration.agent_action_index(idx, i);
        self.feasible[k]
            .iter()
            .map(move |&b| self.enumeration.replace(idx, i, b))
    }

    pub fn first_improvement(&self, idx: usize) -> Option<(usize, usize, f64)> {
        (0..self.spec().n_agents()).find_map(|i| {
            let base = self.utility(idx, i);
            self.unilateral(idx, i).find_map(|j| {
                let gain = self.utility(j, i) - base;
                (gain > TIE_TOL).then_some((i, j, gain))
            })
        })
    }

    pub fn is_nash(&self, idx: usize) -> bool {
        self.first_improvement(idx).is_none()
    }

    /// Indices of `E(Γ)` in enumeration order.
    pub fn nash_indices(&self) -> Vec<usize> {
        let flags: Vec<bool> = (0..self.len()).into_par_iter().map(|k| self.is_nash(k)).collect();
        flags
            .iter()
            .enumerate()
            .filter_map(|(k, &f)| f.then_some(k))
            .collect()
    }

    /// Indices of `S* = argmax U_g` in enumeration order.
    pub fn optimum_indices(&self) -> Vec<usize> {
        let best = (0..self.len())
            .map(|k| self.global_objective(k))
            .fold(f64::NEG_INFINITY, f64::max);
        (0..self.len())
            .filter(|&k| self.global_objective(k) >= best - TIE_TOL)
            .collect()
    }

    pub fn max_global_objective(&self) -> f64 {
        (0..self.len())
            .map(|k| self.global_objective(k))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn membership(&self, indices: &[usize]) -> Vec<bool> {
        let mut m = vec![false; self.len()];
        for &k in indices {
            m[k] = true;
        }
        m
    }
}

fn deviation_checks(spec: &GameSpec) -> u128 {
    spec.profile_count()
        .saturating_mul((spec.n_agents() * 5 * spec.n_controls()) as u128)
}

/// `E(Γ_cov)`: constrained pure Nash equilibria.
pub fn nash_set(spec: &GameSpec, cap: u128) -> Result<Vec<Profile>> {
    let g = EnumeratedGame::new(spec, cap)?;
    Ok(g.nash_indices()
        .into_iter()
        .map(|k| g.enumeration.profile(k))
        .collect())
}

/// `S*`: maximizers of `U_g` (ties within [`TIE_TOL`]).
pub fn global_optima(spec: &GameSpec, cap: u128) -> Result<Vec<Profile>> {
    let g = EnumeratedGame::new(spec, cap)?;
    Ok(g.optimum_indices()
        .into_iter()
        .map(|k| g.enumeration.profile(k))
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct NashCheck {
    pub is_nash: bool,
    /// `(agent, improving action, utility gain)` when not an equilibrium.
    pub witness: Option<(usize, AgentAction, f64)>,
}

/// Checks every feasible unilateral deviation of `profile`.
pub fn is_nash(spec: &GameSpec, profile: &Profile) -> Result<NashCheck> {
    spec.check_profile(profile)?;
    for i in 0..spec.n_agents() {
        let base = spec.utility(profile, i);
        for a in spec.feasible_actions(profile[i].position)? {
            let gain = spec.utility(&profile.with(i, a), i) - base;
            if gain > TIE_TOL {
                return Ok(NashCheck {
                    is_nash: false,
                    witness: Some((i, a, gain)),
                });
            }
        }
    }
    Ok(NashCheck {
        is_nash: true,
        witness: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub name: String,
    pub checks: usize,
    pub max_violation: f64,
    /// `(profile index, agent, deviated profile index)` of the worst case.
    pub worst: Option<(usize, usize, usize)>,
}

impl IdentityReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

/// Max over `(s, i, s_i')` of `|φ(s) − φ(s') − (u_i(s) − u_i(s'))|` with the
/// utility and potential supplied by the caller.
pub fn verify_potential_with<U, P>(g: &EnumeratedGame<'_>, utility: U, potential: P) -> IdentityReport
where
    U: Fn(usize, usize) -> f64 + Sync,
    P: Fn(usize) -> f64 + Sync,
{
    let n = g.spec().n_agents();
    let per_profile: Vec<(usize, f64, Option<(usize, usize, usize)>)> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let mut checks = 0;
            let mut worst = 0.0;
            let mut arg = None;
            for i in 0..n {
                for j in g.unilateral(k, i) {
                    checks += 1;
                    let v = ((potential(k) - potential(j)) - (utility(k, i) - utility(j, i))).abs();
                    if v > worst || arg.is_none() {
                        worst = v;
                        arg = Some((k, i, j));
                    }
                }
            }
            (checks, worst, arg)
        })
        .collect();
    fold_report("potential identity", per_profile)
}

fn fold_report(
    name: &str,
    parts: Vec<(usize, f64, Option<(usize, usize, usize)>)>,
) -> IdentityReport {
    let mut report = IdentityReport {
        name: name.to_string(),
        checks: 0,
        max_violation: 0.0,
        worst: None,
    };
    for (c, v, arg) in parts {
        report.checks += c;
        if arg.is_some() && (v > report.max_violation || report.worst.is_none()) {
            report.max_violation = v;
            report.worst = arg;
        }
    }
    report
}

/// Exhaustive check of the potential-game identity.
pub fn verify_potential_game(spec: &GameSpec, cap: u128) -> Result<IdentityReport> {
    let g = EnumeratedGame::new(spec, cap)?;
    Ok(verify_potential_with(&g, |k, i| g.utility(k, i), |k| g.potential(k)))
}

/// Max over unilateral feasible deviations of `|U_g(s¹) − U_g(s⁰) − ρ_i(s⁰, s¹)|`.
pub fn verify_global_identity(g: &EnumeratedGame<'_>) -> IdentityReport {
    let spec = g.spec();
    let n = spec.n_agents();
    let parts = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let s0 = g.enumeration.profile(k);
            let mut checks = 0;
            let mut worst = 0.0;
            let mut arg = None;
            for i in 0..n {
                for j in g.unilateral(k, i) {
                    checks += 1;
                    let s1 = g.enumeration.profile(j);
                    let dq = spec.deviation_with_utilities(&s0, &s1, i, g.utility(k, i), g.utility(j, i));
                    let v = (g.global_objective(j) - g.global_objective(k) - dq.rho).abs();
                    if v > worst || arg.is_none() {
                        worst = v;
                        arg = Some((k, i, j));
                    }
                }
            }
            (checks, worst, arg)
        })
        .collect();
    fold_report("global objective identity", parts)
}

/// Max violation of `Δ(s¹,s⁰) = −Δ(s⁰,s¹)` and `Ψ(s⁰,s¹) = Ψ(s¹,s⁰)`.
pub fn verify_delta_symmetry(g: &EnumeratedGame<'_>) -> IdentityReport {
    let spec = g.spec();
    let n = spec.n_agents();
    let parts = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let s0 = g.enumeration.profile(k);
            let mut checks = 0;
            let mut worst = 0.0;
            let mut arg = None;
            for i in 0..n {
                for j in g.unilateral(k, i) {
                    checks += 1;
                    let s1 = g.enumeration.profile(j);
                    let fwd = spec.deviation_quantities(&s0, &s1, i);
                    let bwd = spec.deviation_quantities(&s1, &s0, i);
                    let v = (fwd.delta_10 + fwd.delta_01)
                        .abs()
                        .max((fwd.delta_10 - bwd.delta_01).abs())
                        .max((fwd.psi - bwd.psi).abs());
                    if v > worst || arg.is_none() {
                        worst = v;
                        arg = Some((k, i, j));
                    }
                }
            }
            (checks, worst, arg)
        })
        .collect();
    fold_report("delta/psi symmetry", parts)
}

/// Counts profiles where some sensing edge is missing from the
/// communication graph, or either relation is asymmetric.
pub fn verify_graph_containment(g: &EnumeratedGame<'_>) -> IdentityReport {
    let spec = g.spec();
    let n = spec.n_agents();
    let parts = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let s = g.enumeration.profile(k);
            let sen: Vec<Vec<usize>> = (0..n).map(|i| spec.sensing_neighbors(&s, i)).collect();
            let com: Vec<Vec<usize>> = (0..n).map(|i| spec.comm_neighbors(&s, i)).collect();
            let mut bad = 0.0;
            for i in 0..n {
                for &j in &sen[i] {
                    if !com[i].contains(&j) || !sen[j].contains(&i) {
                        bad = 1.0;
                    }
                }
                for &j in &com[i] {
                    if !com[j].contains(&i) {
                        bad = 1.0;
                    }
                }
            }
            (1, bad, (bad > 0.0).then_some((k, 0, k)))
        })
        .collect();
    fold_report("sensing within communication graph", parts)
}
