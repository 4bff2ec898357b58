use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::oracles::EnumeratedGame;

/// Default cap on the number of pair states a chain may have.
pub const DEFAULT_STATE_CAP: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainKind {
    /// Pairs `(s, s′)` with `s′_i ∈ F_i(a_i)` for every agent.
    Synchronous,
    /// Pairs as above that differ in at most one agent.
    Asynchronous,
}

/// Enumeration of `z = (s_prev, s_curr)` as pairs of profile indices.
///
/// States are ordered by `s_prev`, then by `s_curr` in canonical profile
/// order.
#[derive(Debug, Clone)]
pub struct PairStateSpace {
    kind: ChainKind,
    states: Vec<(u32, u32)>,
    index: HashMap<(u32, u32), u32>,
    diag: Vec<u32>,
    n_profiles: usize,
}

impl PairStateSpace {
    /// Number of states the space would have, without building it.
    pub fn count(game: &EnumeratedGame<'_>, kind: ChainKind) -> u128 {
        let spec = game.spec();
        let per_agent: Vec<u128> = (0..spec.actions_per_agent())
            .map(|k| game.feasible_from(k).len() as u128)
            .collect();
        let sum: u128 = per_agent.iter().sum();
        let n = spec.n_agents() as u32;
        match kind {
            ChainKind::Synchronous => sum.saturating_pow(n),
            ChainKind::Asynchronous => {
                let total = game.len() as u128;
                // each agent's alternative moves times the others' free choices
                let others = (spec.actions_per_agent() as u128).saturating_pow(n - 1);
                let moves: u128 = per_agent.iter().map(|f| f - 1).sum();
                total + n as u128 * moves * others
            }
        }
    }

    pub fn new(game: &EnumeratedGame<'_>, kind: ChainKind, cap: usize) -> Result<Self> {
        let needed = Self::count(game, kind);
        if needed > cap as u128 {
            return Err(Error::capacity(
                "pair state space",
                needed,
                cap as u128,
                "use a smaller instance or raise the state cap",
            ));
        }
        let e = &game.enumeration;
        let n = e.spec().n_agents();
        let mut states = Vec::with_capacity(needed as usize);
        for s0 in 0..game.len() {
            match kind {
                ChainKind::Synchronous => {
                    let mut targets = vec![s0];
                    for i in 0..n {
                        let opts = game.feasible_from(e.agent_action_index(s0, i));
                        targets = targets
                            .iter()
                            .flat_map(|&s| opts.iter().map(move |&k| e.replace(s, i, k)))
                            .collect();
                    }
                    targets.sort_unstable();
                    states.extend(targets.into_iter().map(|s1| (s0 as u32, s1 as u32)));
                }
                ChainKind::Asynchronous => {
                    let mut targets = vec![s0];
                    for i in 0..n {
                        let own = e.agent_action_index(s0, i);
                        targets.extend(
                            game.feasible_from(own)
                                .iter()
                                .filter(|&&k| k != own)
                                .map(|&k| e.replace(s0, i, k)),
                        );
                    }
                    targets.sort_unstable();
                    states.extend(targets.into_iter().map(|s1| (s0 as u32, s1 as u32)));
                }
            }
        }
        let index: HashMap<(u32, u32), u32> = states
            .iter()
            .enumerate()
            .map(|(k, &z)| (z, k as u32))
            .collect();
        let diag = (0..game.len() as u32).map(|s| index[&(s, s)]).collect();
        Ok(PairStateSpace {
            kind,
            states,
            index,
            diag,
            n_profiles: game.len(),
        })
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_profiles(&self) -> usize {
        self.n_profiles
    }

    pub fn state(&self, k: usize) -> (usize, usize) {
        let (a, b) = self.states[k];
        (a as usize, b as usize)
    }

    pub fn states(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.states.iter().map(|&(a, b)| (a as usize, b as usize))
    }

    pub fn index_of(&self, s_prev: usize, s_curr: usize) -> Option<usize> {
        self.index
            .get(&(s_prev as u32, s_curr as u32))
            .map(|&k| k as usize)
    }

    /// State index of `(s, s)`.
    pub fn diag_index(&self, s: usize) -> usize {
        self.diag[s] as usize
    }

    pub fn is_diag(&self, k: usize) -> bool {
        let (a, b) = self.states[k];
        a == b
    }

    /// Indices of `diag(X)` for a set of profile indices `X`.
    pub fn diag_of(&self, profiles: &[usize]) -> Vec<usize> {
        profiles.iter().map(|&s| self.diag_index(s)).collect()
    }

    /// Mass a distribution puts on `diag(X)`.
    pub fn diag_mass(&self, mu: &[f64], profiles: &[usize]) -> f64 {
        profiles.iter().map(|&s| mu[self.diag_index(s)]).sum()
    }

    /// Partition of states by current profile, used by aggregation solvers.
    pub(crate) fn blocks_by_current(&self) -> Vec<u32> {
        self.states.iter().map(|&(_, b)| b).collect()
    }
}
