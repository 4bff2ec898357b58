use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learning::revert_probability;
use crate::oracles::EnumeratedGame;

use super::matrix::TransitionMatrix;
use super::space::{ChainKind, PairStateSpace};

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 0.5 {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon must lie in (0, 1/2], got {epsilon}")))
    }
}

fn check_kind(space: &PairStateSpace, kind: ChainKind) -> Result<()> {
    if space.kind() == kind {
        Ok(())
    } else {
        Err(Error::Domain(format!("expected a {kind:?} pair state space")))
    }
}

/// Probability that agent `i` plays action `o` next under the synchronous
/// rule, given its selected action `keep` and `n_opts = |F_i|`.
pub fn dhscl_agent_prob(o: usize, keep: usize, n_opts: usize, epsilon: f64) -> f64 {
    if n_opts == 1 {
        // nothing to experiment with
        return if o == keep { 1.0 } else { 0.0 };
    }
    if o == keep {
        1.0 - epsilon
    } else {
        epsilon / (n_opts - 1) as f64
    }
}

/// Selected action `s_i^{τ_i}` of agent `i` in state `(s0, s1)`: the current
/// action unless it earned strictly less than the previous one.
pub fn dhscl_selected(game: &EnumeratedGame<'_>, s0: usize, s1: usize, i: usize) -> usize {
    let e = &game.enumeration;
    if game.utility(s1, i) >= game.utility(s0, i) {
        e.agent_action_index(s1, i)
    } else {
        e.agent_action_index(s0, i)
    }
}

/// Row of state `k` of the synchronous chain at rate `epsilon`.
pub(crate) fn dhscl_row(
    game: &EnumeratedGame<'_>,
    space: &PairStateSpace,
    k: usize,
    epsilon: f64,
) -> Vec<(u32, f64)> {
    let e = &game.enumeration;
    let (s0, s1) = space.state(k);
    let mut acc: Vec<(usize, f64)> = vec![(s1, 1.0)];
    for i in 0..game.spec().n_agents() {
        let keep = dhscl_selected(game, s0, s1, i);
        let opts = game.feasible_from(e.agent_action_index(s1, i));
        acc = acc
            .iter()
            .flat_map(|&(s, p)| {
                opts.iter().map(move |&o| {
                    (e.replace(s, i, o), p * dhscl_agent_prob(o, keep, opts.len(), epsilon))
                })
            })
            .filter(|&(_, p)| p > 0.0)
            .collect();
    }
    acc.into_iter()
        .map(|(s2, p)| {
            let j = space.index_of(s1, s2).expect("feasible successor is a state");
            (j as u32, p)
        })
        .collect()
}

/// Transition law of the constant-rate synchronous learner on `B`.
///
/// From `(s⁰, s¹)` every agent independently plays its selected action with
/// probability `1 − ε` and each other action of `F_i(a¹_i)` with probability
/// `ε / (|F_i| − 1)`; the product over agents lands on `(s¹, s²)`.
pub fn build_dhscl_matrix(
    game: &EnumeratedGame<'_>,
    space: &PairStateSpace,
    epsilon: f64,
) -> Result<TransitionMatrix> {
    check_epsilon(epsilon)?;
    dhscl_matrix_any(game, space, epsilon)
}

/// As [`build_dhscl_matrix`] for any `ε ∈ [0, 1]`, as needed by the
/// unperturbed chain and by diminishing schedules.
pub(crate) fn dhscl_matrix_any(
    game: &EnumeratedGame<'_>,
    space: &PairStateSpace,
    epsilon: f64,
) -> Result<TransitionMatrix> {
    check_kind(space, ChainKind::Synchronous)?;
    let rows = (0..space.len())
        .into_par_iter()
        .map(|k| dhscl_row(game, space, k, epsilon))
        .collect();
    Ok(TransitionMatrix::from_rows(rows, epsilon))
}

/// One row contribution of the asynchronous chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhaclRates {
    /// `η₁`: probability of each experiment target.
    pub eta1: f64,
    /// `η₂`: stay at the current action.
    pub eta2: f64,
    /// `η₃`: revert to the previous action.
    pub eta3: f64,
}

/// `η₁, η₂, η₃` for an active agent with `n_experiments` experiment targets
/// and adjusted-utility gap `rho`.
pub fn dhacl_rates(epsilon: f64, m: f64, rho: f64, n_agents: usize, n_experiments: usize) -> DhaclRates {
    let em = epsilon.powf(m);
    let n = n_agents as f64;
    let rev = revert_probability(epsilon, rho);
    DhaclRates {
        eta1: if n_experiments == 0 {
            0.0
        } else {
            em / (n * n_experiments as f64)
        },
        eta2: (1.0 - em) * (1.0 - rev) / n,
        eta3: (1.0 - em) * rev / n,
    }
}

/// Which branch of the asynchronous rule produced a row entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DhaclBranch {
    Experiment,
    Stay,
    Revert,
    /// Stay and revert coincide because `s⁰_i = s¹_i`.
    Merged,
}

/// One agent's contribution to a row of the asynchronous chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhaclEntry {
    pub target: u32,
    pub prob: f64,
    pub agent: usize,
    pub branch: DhaclBranch,
    /// `ρ_i(s⁰, s¹)`, zero when agent `i` did not move.
    pub rho: f64,
}

/// Contributions to the row of state `k`, before summing equal targets.
pub(crate) fn dhacl_row(
    game: &EnumeratedGame<'_>,
    space: &PairStateSpace,
    k: usize,
    epsilon: f64,
    m: &[f64],
) -> Result<Vec<DhaclEntry>> {
    let spec = game.spec();
    let n = spec.n_agents();
    let e = &game.enumeration;
    let (s0, s1) = space.state(k);
    let profiles = (s0 != s1).then(|| (e.profile(s0), e.profile(s1)));
    let target = |s2: usize| space.index_of(s1, s2).expect("feasible successor is a state") as u32;
    let mut row = Vec::new();
    for (i, &mi) in m.iter().enumerate() {
        let a1 = e.agent_action_index(s1, i);
        let a0 = e.agent_action_index(s0, i);
        let experiments: Vec<usize> = game
            .feasible_from(a1)
            .iter()
            .copied()
            .filter(|&o| o != a0 && o != a1)
            .collect();
        if experiments.is_empty() {
            return Err(Error::Config(format!(
                "agent {i} has no experiment targets in state ({s0}, {s1}); |F_i| must be at least 3"
            )));
        }
        let rho = match &profiles {
            Some((p0, p1)) if a0 != a1 => spec.deviation_quantities(p0, p1, i).rho,
            _ => 0.0,
        };
        let r = dhacl_rates(epsilon, mi, rho, n, experiments.len());
        let mut push = |s2: usize, prob: f64, branch: DhaclBranch| {
            row.push(DhaclEntry {
                target: target(s2),
                prob,
                agent: i,
                branch,
                rho,
            })
        };
        for &o in &experiments {
            push(e.replace(s1, i, o), r.eta1, DhaclBranch::Experiment);
        }
        if a0 == a1 {
            push(s1, r.eta2 + r.eta3, DhaclBranch::Merged);
        } else {
            push(s1, r.eta2, DhaclBranch::Stay);
            push(e.replace(s1, i, a0), r.eta3, DhaclBranch::Revert);
        }
    }
    Ok(row)
}

/// Transition law of the constant-rate asynchronous learner on `B′`.
///
/// From `(s⁰, s¹)` an agent `i` is active with probability `1/N`. It
/// experiments with probability `ε^{m_i}`, uniformly over
/// `F_i(a¹_i) \ {s⁰_i, s¹_i}`; otherwise it stays at `s¹_i` or reverts to
/// `s⁰_i` by the two-point rule with gap `ρ_i(s⁰, s¹)`. When `s⁰_i = s¹_i`
/// both alternatives land on `(s¹, s¹)`.
pub fn build_dhacl_matrix(
    game: &EnumeratedGame<'_>,
    space: &PairStateSpace,
    epsilon: f64,
    m: &[f64],
) -> Result<TransitionMatrix> {
    check_epsilon(epsilon)?;
    dhacl_matrix_any(game, space, epsilon, m)
}

pub(crate) fn dhacl_matrix_any(
    game: &EnumeratedGame<'_>,
    space: &PairStateSpace,
    epsilon: f64,
    m: &[f64],
) -> Result<TransitionMatrix> {
    check_kind(space, ChainKind::Asynchronous)?;
    let n = game.spec().n_agents();
    if m.len() != n {
        return Err(Error::Domain(format!("expected {n} exponents m_i, got {}", m.len())));
    }
    let rows: Result<Vec<Vec<(u32, f64)>>> = (0..space.len())
        .into_par_iter()
        .map(|k| {
            Ok(dhacl_row(game, space, k, epsilon, m)?
                .into_iter()
                .map(|en| (en.target, en.prob))
                .collect())
        })
        .collect();
    Ok(TransitionMatrix::from_rows(rows?, epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{GameSpec, WeightField};
    use crate::geometry::{CameraControl, CameraModel, GridWorld};
    use std::f64::consts::TAU;

    fn line_game(cells: i32, n: usize, radii: &[f64]) -> GameSpec {
        let world = GridWorld::new(0, cells - 1, 0, 0).unwrap();
        let r_max = radii.iter().copied().fold(0.0, f64::max);
        let model = CameraModel {
            fl_max: 1.0,
            alpha_min: TAU,
            alpha_max: TAU,
            r_min: 0.0,
            r_max,
        };
        let controls = radii
            .iter()
            .map(|r| CameraControl::new(r / r_max, 0.0))
            .collect();
        let w = (0..cells).map(|k| 1.0 + k as f64).collect();
        GameSpec::new(world.clone(), WeightField::new(&world, w).unwrap(), model, controls, n).unwrap()
    }

    #[test]
    fn one_agent_row_by_hand() {
        // 3 cells, 1 control: from the middle cell F = {stay, +x, −x}
        let spec = line_game(3, 1, &[0.5]);
        let g = EnumeratedGame::new(&spec, 1 << 20).unwrap();
        let space = PairStateSpace::new(&g, ChainKind::Synchronous, 1000).unwrap();
        let eps = 0.2;
        let p = build_dhscl_matrix(&g, &space, eps).unwrap();
        // z = (left, middle); the middle cell is worth more so it is kept
        let k = space.index_of(0, 1).unwrap();
        assert!((p.get(k, space.index_of(1, 1).unwrap()) - 0.8).abs() < 1e-15);
        assert!((p.get(k, space.index_of(1, 0).unwrap()) - 0.1).abs() < 1e-15);
        assert!((p.get(k, space.index_of(1, 2).unwrap()) - 0.1).abs() < 1e-15);
        // z = (right, middle): the right cell earned more, so revert to it
        let k = space.index_of(2, 1).unwrap();
        assert!((p.get(k, space.index_of(1, 2).unwrap()) - 0.8).abs() < 1e-15);
        assert!(p.max_row_sum_error() < 1e-12);
    }

    #[test]
    fn dhacl_rates_at_zero_gap() {
        let r = dhacl_rates(0.1, 2.5, 0.0, 2, 3);
        let half = (1.0 - 0.1f64.powf(2.5)) / 4.0;
        assert!((r.eta2 - half).abs() < 1e-15 && (r.eta3 - half).abs() < 1e-15);
        assert!((3.0 * r.eta1 + r.eta2 + r.eta3 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dhacl_needs_three_actions() {
        let spec = line_game(2, 1, &[0.5]);
        let g = EnumeratedGame::new(&spec, 1 << 20).unwrap();
        let space = PairStateSpace::new(&g, ChainKind::Asynchronous, 1000).unwrap();
        assert!(matches!(
            build_dhacl_matrix(&g, &space, 0.1, &[3.0]),
            Err(Error::Config(_))
        ));
        assert!(build_dhacl_matrix(&g, &space, 0.6, &[3.0]).is_err());
    }

    #[test]
    fn space_sizes_match_counts() {
        let spec = line_game(3, 2, &[0.5, 1.0]);
        let g = EnumeratedGame::new(&spec, 1 << 20).unwrap();
        for kind in [ChainKind::Synchronous, ChainKind::Asynchronous] {
            let s = PairStateSpace::new(&g, kind, 1 << 20).unwrap();
            assert_eq!(s.len() as u128, PairStateSpace::count(&g, kind));
            assert!((0..g.len()).all(|x| s.is_diag(s.diag_index(x))));
        }
        assert!(matches!(
            PairStateSpace::new(&g, ChainKind::Synchronous, 10),
            Err(Error::Capacity { .. })
        ));
    }
}
