//! The coverage game: shared-reward utilities, processing cost, the
//! harmonic potential and the adjusted-utility quantities used by the
//! asynchronous learner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    self, rasterize_footprint, CameraControl, CameraModel, Coord, Footprint, GridWorld,
};

/// Non-negative value `W_q` per cell, indexed like `GridWorld::cells`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightField(Vec<f64>);

impl WeightField {
    pub fn new(world: &GridWorld, values: Vec<f64>) -> Result<Self> {
        let mut errs = Vec::new();
        if values.len() != world.len() {
            errs.push(format!(
                "weights: expected {} values, got {}",
                world.len(),
                values.len()
            ));
        }
        for (k, w) in values.iter().enumerate() {
            if !(w.is_finite() && *w >= 0.0) {
                errs.push(format!("weights[{k}]: W_q must be finite and >= 0, got {w}"));
            }
        }
        if errs.is_empty() {
            Ok(WeightField(values))
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn uniform(world: &GridWorld, w: f64) -> Result<Self> {
        Self::new(world, vec![w; world.len()])
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.0[idx]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// `s_i = (a_i, c_i)` with the control given as an index into the control set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentAction {
    pub position: Coord,
    pub ctrl: usize,
}

impl AgentAction {
    pub const fn new(position: Coord, ctrl: usize) -> Self {
        AgentAction { position, ctrl }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Profile(pub Vec<AgentAction>);

impl Profile {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn with(&self, i: usize, action: AgentAction) -> Profile {
        let mut p = self.clone();
        p.0[i] = action;
        p
    }

    pub fn positions(&self) -> Vec<Coord> {
        self.0.iter().map(|a| a.position).collect()
    }
}

impl std::ops::Index<usize> for Profile {
    type Output = AgentAction;
    fn index(&self, i: usize) -> &AgentAction {
        &self.0[i]
    }
}

/// Adjusted-utility quantities for agent `i` between profiles `s⁰` and `s¹`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationQuantities {
    /// `Δ_i(s¹, s⁰)`
    pub delta_10: f64,
    /// `Δ_i(s⁰, s¹)`
    pub delta_01: f64,
    /// `ρ_i(s⁰, s¹) = (u_i(s¹) − Δ_i(s¹,s⁰)) − (u_i(s⁰) − Δ_i(s⁰,s¹))`
    pub rho: f64,
    /// `Ψ_i(s⁰, s¹)`, the larger adjusted utility.
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MStarMode {
    Exact,
    Bound,
}

/// Default limit on the number of (profile, deviation) pairs enumerated by
/// [`GameSpec::m_star`] in exact mode.
pub const DEFAULT_M_STAR_CAP: u128 = 2_000_000;

#[derive(Debug, Clone)]
struct CachedFootprint {
    cells: Vec<usize>,
    mask: Vec<u64>,
}

impl CachedFootprint {
    fn covers(&self, cell: usize) -> bool {
        self.mask[cell / 64] >> (cell % 64) & 1 == 1
    }
}

/// A fully specified coverage game with a read-only footprint cache keyed
/// by (cell, control).
#[derive(Debug, Clone)]
pub struct GameSpec {
    world: GridWorld,
    weights: WeightField,
    model: CameraModel,
    controls: Vec<CameraControl>,
    n_agents: usize,
    costs: Vec<f64>,
    footprints: Vec<CachedFootprint>,
}

impl GameSpec {
    pub fn new(
        world: GridWorld,
        weights: WeightField,
        model: CameraModel,
        controls: Vec<CameraControl>,
        n_agents: usize,
    ) -> Result<Self> {
        model.validate()?;
        let mut errs = Vec::new();
        if controls.is_empty() {
            errs.push("controls: the control set must be nonempty".to_string());
        }
        if n_agents == 0 {
            errs.push("n_agents: need at least one agent".to_string());
        }
        if weights.values().len() != world.len() {
            errs.push("weights: size does not match the grid".to_string());
        }
        for (k, c) in controls.iter().enumerate() {
            if !(0.0..=model.fl_max).contains(&c.focal_length) {
                errs.push(format!(
                    "controls[{k}].focal_length: {} outside [0, {}]",
                    c.focal_length, model.fl_max
                ));
            }
        }
        if !errs.is_empty() {
            return Err(Error::Validation(errs));
        }

        let costs = controls
            .iter()
            .map(|c| {
                let p = model.camera_params(c.focal_length)?;
                Ok(0.5 * p.alpha * (p.r_lng * p.r_lng - p.r_shrt * p.r_shrt))
            })
            .collect::<Result<Vec<_>>>()?;

        let words = world.len().div_ceil(64);
        let mut footprints = Vec::with_capacity(world.len() * controls.len());
        for &pos in world.cells() {
            for ctrl in &controls {
                let fp = rasterize_footprint(&world, pos, ctrl, &model)?;
                let cells: Vec<usize> = fp
                    .cells
                    .iter()
                    .map(|&q| world.index_of(q).expect("footprint is clipped to the grid"))
                    .collect();
                let mut mask = vec![0u64; words];
                for &c in &cells {
                    mask[c / 64] |= 1 << (c % 64);
                }
                footprints.push(CachedFootprint { cells, mask });
            }
        }

        Ok(GameSpec {
            world,
            weights,
            model,
            controls,
            n_agents,
            costs,
            footprints,
        })
    }

    pub fn world(&self) -> &GridWorld {
        &self.world
    }
    pub fn weights(&self) -> &WeightField {
        &self.weights
    }
    pub fn model(&self) -> &CameraModel {
        &self.model
    }
    pub fn controls(&self) -> &[CameraControl] {
        &self.controls
    }
    pub fn n_agents(&self) -> usize {
        self.n_agents
    }
    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    /// Same game with a different weight field; the footprint cache is reused.
    pub fn with_weights(&self, weights: WeightField) -> Result<Self> {
        if weights.values().len() != self.world.len() {
            return Err(Error::Validation(vec![
                "weights: size does not match the grid".into(),
            ]));
        }
        let mut g = self.clone();
        g.weights = weights;
        Ok(g)
    }

    /// Number of single-agent actions `|Q|·|C|`.
    pub fn actions_per_agent(&self) -> usize {
        self.world.len() * self.controls.len()
    }

    fn cached(&self, a: &AgentAction) -> &CachedFootprint {
        let cell = self.world.index_of(a.position).expect("action inside the grid");
        &self.footprints[cell * self.controls.len() + a.ctrl]
    }

    pub fn check_action(&self, a: &AgentAction) -> Result<()> {
        if !self.world.contains(a.position) {
            return Err(Error::Domain(format!("position {} is outside the grid", a.position)));
        }
        if a.ctrl >= self.controls.len() {
            return Err(Error::Domain(format!(
                "control index {} out of range (|C| = {})",
                a.ctrl,
                self.controls.len()
            )));
        }
        Ok(())
    }

    pub fn check_profile(&self, profile: &Profile) -> Result<()> {
        if profile.len() != self.n_agents {
            return Err(Error::Domain(format!(
                "profile has {} actions, game has {} agents",
                profile.len(),
                self.n_agents
            )));
        }
        profile.0.iter().try_for_each(|a| self.check_action(a))
    }

    /// Cell indices covered by action `a`.
    pub fn footprint_cells(&self, a: &AgentAction) -> &[usize] {
        &self.cached(a).cells
    }

    pub fn footprint(&self, a: &AgentAction) -> Footprint {
        Footprint {
            cells: self
                .footprint_cells(a)
                .iter()
                .map(|&c| self.world.coord(c))
                .collect(),
        }
    }

    pub fn covers(&self, a: &AgentAction, cell: usize) -> bool {
        self.cached(a).covers(cell)
    }

    /// `n_q(s)`.
    pub fn coverage_count(&self, profile: &Profile, q: Coord) -> Result<usize> {
        let cell = self
            .world
            .index_of(q)
            .ok_or_else(|| Error::Domain(format!("cell {q} is outside the grid")))?;
        Ok(self.count_at(profile, cell))
    }

    fn count_at(&self, profile: &Profile, cell: usize) -> usize {
        profile.0.iter().filter(|a| self.covers(a, cell)).count()
    }

    /// `n_q(s)` for every cell.
    pub fn coverage_counts(&self, profile: &Profile) -> Vec<usize> {
        let mut n = vec![0; self.world.len()];
        for a in &profile.0 {
            for &c in self.footprint_cells(a) {
                n[c] += 1;
            }
        }
        n
    }

    /// `f(c) = ½ α (r_lng² − r_shrt²)`.
    pub fn cost(&self, ctrl: usize) -> f64 {
        self.costs[ctrl]
    }

    pub fn min_cost(&self) -> f64 {
        self.costs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_cost(&self) -> f64 {
        self.costs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `u_i(s) = Σ_{q ∈ D_i} W_q / n_q(s) − f(c_i)`.
    pub fn utility(&self, profile: &Profile, i: usize) -> f64 {
        let me = &profile[i];
        let reward: f64 = self
            .footprint_cells(me)
            .iter()
            .map(|&c| self.weights.get(c) / self.count_at(profile, c) as f64)
            .sum();
        reward - self.cost(me.ctrl)
    }

    pub fn utilities(&self, profile: &Profile) -> Vec<f64> {
        (0..profile.len()).map(|i| self.utility(profile, i)).collect()
    }

    /// Utility of agent `i` evaluated only from the actions of `i` and the
    /// given neighbour set.
    pub fn local_utility(&self, profile: &Profile, i: usize, neighbors: &[usize]) -> f64 {
        let me = &profile[i];
        let reward: f64 = self
            .footprint_cells(me)
            .iter()
            .map(|&c| {
                let n = 1 + neighbors
                    .iter()
                    .filter(|&&j| self.covers(&profile[j], c))
                    .count();
                self.weights.get(c) / n as f64
            })
            .sum();
        reward - self.cost(me.ctrl)
    }

    /// `φ(s) = Σ_q Σ_{ℓ=1}^{n_q} W_q/ℓ − Σ_i f(c_i)`.
    pub fn potential(&self, profile: &Profile) -> f64 {
        let counts = self.coverage_counts(profile);
        let share: f64 = counts
            .iter()
            .enumerate()
            .map(|(c, &n)| {
                let w = self.weights.get(c);
                (1..=n).map(|l| w / l as f64).sum::<f64>()
            })
            .sum();
        share - profile.0.iter().map(|a| self.cost(a.ctrl)).sum::<f64>()
    }

    /// `U_g(s) = Σ_i u_i(s)`.
    pub fn global_objective(&self, profile: &Profile) -> f64 {
        self.utilities(profile).iter().sum()
    }

    /// Footprint-sharing neighbours of agent `i`.
    pub fn sensing_neighbors(&self, profile: &Profile, i: usize) -> Vec<usize> {
        let mine = self.cached(&profile[i]);
        (0..profile.len())
            .filter(|&j| {
                j != i && {
                    let other = self.cached(&profile[j]);
                    mine.mask.iter().zip(&other.mask).any(|(a, b)| a & b != 0)
                }
            })
            .collect()
    }

    pub fn comm_neighbors(&self, profile: &Profile, i: usize) -> Vec<usize> {
        geometry::comm_neighbors(&profile.positions(), self.model.r_max, i)
    }

    /// Positions reachable in one step from `a` (itself first, then +x, −x, +y, −y).
    pub fn reachable_positions(&self, a: Coord) -> Result<Vec<Coord>> {
        let mut v = vec![a];
        v.extend(self.world.location_neighbors(a)?);
        Ok(v)
    }

    /// `F_i(a) = ({a} ∪ N_a^loc) × C` in canonical order.
    pub fn feasible_actions(&self, a: Coord) -> Result<Vec<AgentAction>> {
        let nc = self.controls.len();
        Ok(self
            .reachable_positions(a)?
            .into_iter()
            .flat_map(|p| (0..nc).map(move |c| AgentAction::new(p, c)))
            .collect())
    }

    pub fn feasible_count(&self, a: Coord) -> usize {
        let deg = [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .iter()
            .filter(|(dx, dy)| self.world.contains(Coord::new(a.x + dx, a.y + dy)))
            .count();
        (1 + deg) * self.controls.len()
    }

    pub fn is_feasible_move(&self, from: &AgentAction, to: &AgentAction) -> bool {
        from.position.manhattan(to.position) <= 1 && to.ctrl < self.controls.len()
    }

    /// `Δ_i(s¹, s⁰)`: half the shared reward agent `i` gains on `Ω₁` minus
    /// half what it gives up on `Ω₂`, counting only cells that another agent
    /// also covers. Uncontested cells carry no externality and are left out;
    /// with them included `ρ_i` reduces to `f(c⁰) − f(c¹)` for every
    /// unilateral move.
    fn half_externality(&self, s1: &Profile, s0: &Profile, i: usize) -> f64 {
        let d1 = self.cached(&s1[i]);
        let d0 = self.cached(&s0[i]);
        let gained: f64 = d1
            .cells
            .iter()
            .filter(|&&c| !d0.covers(c))
            .filter_map(|&c| {
                let n = self.count_at(s1, c);
                (n >= 2).then(|| self.weights.get(c) / n as f64)
            })
            .sum();
        let lost: f64 = d0
            .cells
            .iter()
            .filter(|&&c| !d1.covers(c))
            .filter_map(|&c| {
                let n = self.count_at(s0, c);
                (n >= 2).then(|| self.weights.get(c) / n as f64)
            })
            .sum();
        0.5 * gained - 0.5 * lost
    }

    /// `Δ_i`, `ρ_i`, `Ψ_i` for agent `i` between `profile0` (s⁰) and
    /// `profile1` (s¹). Each profile supplies its own coverage counts, so the
    /// other agents need not agree between the two.
    pub fn deviation_quantities(
        &self,
        profile0: &Profile,
        profile1: &Profile,
        i: usize,
    ) -> DeviationQuantities {
        let u0 = self.utility(profile0, i);
        let u1 = self.utility(profile1, i);
        self.deviation_with_utilities(profile0, profile1, i, u0, u1)
    }

    pub(crate) fn deviation_with_utilities(
        &self,
        profile0: &Profile,
        profile1: &Profile,
        i: usize,
        u0: f64,
        u1: f64,
    ) -> DeviationQuantities {
        let delta_10 = self.half_externality(profile1, profile0, i);
        let delta_01 = -delta_10;
        let adj1 = u1 - delta_10;
        let adj0 = u0 - delta_01;
        DeviationQuantities {
            delta_10,
            delta_01,
            rho: adj1 - adj0,
            psi: adj0.max(adj1),
        }
    }

    /// Number of profiles `(|Q|·|C|)^N`, saturating.
    pub fn profile_count(&self) -> u128 {
        (self.actions_per_agent() as u128)
            .checked_pow(self.n_agents as u32)
            .unwrap_or(u128::MAX)
    }

    /// `m* = max{ Ψ_i − (u_i(s⁰) − Δ_i(s⁰,s¹)), ½ }` over unilateral feasible
    /// deviations. Exact mode enumerates every profile; bound mode returns
    /// `max(½, 2 Σ W + max f)`.
    pub fn m_star(&self, mode: MStarMode, cap: u128) -> Result<f64> {
        match mode {
            MStarMode::Bound => Ok(self.m_star_bound()),
            MStarMode::Exact => {
                let needed = self
                    .profile_count()
                    .saturating_mul((self.n_agents * 5 * self.controls.len()) as u128);
                if needed > cap {
                    return Err(Error::capacity(
                        "exact m*",
                        needed,
                        cap,
                        "use m_star mode \"bound\"",
                    ));
                }
                let mut best: f64 = 0.5;
                for profile in crate::oracles::ProfileIter::new(self) {
                    let utils = self.utilities(&profile);
                    for i in 0..self.n_agents {
                        for a in self.feasible_actions(profile[i].position)? {
                            if a == profile[i] {
                                continue;
                            }
                            let p1 = profile.with(i, a);
                            let u1 = self.utility(&p1, i);
                            let dq = self.deviation_with_utilities(&profile, &p1, i, utils[i], u1);
                            best = best.max(dq.rho);
                        }
                    }
                }
                Ok(best)
            }
        }
    }

    pub fn m_star_bound(&self) -> f64 {
        (2.0 * self.weights.total() + self.max_cost()).max(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn disk_game(w: usize, h: usize, radii: &[f64], n: usize, weights: Vec<f64>) -> GameSpec {
        let world = GridWorld::new(0, w as i32 - 1, 0, h as i32 - 1).unwrap();
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
        let weights = WeightField::new(&world, weights).unwrap();
        GameSpec::new(world, weights, model, controls, n).unwrap()
    }

    #[test]
    fn cost_values() {
        let g = disk_game(3, 3, &[1.5, 3.0], 1, vec![0.0; 9]);
        assert!((g.cost(1) - PI * 9.0).abs() < 1e-12);
        assert!((g.cost(0) - PI * 2.25).abs() < 1e-12);

        let world = GridWorld::new(0, 2, 0, 2).unwrap();
        let model = CameraModel {
            fl_max: 1.0,
            alpha_min: PI / 2.0,
            alpha_max: PI / 2.0,
            r_min: 1.0,
            r_max: 2.0,
        };
        let g = GameSpec::new(
            world.clone(),
            WeightField::uniform(&world, 1.0).unwrap(),
            model,
            vec![CameraControl::new(1.0, 0.0), CameraControl::new(0.0, 0.0)],
            1,
        )
        .unwrap();
        assert!((g.cost(0) - PI / 4.0 * 3.0).abs() < 1e-12);
        assert_eq!(g.cost(1), 0.0);
    }

    #[test]
    fn lone_agent_utility() {
        let g = disk_game(5, 5, &[1.5], 1, vec![1.0; 25]);
        let p = Profile(vec![AgentAction::new(Coord::new(2, 2), 0)]);
        assert!((g.utility(&p, 0) - (9.0 - g.cost(0))).abs() < 1e-12);
        assert_eq!(g.coverage_count(&p, Coord::new(0, 0)).unwrap(), 0);
        assert_eq!(g.coverage_count(&p, Coord::new(1, 1)).unwrap(), 1);
    }

    #[test]
    fn colocated_agents_split_reward() {
        let g = disk_game(5, 5, &[1.5], 3, (0..25).map(|k| k as f64).collect());
        let a = AgentAction::new(Coord::new(1, 1), 0);
        let p = Profile(vec![a; 3]);
        let covered: f64 = g.footprint_cells(&a).iter().map(|&c| g.weights().get(c)).sum();
        for i in 0..3 {
            assert!((g.utility(&p, i) - (covered / 3.0 - g.cost(0))).abs() < 1e-12);
        }
        assert_eq!(g.coverage_count(&p, Coord::new(1, 1)).unwrap(), 3);
    }

    #[test]
    fn potential_base_cases() {
        let g = disk_game(3, 1, &[0.5], 2, vec![0.0, 4.0, 0.0]);
        let p = Profile(vec![
            AgentAction::new(Coord::new(0, 0), 0),
            AgentAction::new(Coord::new(2, 0), 0),
        ]);
        assert!((g.potential(&p) + 2.0 * g.cost(0)).abs() < 1e-12);
        let q = Profile(vec![p[0], AgentAction::new(Coord::new(1, 0), 0)]);
        assert!((g.potential(&q) - (4.0 - 2.0 * g.cost(0))).abs() < 1e-12);
    }

    #[test]
    fn feasible_action_counts() {
        let g = disk_game(3, 3, &[1.0, 2.0, 3.0], 1, vec![0.0; 9]);
        assert_eq!(g.feasible_actions(Coord::new(1, 1)).unwrap().len(), 15);
        let g2 = disk_game(3, 3, &[1.0, 2.0], 1, vec![0.0; 9]);
        let corner = g2.feasible_actions(Coord::new(0, 0)).unwrap();
        assert_eq!(corner.len(), 6);
        assert_eq!(corner[0], AgentAction::new(Coord::new(0, 0), 0));
        assert_eq!(corner[2], AgentAction::new(Coord::new(1, 0), 0));
        assert_eq!(g2.feasible_count(Coord::new(0, 0)), 6);
        assert_eq!(g2.feasible_count(Coord::new(1, 0)), 8);
    }

    #[test]
    fn identical_footprints_have_zero_delta() {
        let g = disk_game(4, 4, &[1.0, 1.6], 2, (0..16).map(|k| (k % 3) as f64).collect());
        let s0 = Profile(vec![
            AgentAction::new(Coord::new(1, 1), 0),
            AgentAction::new(Coord::new(2, 1), 1),
        ]);
        let s1 = s0.with(1, AgentAction::new(Coord::new(2, 2), 1));
        let dq = g.deviation_quantities(&s0, &s1, 0);
        assert_eq!(dq.delta_10, 0.0);
        assert!((dq.rho - (g.utility(&s1, 0) - g.utility(&s0, 0))).abs() < 1e-12);
    }

    #[test]
    fn swapping_arguments_negates_delta_and_keeps_psi() {
        let g = disk_game(4, 4, &[1.0, 1.6], 2, (0..16).map(|k| (k % 3) as f64).collect());
        let s0 = Profile(vec![
            AgentAction::new(Coord::new(1, 1), 0),
            AgentAction::new(Coord::new(2, 1), 1),
        ]);
        let s1 = s0.with(0, AgentAction::new(Coord::new(2, 1), 1));
        let a = g.deviation_quantities(&s0, &s1, 0);
        let b = g.deviation_quantities(&s1, &s0, 0);
        assert!(a.delta_10 != 0.0);
        assert_eq!(a.delta_10, b.delta_01);
        assert_eq!(a.delta_10, -a.delta_01);
        assert_eq!(a.psi, b.psi);
        assert!((a.rho + b.rho).abs() < 1e-12);
    }

    #[test]
    fn rho_tracks_global_objective() {
        let g = disk_game(4, 4, &[1.0, 1.6], 2, (0..16).map(|k| (k % 3) as f64).collect());
        let s0 = Profile(vec![
            AgentAction::new(Coord::new(0, 0), 1),
            AgentAction::new(Coord::new(1, 1), 0),
        ]);
        for a in g.feasible_actions(s0[0].position).unwrap() {
            let s1 = s0.with(0, a);
            let dq = g.deviation_quantities(&s0, &s1, 0);
            let du = g.global_objective(&s1) - g.global_objective(&s0);
            assert!((dq.rho - du).abs() < 1e-12, "{a:?}: {} vs {du}", dq.rho);
        }
    }

    /// Summing over all of Ω₁/Ω₂ leaves only the cost difference in ρ.
    #[test]
    fn all_cell_delta_collapses_to_cost_difference() {
        let g = disk_game(4, 4, &[1.0, 1.6], 2, (0..16).map(|k| (k % 3) as f64).collect());
        let s0 = Profile(vec![
            AgentAction::new(Coord::new(0, 0), 1),
            AgentAction::new(Coord::new(1, 1), 0),
        ]);
        let s1 = s0.with(0, AgentAction::new(Coord::new(1, 0), 0));
        let d1 = g.footprint_cells(&s1[0]);
        let d0 = g.footprint_cells(&s0[0]);
        let n1 = g.coverage_counts(&s1);
        let n0 = g.coverage_counts(&s0);
        let w = |c: usize| g.weights().get(c);
        let all_delta = 0.5
            * d1.iter().filter(|c| !d0.contains(c)).map(|&c| w(c) / n1[c] as f64).sum::<f64>()
            - 0.5 * d0.iter().filter(|c| !d1.contains(c)).map(|&c| w(c) / n0[c] as f64).sum::<f64>();
        let rho = (g.utility(&s1, 0) - all_delta) - (g.utility(&s0, 0) + all_delta);
        assert!((rho - (g.cost(1) - g.cost(0))).abs() < 1e-12);
        let du = g.global_objective(&s1) - g.global_objective(&s0);
        assert!((rho - du).abs() > 0.1);
    }

    #[test]
    fn m_star_all_zero_weights_equal_costs() {
        let g = disk_game(2, 2, &[1.0], 2, vec![0.0; 4]);
        assert_eq!(g.m_star(MStarMode::Exact, DEFAULT_M_STAR_CAP).unwrap(), 0.5);
    }

    #[test]
    fn m_star_exact_cap() {
        let g = disk_game(4, 4, &[1.0, 1.6], 2, vec![1.0; 16]);
        let err = g.m_star(MStarMode::Exact, 10).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
        assert!(g.m_star(MStarMode::Bound, 10).is_ok());
    }

    #[test]
    fn invalid_weights_are_rejected() {
        let world = GridWorld::new(0, 1, 0, 0).unwrap();
        assert!(WeightField::new(&world, vec![1.0, -0.5]).is_err());
        assert!(WeightField::new(&world, vec![1.0]).is_err());
        assert!(WeightField::new(&world, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn local_utility_matches_global_with_sensing_neighbors() {
        let g = disk_game(5, 5, &[1.0, 1.6], 3, (0..25).map(|k| (k % 4) as f64).collect());
        let p = Profile(vec![
            AgentAction::new(Coord::new(1, 1), 1),
            AgentAction::new(Coord::new(2, 2), 0),
            AgentAction::new(Coord::new(4, 4), 0),
        ]);
        for i in 0..3 {
            let nb = g.sensing_neighbors(&p, i);
            assert_eq!(g.local_utility(&p, i, &nb), g.utility(&p, i));
        }
    }
}
