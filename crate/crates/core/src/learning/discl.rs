use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{AgentAction, GameSpec, Profile};

use super::{local_utilities, uniform_profile, Audit};

/// Memory of one synchronous learner: its last two actions and the
/// utilities they earned.
#[derive(Debug, Clone, PartialEq)]
pub struct DisclAgentState {
    pub prev_action: AgentAction,
    pub curr_action: AgentAction,
    pub prev_utility: f64,
    pub curr_utility: f64,
}

impl DisclAgentState {
    /// `s_i(τ_i(t))`: the current action unless it earned strictly less.
    pub fn selected(&self) -> AgentAction {
        if self.curr_utility >= self.prev_utility {
            self.curr_action
        } else {
            self.prev_action
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisclState {
    pub profile: Profile,
    pub agents: Vec<DisclAgentState>,
}

/// Uniform placement and controls; both remembered actions equal the
/// initial one.
pub fn discl_init<R: Rng>(spec: &GameSpec, rng: &mut R) -> DisclState {
    let profile = uniform_profile(spec, rng);
    let utils = spec.utilities(&profile);
    let agents = profile
        .0
        .iter()
        .zip(&utils)
        .map(|(&a, &u)| DisclAgentState {
            prev_action: a,
            curr_action: a,
            prev_utility: u,
            curr_utility: u,
        })
        .collect();
    DisclState { profile, agents }
}

/// One synchronous update at rate `epsilon`. Returns per-agent experiment
/// flags.
///
/// RNG order: for each agent in index order, one coin, then one index draw
/// when experimenting.
pub fn discl_step<R: Rng>(
    spec: &GameSpec,
    epsilon: f64,
    state: &mut DisclState,
    rng: &mut R,
    audit: &mut Audit,
) -> Result<Vec<bool>> {
    let n = spec.n_agents();
    let mut next = Vec::with_capacity(n);
    let mut experimented = Vec::with_capacity(n);
    for agent in &state.agents {
        let keep = agent.selected();
        let explore = rng.gen::<f64>() < epsilon;
        let chosen = if explore {
            let pos = agent.curr_action.position;
            let candidates: Vec<AgentAction> = spec
                .feasible_actions(pos)?
                .into_iter()
                .filter(|a| *a != keep)
                .collect();
            if candidates.is_empty() {
                return Err(Error::Config(format!(
                    "no experiment candidates at {pos}: |F_i| must be at least 2"
                )));
            }
            candidates[rng.gen_range(0..candidates.len())]
        } else {
            keep
        };
        next.push(chosen);
        experimented.push(explore);
    }
    let profile = Profile(next);
    let utils = local_utilities(spec, &profile, audit);
    for ((agent, &a), &u) in state.agents.iter_mut().zip(&profile.0).zip(&utils) {
        agent.prev_action = agent.curr_action;
        agent.prev_utility = agent.curr_utility;
        agent.curr_action = a;
        agent.curr_utility = u;
    }
    state.profile = profile;
    Ok(experimented)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::WeightField;
    use crate::geometry::{CameraControl, CameraModel, Coord, GridWorld};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;
    use std::f64::consts::TAU;

    fn grid_game(w: i32, h: i32, n: usize) -> GameSpec {
        let world = GridWorld::new(0, w - 1, 0, h - 1).unwrap();
        let model = CameraModel {
            fl_max: 1.0,
            alpha_min: TAU,
            alpha_max: TAU,
            r_min: 0.0,
            r_max: 1.5,
        };
        let controls = vec![CameraControl::new(0.5, 0.0), CameraControl::new(1.0, 0.0)];
        let weights = (0..world.len()).map(|k| (k % 3) as f64).collect();
        let weights = WeightField::new(&world, weights).unwrap();
        GameSpec::new(world, weights, model, controls, n).unwrap()
    }

    #[test]
    fn init_is_seeded_and_repeats_the_initial_action() {
        let spec = grid_game(3, 3, 3);
        let a = discl_init(&spec, &mut ChaCha8Rng::seed_from_u64(5));
        let b = discl_init(&spec, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        for (i, ag) in a.agents.iter().enumerate() {
            assert_eq!(ag.prev_action, ag.curr_action);
            assert_eq!(ag.curr_action, a.profile[i]);
            assert_eq!(ag.prev_utility, spec.utility(&a.profile, i));
        }
    }

    #[test]
    fn one_cell_grid_places_everyone_there() {
        let spec = grid_game(1, 1, 4);
        let st = discl_init(&spec, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(st.profile.0.iter().all(|a| a.position == Coord::new(0, 0)));
    }

    #[test]
    fn placement_is_uniform_on_two_cells() {
        let spec = grid_game(2, 1, 1);
        let hits = (0..100_000u64)
            .filter(|&s| discl_init(&spec, &mut ChaCha8Rng::seed_from_u64(s)).profile[0].position.x == 0)
            .count();
        let f = hits as f64 / 1e5;
        assert!((f - 0.5).abs() < 0.01, "{f}");
    }

    #[test]
    fn ties_keep_the_current_action() {
        let a = AgentAction::new(Coord::new(0, 0), 0);
        let b = AgentAction::new(Coord::new(1, 0), 0);
        let mut st = DisclAgentState {
            prev_action: a,
            curr_action: b,
            prev_utility: 1.0,
            curr_utility: 1.0,
        };
        assert_eq!(st.selected(), b);
        st.curr_utility = 0.999;
        assert_eq!(st.selected(), a);
    }

    #[test]
    fn zero_rate_is_a_fixed_point() {
        let spec = grid_game(3, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut st = discl_init(&spec, &mut rng);
        let start = st.profile.clone();
        for _ in 0..200 {
            let flags = discl_step(&spec, 0.0, &mut st, &mut rng, &mut Audit::default()).unwrap();
            assert!(flags.iter().all(|f| !f));
            assert_eq!(st.profile, start);
        }
    }

    #[test]
    fn full_rate_draws_uniformly_among_the_other_actions() {
        let spec = grid_game(3, 3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut st = discl_init(&spec, &mut rng);
        st.profile = Profile(vec![AgentAction::new(Coord::new(1, 1), 1)]);
        let u = spec.utility(&st.profile, 0);
        st.agents[0] = DisclAgentState {
            prev_action: st.profile[0],
            curr_action: st.profile[0],
            prev_utility: u,
            curr_utility: u,
        };
        let keep = st.agents[0].selected();
        let draws = 100_000;
        let mut counts: HashMap<AgentAction, u64> = HashMap::new();
        for _ in 0..draws {
            let mut s = st.clone();
            discl_step(&spec, 1.0, &mut s, &mut rng, &mut Audit::default()).unwrap();
            *counts.entry(s.profile[0]).or_default() += 1;
        }
        assert!(!counts.contains_key(&keep));
        let others = spec.feasible_count(Coord::new(1, 1)) - 1;
        assert_eq!(counts.len(), others);
        let e = draws as f64 / others as f64;
        let chi2: f64 = counts.values().map(|&o| (o as f64 - e).powi(2) / e).sum();
        // χ²(9) upper 0.001 quantile is 27.88
        assert!(chi2 < 27.88, "chi2 = {chi2}");
    }

    #[test]
    fn two_agent_step_follows_the_product_form() {
        let spec = grid_game(2, 2, 2);
        let eps = 0.5;
        let s0 = Profile(vec![AgentAction::new(Coord::new(0, 0), 0), AgentAction::new(Coord::new(1, 1), 1)]);
        let s1 = Profile(vec![AgentAction::new(Coord::new(0, 1), 1), AgentAction::new(Coord::new(1, 1), 0)]);
        let (u0, u1) = (spec.utilities(&s0), spec.utilities(&s1));
        let st = DisclState {
            profile: s1.clone(),
            agents: (0..2)
                .map(|i| DisclAgentState {
                    prev_action: s0[i],
                    curr_action: s1[i],
                    prev_utility: u0[i],
                    curr_utility: u1[i],
                })
                .collect(),
        };
        let keep: Vec<AgentAction> = (0..2).map(|i| if u1[i] >= u0[i] { s1[i] } else { s0[i] }).collect();
        let opts: Vec<Vec<AgentAction>> = (0..2).map(|i| spec.feasible_actions(s1[i].position).unwrap()).collect();
        let draws = 100_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts: HashMap<Vec<AgentAction>, u64> = HashMap::new();
        for _ in 0..draws {
            let mut s = st.clone();
            discl_step(&spec, eps, &mut s, &mut rng, &mut Audit::default()).unwrap();
            *counts.entry(s.profile.0).or_default() += 1;
        }
        let mut total = 0.0;
        for a in &opts[0] {
            for b in &opts[1] {
                let pa = if *a == keep[0] { 1.0 - eps } else { eps / (opts[0].len() - 1) as f64 };
                let pb = if *b == keep[1] { 1.0 - eps } else { eps / (opts[1].len() - 1) as f64 };
                let p = pa * pb;
                total += p;
                let f = counts.get(&vec![*a, *b]).copied().unwrap_or(0) as f64 / draws as f64;
                let sigma = (p * (1.0 - p) / draws as f64).sqrt();
                assert!((f - p).abs() <= 3.0 * sigma + 1e-12, "{a:?} {b:?}: {f} vs {p}");
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
    }
}
