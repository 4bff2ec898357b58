//! Payoff-based learning dynamics on the coverage game.
//!
//! * synchronous, diminishing rate (`Discl`) and its constant-rate variant
//!   (`Dhscl`): every agent either replays the better of its last two
//!   actions or experiments;
//! * asynchronous, diminishing rate (`Diacl`) and its constant-rate variant
//!   (`Dhacl`): one uniformly chosen agent per step experiments with
//!   probability `ε^{m_i}`, otherwise picks between its current and baseline
//!   action with a two-point Gibbs rule.
//!
//! All randomness comes from one seeded ChaCha stream per run, consumed in a
//! fixed order, so a run is a pure function of its inputs.
//!
//! Time convention: the record at `t = 1` holds the initial profile (agents
//! keep their actions); for `t ≥ 2` the record at `t` holds the profile
//! produced by the update that used `ε(t)`.

mod diacl;
mod discl;
mod schedule;

pub use diacl::{
    check_m, diacl_init, diacl_step, revert_probability, DiaclAgentState, DiaclEvent, DiaclState,
    MChoice, DEGENERATE_M_SLACK,
};
pub use discl::{discl_init, discl_step, DisclAgentState, DisclState};
pub use schedule::ExplorationSchedule;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AgentAction, GameSpec, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Discl,
    Dhscl,
    Diacl,
    Dhacl,
}

impl Algorithm {
    pub fn is_async(self) -> bool {
        matches!(self, Algorithm::Diacl | Algorithm::Dhacl)
    }

    pub fn is_homogeneous(self) -> bool {
        matches!(self, Algorithm::Dhscl | Algorithm::Dhacl)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Discl => "discl",
            Algorithm::Dhscl => "dhscl",
            Algorithm::Diacl => "diacl",
            Algorithm::Dhacl => "dhacl",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "discl" => Ok(Algorithm::Discl),
            "dhscl" => Ok(Algorithm::Dhscl),
            "diacl" => Ok(Algorithm::Diacl),
            "dhacl" => Ok(Algorithm::Dhacl),
            other => Err(Error::Domain(format!("unknown algorithm {other:?}"))),
        }
    }
}

pub(crate) fn uniform_profile<R: Rng>(spec: &GameSpec, rng: &mut R) -> Profile {
    let cells = spec.world().cells();
    Profile(
        (0..spec.n_agents())
            .map(|_| {
                let pos = cells[rng.gen_range(0..cells.len())];
                let ctrl = rng.gen_range(0..spec.n_controls());
                AgentAction::new(pos, ctrl)
            })
            .collect(),
    )
}

/// Information-flow audit.
///
/// Learners evaluate their utility from their own footprint and the actions
/// of their sensing neighbours only. With `enabled`, each such evaluation is
/// also checked against the global formula and the neighbour set against the
/// communication graph; mismatches are counted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Audit {
    pub enabled: bool,
    pub violations: u64,
}

impl Audit {
    pub fn utility(&mut self, spec: &GameSpec, profile: &Profile, i: usize) -> f64 {
        let sen = spec.sensing_neighbors(profile, i);
        let u = spec.local_utility(profile, i, &sen);
        if self.enabled {
            let comm = spec.comm_neighbors(profile, i);
            if sen.iter().any(|j| !comm.contains(j)) || u != spec.utility(profile, i) {
                self.violations += 1;
            }
        }
        u
    }
}

pub(crate) fn local_utilities(spec: &GameSpec, profile: &Profile, audit: &mut Audit) -> Vec<f64> {
    (0..profile.len()).map(|i| audit.utility(spec, profile, i)).collect()
}

/// Parameters of the asynchronous learners.
#[derive(Debug, Clone, PartialEq)]
pub struct AsyncParams {
    pub k: f64,
    pub m_star: f64,
    pub m_choice: MChoice,
}

#[derive(Debug, Clone)]
enum Dynamics {
    Sync(DisclState),
    Async(DiaclState),
}

/// What happened in one update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEvent {
    pub t: u64,
    pub epsilon: f64,
    /// Active agent (asynchronous learners only).
    pub active: Option<usize>,
    pub experimented: Vec<bool>,
}

/// A running learner. The profile after construction is `s(1) = s(0)`.
#[derive(Debug, Clone)]
pub struct Learner<'a> {
    spec: &'a GameSpec,
    algorithm: Algorithm,
    schedule: ExplorationSchedule,
    rng: ChaCha8Rng,
    dynamics: Dynamics,
    t: u64,
    audit: Audit,
}

impl<'a> Learner<'a> {
    pub fn new(
        spec: &'a GameSpec,
        algorithm: Algorithm,
        schedule: ExplorationSchedule,
        seed: u64,
        async_params: Option<&AsyncParams>,
    ) -> Result<Self> {
        if algorithm.is_homogeneous() != schedule.is_homogeneous() {
            return Err(Error::Config(format!(
                "{} needs a {} schedule",
                algorithm.name(),
                if algorithm.is_homogeneous() { "constant" } else { "diminishing" }
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dynamics = if algorithm.is_async() {
            let p = async_params.ok_or_else(|| {
                Error::Config(format!("{} needs K and m*", algorithm.name()))
            })?;
            Dynamics::Async(diacl_init(spec, &mut rng, p.k, p.m_star, &p.m_choice)?)
        } else {
            Dynamics::Sync(discl_init(spec, &mut rng))
        };
        Ok(Learner {
            spec,
            algorithm,
            schedule,
            rng,
            dynamics,
            t: 1,
            audit: Audit::default(),
        })
    }

    pub fn with_audit(mut self, enabled: bool) -> Self {
        self.audit.enabled = enabled;
        self
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn profile(&self) -> &Profile {
        match &self.dynamics {
            Dynamics::Sync(s) => &s.profile,
            Dynamics::Async(s) => &s.profile,
        }
    }

    pub fn audit_violations(&self) -> u64 {
        self.audit.violations
    }

    pub fn sync_state(&self) -> Option<&DisclState> {
        match &self.dynamics {
            Dynamics::Sync(s) => Some(s),
            Dynamics::Async(_) => None,
        }
    }

    pub fn async_state(&self) -> Option<&DiaclState> {
        match &self.dynamics {
            Dynamics::Async(s) => Some(s),
            Dynamics::Sync(_) => None,
        }
    }

    /// Advances to `t + 1`.
    pub fn step(&mut self) -> Result<StepEvent> {
        let t = self.t + 1;
        let epsilon = self.schedule.epsilon_at(t)?;
        let (active, experimented) = match &mut self.dynamics {
            Dynamics::Sync(s) => (
                None,
                discl_step(self.spec, epsilon, s, &mut self.rng, &mut self.audit)?,
            ),
            Dynamics::Async(s) => {
                let ev = diacl_step(self.spec, epsilon, s, &mut self.rng, &mut self.audit)?;
                let mut flags = vec![false; self.spec.n_agents()];
                flags[ev.active] = ev.experimented;
                (Some(ev.active), flags)
            }
        };
        self.t = t;
        Ok(StepEvent {
            t,
            epsilon,
            active,
            experimented,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: u64,
    /// `NaN` at `t = 1`.
    pub epsilon: f64,
    pub profile: Profile,
    pub potential: f64,
    pub global_objective: f64,
    pub utilities: Vec<f64>,
    pub active: Option<usize>,
    pub experimented: Vec<bool>,
}

impl StepRecord {
    fn new(spec: &GameSpec, profile: &Profile, ev: Option<&StepEvent>) -> Self {
        let utilities = spec.utilities(profile);
        StepRecord {
            t: ev.map_or(1, |e| e.t),
            epsilon: ev.map_or(f64::NAN, |e| e.epsilon),
            profile: profile.clone(),
            potential: spec.potential(profile),
            global_objective: utilities.iter().sum(),
            utilities,
            active: ev.and_then(|e| e.active),
            experimented: ev.map_or_else(|| vec![false; profile.len()], |e| e.experimented.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub audit_violations: u64,
}

/// Runs `init` and updates `2..=horizon`, recording every step.
pub fn run(
    spec: &GameSpec,
    algorithm: Algorithm,
    schedule: ExplorationSchedule,
    horizon: u64,
    seed: u64,
    async_params: Option<&AsyncParams>,
) -> Result<TrajectoryRecord> {
    run_with(spec, algorithm, schedule, horizon, seed, async_params, false)
}

pub fn run_with(
    spec: &GameSpec,
    algorithm: Algorithm,
    schedule: ExplorationSchedule,
    horizon: u64,
    seed: u64,
    async_params: Option<&AsyncParams>,
    audit: bool,
) -> Result<TrajectoryRecord> {
    if horizon == 0 {
        return Err(Error::Domain("horizon must be >= 1".into()));
    }
    let mut learner = Learner::new(spec, algorithm, schedule, seed, async_params)?.with_audit(audit);
    let mut steps = Vec::with_capacity(horizon as usize);
    steps.push(StepRecord::new(spec, learner.profile(), None));
    while learner.t() < horizon {
        let ev = learner.step()?;
        steps.push(StepRecord::new(spec, learner.profile(), Some(&ev)));
    }
    Ok(TrajectoryRecord {
        algorithm,
        seed,
        steps,
        audit_violations: learner.audit_violations(),
    })
}
