use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, MStarMode, WeightField, DEFAULT_M_STAR_CAP};
use crate::geometry::{boundary_warnings, CameraControl, CameraModel, GridWorld};
use crate::learning::{check_m, Algorithm, AsyncParams, ExplorationSchedule, MChoice};
use crate::markov::{DEFAULT_DENSE_MAX, DEFAULT_STATE_CAP};
use crate::oracles::DEFAULT_ORACLE_CAP;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: i32,
    pub x_max: i32,
    pub y_min: i32,
    pub y_max: i32,
}

/// Weight field: one row per `y` (from `y_min` up), one entry per `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightsConfig {
    Uniform(f64),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub grid: GridConfig,
    pub camera: CameraModel,
    pub controls: Vec<CameraControl>,
    pub weights: WeightsConfig,
    pub n_agents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// Constant rate of the homogeneous variants.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Upper multiplier of the experiment exponents, `m_i ∈ (2m*, Km*]`.
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default = "default_m_star_mode")]
    pub m_star: MStarMode,
    /// Explicit experiment exponents, one per agent.
    #[serde(default)]
    pub m: Option<Vec<f64>>,
}

fn default_m_star_mode() -> MStarMode {
    MStarMode::Exact
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            epsilon: None,
            k: None,
            m_star: MStarMode::Exact,
            m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write one CSV trace per run.
    pub traces: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            traces: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapsConfig {
    /// Profile × deviation checks allowed for exhaustive oracles.
    pub oracle: u128,
    /// Profile × deviation checks allowed for exact `m*`.
    pub m_star: u128,
    /// Pair states allowed in a Markov chain.
    pub states: usize,
    /// Largest chain solved by dense elimination.
    pub dense: usize,
}

impl Default for CapsConfig {
    fn default() -> Self {
        CapsConfig {
            oracle: DEFAULT_ORACLE_CAP,
            m_star: DEFAULT_M_STAR_CAP,
            states: DEFAULT_STATE_CAP,
            dense: DEFAULT_DENSE_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Number of equal time buckets covering `[1, T]`.
    pub buckets: usize,
    /// Fraction of the horizon forming the final window.
    pub final_window: f64,
    /// Two-sided confidence level of the reported intervals.
    pub confidence: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            buckets: 10,
            final_window: 0.1,
            confidence: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarkovConfig {
    pub epsilons: Vec<f64>,
    /// Rate ladder for the resistance fits.
    pub resistance_epsilons: Vec<f64>,
}

impl Default for MarkovConfig {
    fn default() -> Self {
        MarkovConfig {
            epsilons: vec![0.2, 0.1, 0.05],
            resistance_epsilons: vec![0.1, 0.05, 0.025],
        }
    }
}

/// A complete experiment description, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameConfig,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    pub horizon: u64,
    #[serde(default = "one")]
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub caps: CapsConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub markov: MarkovConfig,
}

fn one() -> u64 {
    1
}

/// The shipped benchmark instance: 4×4 grid, two agents, full disks of
/// radius 1.0 and 1.6, two weight clusters in opposite corners.
pub const BENCHMARK_JSON: &str = include_str!("../../../../configs/benchmark.json");

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn benchmark() -> Self {
        Self::from_json(BENCHMARK_JSON).expect("shipped benchmark config is valid")
    }

    /// Collects every rule violation, each prefixed with its field path.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let g = &self.game;
        if g.grid.x_min > g.grid.x_max || g.grid.y_min > g.grid.y_max {
            errs.push(format!(
                "game.grid: empty or disconnected grid [{}, {}] x [{}, {}]",
                g.grid.x_min, g.grid.x_max, g.grid.y_min, g.grid.y_max
            ));
        }
        let (w, h) = (
            i64::from(g.grid.x_max) - i64::from(g.grid.x_min) + 1,
            i64::from(g.grid.y_max) - i64::from(g.grid.y_min) + 1,
        );
        match &g.weights {
            WeightsConfig::Uniform(v) => {
                if !(*v >= 0.0 && v.is_finite()) {
                    errs.push(format!("game.weights: must be finite and >= 0, got {v}"));
                }
            }
            WeightsConfig::Rows(rows) => {
                if rows.len() as i64 != h {
                    errs.push(format!("game.weights: expected {h} rows, got {}", rows.len()));
                }
                for (y, row) in rows.iter().enumerate() {
                    if row.len() as i64 != w {
                        errs.push(format!(
                            "game.weights[{y}]: expected {w} entries, got {}",
                            row.len()
                        ));
                    }
                    for (x, v) in row.iter().enumerate() {
                        if !(*v >= 0.0 && v.is_finite()) {
                            errs.push(format!("game.weights[{y}][{x}]: must be finite and >= 0, got {v}"));
                        }
                    }
                }
            }
        }
        if g.n_agents == 0 {
            errs.push("game.n_agents: need at least one agent".into());
        }
        if g.controls.is_empty() {
            errs.push("game.controls: the control set must be nonempty".into());
        }
        if self.horizon == 0 {
            errs.push("horizon: must be >= 1".into());
        }
        if self.replications == 0 {
            errs.push("replications: must be >= 1".into());
        }
        // smallest |F_i(a)| over cells: a corner, an end of a line or the
        // single cell
        let min_deg = if w == 1 && h == 1 {
            0
        } else if w == 1 || h == 1 {
            1
        } else {
            2
        };
        let min_f = (1 + min_deg) * g.controls.len();
        if !self.algorithm.is_async() && min_f < 2 {
            errs.push(format!(
                "game: {} needs |F_i(a)| >= 2 at every cell, but some cell has {min_f}",
                self.algorithm.name()
            ));
        }
        let s = &self.schedule;
        if self.algorithm.is_homogeneous() {
            match s.epsilon {
                Some(e) if e > 0.0 && e <= 0.5 => {}
                Some(e) => errs.push(format!("schedule.epsilon: must lie in (0, 1/2], got {e}")),
                None => errs.push(format!(
                    "schedule.epsilon: required by {}",
                    self.algorithm.name()
                )),
            }
        } else if s.epsilon.is_some() {
            errs.push(format!(
                "schedule.epsilon: {} uses a diminishing rate; remove the constant",
                self.algorithm.name()
            ));
        }
        if self.algorithm.is_async() {
            match (s.k, &s.m) {
                (None, _) => errs.push(format!("schedule.k: required by {}", self.algorithm.name())),
                (Some(k), _) if !(k >= 2.0) => {
                    errs.push(format!("schedule.k: must be >= 2, got {k}"))
                }
                (Some(k), None) if k == 2.0 => errs.push(
                    "schedule.k: K = 2 makes the interval (2m*, Km*] for m_i empty; use K > 2 or give schedule.m"
                        .into(),
                ),
                _ => {}
            }
            if let Some(m) = &s.m {
                if m.len() != g.n_agents {
                    errs.push(format!(
                        "schedule.m: expected {} entries, got {}",
                        g.n_agents,
                        m.len()
                    ));
                }
            }
            if min_f < 3 {
                errs.push(format!(
                    "game: {} needs |F_i(a)| >= 3 at every cell, but some cell has {min_f}",
                    self.algorithm.name()
                ));
            }
        } else if s.m.is_some() || s.k.is_some() {
            errs.push(format!(
                "schedule: k and m apply to the asynchronous learners only, not {}",
                self.algorithm.name()
            ));
        }
        let mc = &self.metrics;
        if mc.buckets == 0 {
            errs.push("metrics.buckets: must be >= 1".into());
        }
        if !(mc.final_window > 0.0 && mc.final_window <= 1.0) {
            errs.push(format!("metrics.final_window: must lie in (0, 1], got {}", mc.final_window));
        }
        if !(mc.confidence > 0.0 && mc.confidence < 1.0) {
            errs.push(format!("metrics.confidence: must lie in (0, 1), got {}", mc.confidence));
        }
        for (k, e) in self.markov.epsilons.iter().enumerate() {
            if !(*e > 0.0 && *e <= 0.5) {
                errs.push(format!("markov.epsilons[{k}]: must lie in (0, 1/2], got {e}"));
            }
        }
        for (k, e) in self.markov.resistance_epsilons.iter().enumerate() {
            if !(*e > 0.0 && *e <= 0.5) {
                errs.push(format!("markov.resistance_epsilons[{k}]: must lie in (0, 1/2], got {e}"));
            }
        }
        if self.markov.resistance_epsilons.len() == 1 {
            errs.push("markov.resistance_epsilons: a slope needs at least two rates".into());
        }
        if errs.is_empty() {
            // the remaining rules live in the game constructor
            self.game_spec().map(|_| ())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn world(&self) -> Result<GridWorld> {
        let g = &self.game.grid;
        GridWorld::new(g.x_min, g.x_max, g.y_min, g.y_max)
    }

    pub fn game_spec(&self) -> Result<GameSpec> {
        let world = self.world()?;
        let weights = match &self.game.weights {
            WeightsConfig::Uniform(v) => WeightField::uniform(&world, *v)?,
            WeightsConfig::Rows(rows) => {
                // cells are ordered row by row from y_min
                WeightField::new(&world, rows.iter().flatten().copied().collect())?
            }
        };
        GameSpec::new(
            world,
            weights,
            self.game.camera,
            self.game.controls.clone(),
            self.game.n_agents,
        )
        .map_err(prefix_game)
    }

    /// Cell centers lying on a footprint boundary, where rounding decides
    /// membership.
    pub fn boundary_warnings(&self) -> Result<Vec<String>> {
        let world = self.world()?;
        let hits = boundary_warnings(&world, &self.game.controls, &self.game.camera)?;
        let mut per_control = vec![0usize; self.game.controls.len()];
        for (_, c, _) in &hits {
            per_control[*c] += 1;
        }
        Ok(per_control
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(c, n)| {
                format!("game.controls[{c}]: {n} cell centers lie on a footprint boundary; membership there is decided by the closed inequality")
            })
            .collect())
    }

    pub fn m_star(&self, spec: &GameSpec) -> Result<f64> {
        spec.m_star(self.schedule.m_star, self.caps.m_star)
    }

    /// Schedule and, for the asynchronous learners, `K`, `m*` and the
    /// exponent choice.
    pub fn learner_setup(&self, spec: &GameSpec) -> Result<(ExplorationSchedule, Option<AsyncParams>)> {
        let d = spec.world().diameter();
        let params = if self.algorithm.is_async() {
            let k = self.schedule.k.expect("validated");
            let m_star = self.m_star(spec)?;
            let m_choice = match &self.schedule.m {
                Some(m) => {
                    let errs: Vec<String> = m
                        .iter()
                        .enumerate()
                        .filter_map(|(i, &mi)| {
                            check_m(mi, k, m_star).err().map(|e| format!("schedule.m[{i}]: {e}"))
                        })
                        .collect();
                    if !errs.is_empty() {
                        return Err(Error::Validation(errs));
                    }
                    MChoice::Explicit(m.clone())
                }
                None => MChoice::Random { k },
            };
            Some(AsyncParams { k, m_star, m_choice })
        } else {
            None
        };
        let schedule = match (self.algorithm, &params) {
            (Algorithm::Discl, _) => ExplorationSchedule::synchronous(spec.n_agents(), d),
            (Algorithm::Diacl, Some(p)) => ExplorationSchedule::asynchronous(d, p.k, p.m_star),
            _ => ExplorationSchedule::constant(self.schedule.epsilon.expect("validated"))?,
        };
        Ok((schedule, params))
    }
}

fn prefix_game(e: Error) -> Error {
    match e {
        Error::Validation(v) => Error::Validation(
            v.into_iter()
                .map(|m| if m.starts_with("game") { m } else { format!("game.{m}") })
                .collect(),
        ),
        other => other,
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json(&text)
}
