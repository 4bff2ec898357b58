use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::learning::{Algorithm, AsyncParams, ExplorationSchedule, Learner};
use crate::oracles::{EnumeratedGame, Enumeration};

use super::config::ExperimentConfig;

pub const TRACE_VERSION: u32 = 1;
const TRACE_COLUMNS: &str = "t,epsilon,potential,global_objective,repeat,in_ne,in_s_star,active";
const TRACE_COLUMNS_NO_ORACLE: &str = "t,epsilon,potential,global_objective,repeat,active";

/// Membership masks over the canonical profile enumeration.
#[derive(Debug, Clone)]
pub struct OracleMasks {
    pub nash: Vec<bool>,
    pub optimum: Vec<bool>,
}

impl OracleMasks {
    pub fn compute(game: &EnumeratedGame<'_>) -> Self {
        OracleMasks {
            nash: game.membership(&game.nash_indices()),
            optimum: game.membership(&game.optimum_indices()),
        }
    }
}

/// Accumulated indicators over a range of steps of one or more runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tally {
    pub steps: u64,
    /// Steps with `z(t) ∈ diag(E)`.
    pub diag_nash: u64,
    /// Steps with `z(t) ∈ diag(S*)`.
    pub diag_optimum: u64,
    pub sum_potential: f64,
    pub sum_global_objective: f64,
}

impl Tally {
    fn add(&mut self, row: &TraceRow) {
        self.steps += 1;
        if row.repeat && row.in_ne == Some(true) {
            self.diag_nash += 1;
        }
        if row.repeat && row.in_s_star == Some(true) {
            self.diag_optimum += 1;
        }
        self.sum_potential += row.potential;
        self.sum_global_objective += row.global_objective;
    }

    fn merge(&mut self, other: &Tally) {
        self.steps += other.steps;
        self.diag_nash += other.diag_nash;
        self.diag_optimum += other.diag_optimum;
        self.sum_potential += other.sum_potential;
        self.sum_global_objective += other.sum_global_objective;
    }
}

/// One line of a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: u64,
    /// `None` at `t = 1`.
    pub epsilon: Option<f64>,
    pub potential: f64,
    pub global_objective: f64,
    /// `s(t) = s(t−1)`, so that `z(t)` is a diagonal state.
    pub repeat: bool,
    pub in_ne: Option<bool>,
    pub in_s_star: Option<bool>,
    pub active: Option<usize>,
}

impl TraceRow {
    fn write<W: Write>(&self, w: &mut W, with_oracle: bool) -> std::io::Result<()> {
        let eps = self.epsilon.map(|e| e.to_string()).unwrap_or_default();
        let active = self.active.map(|a| a.to_string()).unwrap_or_default();
        let b = |x: bool| if x { '1' } else { '0' };
        if with_oracle {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                self.t,
                eps,
                self.potential,
                self.global_objective,
                b(self.repeat),
                b(self.in_ne == Some(true)),
                b(self.in_s_star == Some(true)),
                active
            )
        } else {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.t,
                eps,
                self.potential,
                self.global_objective,
                b(self.repeat),
                active
            )
        }
    }
}

/// Step ranges of the time buckets and the final window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Windows {
    /// Inclusive `[start, end]` per bucket; together they cover `[1, T]`.
    pub buckets: Vec<(u64, u64)>,
    pub final_window: (u64, u64),
}

impl Windows {
    pub fn new(horizon: u64, buckets: usize, final_fraction: f64) -> Self {
        let b = (buckets as u64).min(horizon).max(1);
        let ranges = (0..b)
            .map(|k| (1 + k * horizon / b, (k + 1) * horizon / b))
            .collect();
        let len = ((final_fraction * horizon as f64).round() as u64).clamp(1, horizon);
        Windows {
            buckets: ranges,
            final_window: (horizon - len + 1, horizon),
        }
    }

    fn bucket_of(&self, t: u64) -> usize {
        self.buckets.partition_point(|&(_, end)| end < t)
    }

    fn in_final(&self, t: u64) -> bool {
        t >= self.final_window.0
    }
}

/// Per-run tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTally {
    pub seed: u64,
    pub buckets: Vec<Tally>,
    pub final_window: Tally,
}

impl RunTally {
    fn new(seed: u64, windows: &Windows) -> Self {
        RunTally {
            seed,
            buckets: vec![Tally::default(); windows.buckets.len()],
            final_window: Tally::default(),
        }
    }

    fn add(&mut self, windows: &Windows, row: &TraceRow) {
        self.buckets[windows.bucket_of(row.t)].add(row);
        if windows.in_final(row.t) {
            self.final_window.add(row);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval for `hits` out of `n` at normal quantile `z`.
pub fn wilson(hits: u64, n: u64, z: f64) -> Proportion {
    if n == 0 {
        return Proportion {
            estimate: 0.0,
            lower: 0.0,
            upper: 1.0,
        };
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Proportion {
        estimate: p,
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub t_start: u64,
    pub t_end: u64,
    /// Steps pooled over runs.
    pub steps: u64,
    /// `P(z(t) ∈ diag(E))`.
    pub p_diag_nash: Option<Proportion>,
    /// `P(z(t) ∈ diag(S*))`.
    pub p_diag_optimum: Option<Proportion>,
    pub mean_potential: f64,
    pub mean_global_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFinal {
    pub seed: u64,
    pub p_diag_nash: Option<f64>,
    pub p_diag_optimum: Option<f64>,
}

/// Aggregate of a replicated experiment. Intervals treat the pooled steps
/// as independent trials, so they are narrower than the run-to-run spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub version: u32,
    pub algorithm: Algorithm,
    pub horizon: u64,
    pub replications: u64,
    pub seeds: Vec<u64>,
    pub confidence: f64,
    pub windows: Windows,
    pub nash_profiles: Option<usize>,
    pub optimum_profiles: Option<usize>,
    pub buckets: Vec<BucketSummary>,
    pub final_window: BucketSummary,
    pub per_run_final: Vec<RunFinal>,
    pub warnings: Vec<String>,
}

impl MetricsSummary {
    /// Final-window `P(z ∈ diag(E))` averaged over runs.
    pub fn final_nash(&self) -> Option<f64> {
        self.final_window.p_diag_nash.as_ref().map(|p| p.estimate)
    }

    pub fn final_optimum(&self) -> Option<f64> {
        self.final_window.p_diag_optimum.as_ref().map(|p| p.estimate)
    }
}

fn bucket_summary(range: (u64, u64), t: &Tally, z: f64, with_oracle: bool) -> BucketSummary {
    let n = t.steps.max(1) as f64;
    BucketSummary {
        t_start: range.0,
        t_end: range.1,
        steps: t.steps,
        p_diag_nash: with_oracle.then(|| wilson(t.diag_nash, t.steps, z)),
        p_diag_optimum: with_oracle.then(|| wilson(t.diag_optimum, t.steps, z)),
        mean_potential: t.sum_potential / n,
        mean_global_objective: t.sum_global_objective / n,
    }
}

/// Header fields needed to rebuild a summary from traces.
#[derive(Debug, Clone)]
pub(crate) struct SummaryShape {
    pub algorithm: Algorithm,
    pub horizon: u64,
    pub confidence: f64,
    pub windows: Windows,
    pub nash_profiles: Option<usize>,
    pub optimum_profiles: Option<usize>,
    pub warnings: Vec<String>,
}

/// Folds per-run tallies in the given (seed) order.
pub(crate) fn aggregate(shape: &SummaryShape, runs: &[RunTally]) -> MetricsSummary {
    let with_oracle = shape.nash_profiles.is_some();
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + shape.confidence / 2.0);
    let mut buckets = vec![Tally::default(); shape.windows.buckets.len()];
    let mut fin = Tally::default();
    for r in runs {
        for (acc, b) in buckets.iter_mut().zip(&r.buckets) {
            acc.merge(b);
        }
        fin.merge(&r.final_window);
    }
    let frac = |hits: u64, n: u64| hits as f64 / n.max(1) as f64;
    MetricsSummary {
        version: TRACE_VERSION,
        algorithm: shape.algorithm,
        horizon: shape.horizon,
        replications: runs.len() as u64,
        seeds: runs.iter().map(|r| r.seed).collect(),
        confidence: shape.confidence,
        windows: shape.windows.clone(),
        nash_profiles: shape.nash_profiles,
        optimum_profiles: shape.optimum_profiles,
        buckets: shape
            .windows
            .buckets
            .iter()
            .zip(&buckets)
            .map(|(&range, t)| bucket_summary(range, t, z, with_oracle))
            .collect(),
        final_window: bucket_summary(shape.windows.final_window, &fin, z, with_oracle),
        per_run_final: runs
            .iter()
            .map(|r| RunFinal {
                seed: r.seed,
                p_diag_nash: with_oracle
                    .then(|| frac(r.final_window.diag_nash, r.final_window.steps)),
                p_diag_optimum: with_oracle
                    .then(|| frac(r.final_window.diag_optimum, r.final_window.steps)),
            })
            .collect(),
        warnings: shape.warnings.clone(),
    }
}

/// Everything a run needs, computed once per experiment.
pub struct Prepared<'a> {
    pub config: &'a ExperimentConfig,
    pub spec: &'a GameSpec,
    pub schedule: ExplorationSchedule,
    pub async_params: Option<AsyncParams>,
    pub masks: Option<OracleMasks>,
    pub warnings: Vec<String>,
}

impl<'a> Prepared<'a> {
    pub fn new(config: &'a ExperimentConfig, spec: &'a GameSpec) -> Result<Self> {
        let (schedule, async_params) = config.learner_setup(spec)?;
        let mut warnings = config.boundary_warnings()?;
        let masks = match EnumeratedGame::new(spec, config.caps.oracle) {
            Ok(g) => Some(OracleMasks::compute(&g)),
            Err(e @ Error::Capacity { .. }) => {
                warnings.push(format!("in_ne and in_s_star omitted: {e}"));
                None
            }
            Err(e) => return Err(e),
        };
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(Prepared {
            config,
            spec,
            schedule,
            async_params,
            masks,
            warnings,
        })
    }

    fn shape(&self) -> SummaryShape {
        let c = self.config;
        SummaryShape {
            algorithm: c.algorithm,
            horizon: c.horizon,
            confidence: c.metrics.confidence,
            windows: Windows::new(c.horizon, c.metrics.buckets, c.metrics.final_window),
            nash_profiles: self.masks.as_ref().map(|m| m.nash.iter().filter(|&&x| x).count()),
            optimum_profiles: self
                .masks
                .as_ref()
                .map(|m| m.optimum.iter().filter(|&&x| x).count()),
            warnings: self.warnings.clone(),
        }
    }

    /// One run, streaming its trace to `trace` when given.
    pub fn run_one<W: Write>(&self, seed: u64, mut trace: Option<W>) -> Result<RunTally> {
        let c = self.config;
        let windows = Windows::new(c.horizon, c.metrics.buckets, c.metrics.final_window);
        let mut tally = RunTally::new(seed, &windows);
        let with_oracle = self.masks.is_some();
        if let Some(w) = trace.as_mut() {
            write_trace_header(w, c.algorithm, seed, with_oracle)?;
        }
        let enumeration = self.masks.as_ref().map(|_| Enumeration::new(self.spec));
        let mut learner = Learner::new(
            self.spec,
            c.algorithm,
            self.schedule,
            seed,
            self.async_params.as_ref(),
        )?;
        let mut prev = learner.profile().clone();
        let mut event = None;
        for t in 1..=c.horizon {
            if t > 1 {
                event = Some(learner.step()?);
            }
            let profile = learner.profile();
            let (in_ne, in_s_star) = match (&self.masks, &enumeration) {
                (Some(m), Some(e)) => {
                    let k = e.index(profile);
                    (Some(m.nash[k]), Some(m.optimum[k]))
                }
                _ => (None, None),
            };
            let row = TraceRow {
                t,
                epsilon: event.as_ref().map(|e| e.epsilon),
                potential: self.spec.potential(profile),
                global_objective: self.spec.global_objective(profile),
                repeat: *profile == prev,
                in_ne,
                in_s_star,
                active: event.as_ref().and_then(|e| e.active),
            };
            if let Some(w) = trace.as_mut() {
                row.write(w, with_oracle)?;
            }
            tally.add(&windows, &row);
            prev.clone_from(profile);
        }
        if let Some(w) = trace.as_mut() {
            w.flush()?;
        }
        Ok(tally)
    }
}

fn write_trace_header<W: Write>(w: &mut W, algorithm: Algorithm, seed: u64, with_oracle: bool) -> Result<()> {
    writeln!(
        w,
        "# vsn-coverage trace v{TRACE_VERSION} algorithm={} seed={seed}",
        algorithm.name()
    )?;
    writeln!(w, "{}", if with_oracle { TRACE_COLUMNS } else { TRACE_COLUMNS_NO_ORACLE })?;
    Ok(())
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("run-{seed}.csv"))
}

pub fn summary_path(dir: &Path) -> PathBuf {
    dir.join("summary.json")
}

/// Runs `R` replications with seeds `base, …, base + R − 1` in parallel and
/// folds them in seed order. With `out` given, writes one CSV per run (if
/// traces are enabled) and `summary.json` there.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<MetricsSummary> {
    let spec = config.game_spec()?;
    let prep = Prepared::new(config, &spec)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let seeds: Vec<u64> = (0..config.replications).map(|r| config.seed + r).collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| match out {
            Some(dir) if config.output.traces => {
                let f = BufWriter::new(File::create(trace_path(dir, seed))?);
                prep.run_one(seed, Some(f))
            }
            _ => prep.run_one(seed, None::<std::io::Sink>),
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = aggregate(&prep.shape(), &runs);
    if let Some(dir) = out {
        let f = BufWriter::new(File::create(summary_path(dir))?);
        serde_json::to_writer_pretty(f, &summary)?;
    }
    Ok(summary)
}

fn parse_err(path: &Path, line: usize, what: &str) -> Error {
    Error::Validation(vec![format!("{}:{line}: {what}", path.display())])
}

/// Reads a trace written by [`run_experiment`].
pub fn read_trace(path: &Path) -> Result<(u64, Vec<TraceRow>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| parse_err(path, 1, "empty trace"))??;
    let expected = format!("# vsn-coverage trace v{TRACE_VERSION} ");
    if !header.starts_with(&expected) {
        return Err(parse_err(path, 1, "unsupported trace version"));
    }
    let seed = header
        .split_whitespace()
        .find_map(|f| f.strip_prefix("seed="))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(path, 1, "missing seed"))?;
    let columns = lines.next().ok_or_else(|| parse_err(path, 2, "missing column line"))??;
    let with_oracle = match columns.as_str() {
        TRACE_COLUMNS => true,
        TRACE_COLUMNS_NO_ORACLE => false,
        _ => return Err(parse_err(path, 2, "unexpected columns")),
    };
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let lineno = k + 3;
        let f: Vec<&str> = line.split(',').collect();
        let want = if with_oracle { 8 } else { 6 };
        if f.len() != want {
            return Err(parse_err(path, lineno, "wrong field count"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(path, lineno, "bad number"));
        let flag = |s: &str| match s {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(parse_err(path, lineno, "bad flag")),
        };
        let opt_usize = |s: &str| {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| parse_err(path, lineno, "bad agent index"))
            }
        };
        rows.push(TraceRow {
            t: f[0].parse().map_err(|_| parse_err(path, lineno, "bad step"))?,
            epsilon: if f[1].is_empty() { None } else { Some(num(f[1])?) },
            potential: num(f[2])?,
            global_objective: num(f[3])?,
            repeat: flag(f[4])?,
            in_ne: if with_oracle { Some(flag(f[5])?) } else { None },
            in_s_star: if with_oracle { Some(flag(f[6])?) } else { None },
            active: opt_usize(f[want - 1])?,
        });
    }
    Ok((seed, rows))
}

#[derive(Debug, Clone, Serialize)]
pub struct RecheckReport {
    pub runs: usize,
    pub rows: u64,
    pub matches: bool,
    /// Top-level summary fields that differ.
    pub mismatched: Vec<String>,
}

/// Rebuilds the summary from the traces in `dir` and compares it with the
/// stored `summary.json`.
pub fn recheck(dir: &Path) -> Result<RecheckReport> {
    let stored: MetricsSummary =
        serde_json::from_reader(BufReader::new(File::open(summary_path(dir))?))?;
    let shape = SummaryShape {
        algorithm: stored.algorithm,
        horizon: stored.horizon,
        confidence: stored.confidence,
        windows: stored.windows.clone(),
        nash_profiles: stored.nash_profiles,
        optimum_profiles: stored.optimum_profiles,
        warnings: stored.warnings.clone(),
    };
    let mut runs = Vec::with_capacity(stored.seeds.len());
    let mut total_rows = 0;
    for &seed in &stored.seeds {
        let path = trace_path(dir, seed);
        if !path.exists() {
            return Err(Error::Config(format!(
                "{} is missing; recheck needs a run with output.traces = true",
                path.display()
            )));
        }
        let (file_seed, rows) = read_trace(&path)?;
        if file_seed != seed {
            return Err(parse_err(&path, 1, "seed does not match the file name"));
        }
        let mut tally = RunTally::new(seed, &shape.windows);
        for row in &rows {
            if row.t == 0 || row.t > shape.horizon {
                return Err(parse_err(&path, 0, "step outside the horizon"));
            }
            tally.add(&shape.windows, row);
        }
        total_rows += rows.len() as u64;
        runs.push(tally);
    }
    let rebuilt = aggregate(&shape, &runs);
    let a = serde_json::to_value(&stored)?;
    let b = serde_json::to_value(&rebuilt)?;
    let mismatched: Vec<String> = match (a, b) {
        (serde_json::Value::Object(a), serde_json::Value::Object(b)) => a
            .iter()
            .filter(|(k, v)| b.get(*k) != Some(v))
            .map(|(k, _)| k.clone())
            .collect(),
        _ => vec!["<root>".into()],
    };
    Ok(RecheckReport {
        runs: runs.len(),
        rows: total_rows,
        matches: mismatched.is_empty(),
        mismatched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_cover_the_horizon() {
        let w = Windows::new(95, 10, 0.1);
        assert_eq!(w.buckets.first().unwrap().0, 1);
        assert_eq!(w.buckets.last().unwrap().1, 95);
        for pair in w.buckets.windows(2) {
            assert_eq!(pair[0].1 + 1, pair[1].0);
        }
        assert_eq!(w.final_window, (86, 95));
        assert_eq!(w.bucket_of(1), 0);
        assert_eq!(w.bucket_of(95), 9);
        let tiny = Windows::new(3, 10, 0.1);
        assert_eq!(tiny.buckets, vec![(1, 1), (2, 2), (3, 3)]);
        assert_eq!(tiny.final_window, (3, 3));
    }

    #[test]
    fn wilson_interval_brackets_estimate() {
        let p = wilson(30, 100, 1.959963984540054);
        assert!(p.lower < 0.3 && 0.3 < p.upper);
        // textbook value for 30/100 at 95%
        assert!((p.lower - 0.2189).abs() < 1e-4 && (p.upper - 0.3958).abs() < 1e-4);
        let all = wilson(10, 10, 1.96);
        assert_eq!(all.upper, 1.0);
    }
}
