use serde::Serialize;

use crate::error::{Error, Result};
use crate::learning::ExplorationSchedule;
use crate::oracles::EnumeratedGame;

use super::build::{dhacl_matrix_any, dhacl_row, dhscl_matrix_any, dhscl_row, DhaclBranch};
use super::ergodicity::{ergodicity_coefficient, ergodicity_coefficient_dense};
use super::matrix::{dense_mul, TransitionMatrix};
use super::space::{ChainKind, PairStateSpace};
use super::stationary::{stationary_distribution_blocked, SolverMethod, SolverOptions, Stationary};

/// Largest chain for which products of dense matrices are formed.
pub const DEFAULT_PRODUCT_MAX: usize = 400;

/// A pair state space together with its game, able to build the matrix of
/// either constant-rate learner at any rate.
pub struct Chain<'g, 'a> {
    pub game: &'g EnumeratedGame<'a>,
    pub space: PairStateSpace,
    /// Experiment exponents `m_i` (asynchronous chains only).
    pub m: Option<Vec<f64>>,
}

impl<'g, 'a> Chain<'g, 'a> {
    pub fn synchronous(game: &'g EnumeratedGame<'a>, cap: usize) -> Result<Self> {
        Ok(Chain {
            game,
            space: PairStateSpace::new(game, ChainKind::Synchronous, cap)?,
            m: None,
        })
    }

    pub fn asynchronous(game: &'g EnumeratedGame<'a>, m: Vec<f64>, cap: usize) -> Result<Self> {
        if m.len() != game.spec().n_agents() {
            return Err(Error::Domain(format!(
                "expected {} exponents m_i, got {}",
                game.spec().n_agents(),
                m.len()
            )));
        }
        Ok(Chain {
            game,
            space: PairStateSpace::new(game, ChainKind::Asynchronous, cap)?,
            m: Some(m),
        })
    }

    pub fn kind(&self) -> ChainKind {
        self.space.kind()
    }

    /// Transition matrix at rate `epsilon ∈ (0, ½]`.
    pub fn matrix(&self, epsilon: f64) -> Result<TransitionMatrix> {
        if !(epsilon > 0.0 && epsilon <= 0.5) {
            return Err(Error::Domain(format!("epsilon must lie in (0, 1/2], got {epsilon}")));
        }
        self.matrix_any(epsilon)
    }

    /// Transition matrix at any `epsilon ∈ [0, 1]`; `0` gives the
    /// unperturbed chain.
    pub fn matrix_any(&self, epsilon: f64) -> Result<TransitionMatrix> {
        match &self.m {
            None => dhscl_matrix_any(self.game, &self.space, epsilon),
            Some(m) => dhacl_matrix_any(self.game, &self.space, epsilon, m),
        }
    }

    pub fn stationary(&self, p: &TransitionMatrix, opts: &SolverOptions) -> Result<Stationary> {
        stationary_distribution_blocked(p, &self.space.blocks_by_current(), opts)
    }

    /// Profiles whose diagonal is the stability target: the Nash set for the
    /// synchronous chain, the optimum set for the asynchronous one.
    pub fn target_profiles(&self) -> Vec<usize> {
        match self.kind() {
            ChainKind::Synchronous => self.game.nash_indices(),
            ChainKind::Asynchronous => self.game.optimum_indices(),
        }
    }

    pub fn target_name(&self) -> &'static str {
        match self.kind() {
            ChainKind::Synchronous => "diag(E)",
            ChainKind::Asynchronous => "diag(S*)",
        }
    }
}

/// Closed communicating classes of the support graph (Tarjan, iterative).
pub fn closed_classes(p: &TransitionMatrix) -> Vec<Vec<usize>> {
    let n = p.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(u, pos)) = call.last() {
            let cols = p.row_cols(u);
            if pos < cols.len() {
                let v = cols[pos] as usize;
                call.last_mut().expect("nonempty").1 += 1;
                if index[v] == usize::MAX {
                    index[v] = counter;
                    low[v] = counter;
                    counter += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    call.push((v, 0));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[u]);
                }
                if low[u] == index[u] {
                    let mut c = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp[w] = comps.len();
                        c.push(w);
                        if w == u {
                            break;
                        }
                    }
                    c.sort_unstable();
                    comps.push(c);
                }
            }
        }
    }
    comps
        .into_iter()
        .enumerate()
        .filter(|(ci, c)| {
            c.iter()
                .all(|&u| p.row_cols(u).iter().all(|&v| comp[v as usize] == *ci))
        })
        .map(|(_, c)| c)
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct UnperturbedReport {
    pub recurrent_classes: usize,
    pub recurrent_states: usize,
    /// Whether every recurrent state of the `ε = 0` chain is a diagonal
    /// state `(s, s)`.
    pub all_in_diag: bool,
}

pub fn unperturbed_report(chain: &Chain<'_, '_>) -> Result<UnperturbedReport> {
    let p0 = chain.matrix_any(0.0)?;
    let classes = closed_classes(&p0);
    Ok(UnperturbedReport {
        recurrent_classes: classes.len(),
        recurrent_states: classes.iter().map(Vec::len).sum(),
        all_in_diag: classes.iter().flatten().all(|&k| chain.space.is_diag(k)),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityPoint {
    pub epsilon: f64,
    /// Stationary mass on the diagonal of the target set.
    pub target_mass: f64,
    /// Stationary mass on `diag(A)`.
    pub diag_mass: f64,
    pub top_state: (usize, usize),
    pub top_mass: f64,
    pub top_in_target: bool,
    pub residual: f64,
    pub method: SolverMethod,
    pub iterations: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub chain: &'static str,
    pub target: &'static str,
    pub states: usize,
    pub target_profiles: usize,
    pub points: Vec<StabilityPoint>,
    /// Target mass strictly increases as ε decreases along the ladder.
    pub increasing: bool,
    /// Least-squares slope of `ln(1 − target mass)` against `ln ε`: the
    /// rate at which the off-target mass vanishes.
    pub defect_slope: Option<f64>,
}

/// Stationary masses over a rate ladder.
pub fn stability_support(
    chain: &Chain<'_, '_>,
    epsilons: &[f64],
    opts: &SolverOptions,
) -> Result<StabilityReport> {
    let target = chain.target_profiles();
    let mut target_mask = vec![false; chain.space.len()];
    for k in chain.space.diag_of(&target) {
        target_mask[k] = true;
    }
    let mut points = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let p = chain.matrix(eps)?;
        let st = chain.stationary(&p, opts)?;
        let (top, &top_mass) = st
            .mu
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty chain");
        let diag_mass = (0..chain.space.n_profiles())
            .map(|s| st.mu[chain.space.diag_index(s)])
            .sum();
        points.push(StabilityPoint {
            epsilon: eps,
            target_mass: chain.space.diag_mass(&st.mu, &target),
            diag_mass,
            top_state: chain.space.state(top),
            top_mass,
            top_in_target: target_mask[top],
            residual: st.residual,
            method: st.method,
            iterations: st.iterations,
            lambda: ergodicity_coefficient(&p),
        });
    }
    let mut by_eps: Vec<&StabilityPoint> = points.iter().collect();
    by_eps.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    let increasing = by_eps.windows(2).all(|w| w[1].target_mass > w[0].target_mass);
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.target_mass < 1.0)
        .map(|p| (p.epsilon, 1.0 - p.target_mass))
        .collect();
    let defect_slope = (usable.len() >= 2).then(|| {
        let (e, v): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
        loglog_slope(&e, &v)
    });
    Ok(StabilityReport {
        chain: match chain.kind() {
            ChainKind::Synchronous => "dhscl",
            ChainKind::Asynchronous => "dhacl",
        },
        target: chain.target_name(),
        states: chain.space.len(),
        target_profiles: target.len(),
        points,
        increasing,
        defect_slope,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_slope(&lx, &ly)
}

pub(crate) fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Fitted against predicted resistance of one transition.
#[derive(Debug, Clone, Serialize)]
pub struct ResistanceRow {
    pub from: (usize, usize),
    pub to: (usize, usize),
    /// `"exploit/experiment"` counts for the synchronous chain, the branch
    /// name for the asynchronous one.
    pub label: String,
    pub predicted: f64,
    pub fitted: f64,
    pub probabilities: Vec<f64>,
}

impl ResistanceRow {
    pub fn error(&self) -> f64 {
        (self.fitted - self.predicted).abs()
    }
}

/// Resistances of every transition out of state `k` of the synchronous
/// chain. The predicted exponent is `|Λ₂|`, the number of agents whose next
/// action differs from their selected one.
pub fn dhscl_resistances(chain: &Chain<'_, '_>, k: usize, ladder: &[f64]) -> Result<Vec<ResistanceRow>> {
    if chain.kind() != ChainKind::Synchronous {
        return Err(Error::Domain("expected a synchronous chain".into()));
    }
    let g = chain.game;
    let e = &g.enumeration;
    let n = g.spec().n_agents();
    let (s0, s1) = chain.space.state(k);
    let keep: Vec<usize> = (0..n).map(|i| super::build::dhscl_selected(g, s0, s1, i)).collect();
    let rows: Vec<Vec<(u32, f64)>> = ladder.iter().map(|&eps| dhscl_row(g, &chain.space, k, eps)).collect();
    Ok(rows[0]
        .iter()
        .enumerate()
        .map(|(idx, &(target, _))| {
            let (_, s2) = chain.space.state(target as usize);
            let experimenters = (0..n).filter(|&i| e.agent_action_index(s2, i) != keep[i]).count();
            let probabilities: Vec<f64> = rows.iter().map(|r| r[idx].1).collect();
            ResistanceRow {
                from: (s0, s1),
                to: (s1, s2),
                label: format!("{}/{}", n - experimenters, experimenters),
                predicted: experimenters as f64,
                fitted: loglog_slope(ladder, &probabilities),
                probabilities,
            }
        })
        .collect())
}

/// Resistances of the stay, revert and experiment branches of every agent
/// out of state `k` of the asynchronous chain, each taken on its own: `m_i`
/// for experiments, `Ψ_i − (u_i(s¹) − Δ_i) = max(0, −ρ_i)` for staying and
/// `Ψ_i − (u_i(s⁰) − Δ_i) = max(0, ρ_i)` for reverting.
pub fn dhacl_resistances(chain: &Chain<'_, '_>, k: usize, ladder: &[f64]) -> Result<Vec<ResistanceRow>> {
    let m = chain
        .m
        .as_deref()
        .ok_or_else(|| Error::Domain("expected an asynchronous chain".into()))?;
    let rows = ladder
        .iter()
        .map(|&eps| dhacl_row(chain.game, &chain.space, k, eps, m))
        .collect::<Result<Vec<_>>>()?;
    let from = chain.space.state(k);
    Ok(rows[0]
        .iter()
        .enumerate()
        .map(|(idx, en)| {
            let predicted = match en.branch {
                DhaclBranch::Experiment => m[en.agent],
                DhaclBranch::Stay => (-en.rho).max(0.0),
                DhaclBranch::Revert => en.rho.max(0.0),
                DhaclBranch::Merged => 0.0,
            };
            let probabilities: Vec<f64> = rows.iter().map(|r| r[idx].prob).collect();
            ResistanceRow {
                from,
                to: chain.space.state(en.target as usize),
                label: format!("{:?} agent {}", en.branch, en.agent).to_lowercase(),
                predicted,
                fitted: loglog_slope(ladder, &probabilities),
                probabilities,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakErgodicityReport {
    pub block_len: u64,
    /// `k_i` for each block start.
    pub block_starts: Vec<u64>,
    /// `1 − λ(P(k_i, k_{i+1}))`.
    pub summands: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Slope of the partial sums against `ln k_{i+1}` over the second half
    /// of the blocks (positive for logarithmic growth).
    pub log_slope: Option<f64>,
    /// Slope against `k_{i+1}` over the same range (positive for linear
    /// growth).
    pub linear_slope: Option<f64>,
}

/// Partial sums of `1 − λ` over blocks `k_i = (D+1)i` under a (possibly
/// time-varying) schedule, up to `horizon`. The transition into step `t`
/// uses `ε(t)`.
pub fn weak_ergodicity_diagnostic(
    chain: &Chain<'_, '_>,
    schedule: &ExplorationSchedule,
    horizon: u64,
    product_max: usize,
) -> Result<WeakErgodicityReport> {
    let n = chain.space.len();
    if n > product_max {
        return Err(Error::capacity(
            "dense matrix products",
            n as u128,
            product_max as u128,
            "use a smaller instance",
        ));
    }
    let block_len = u64::from(chain.game.spec().world().diameter()) + 1;
    let mut block_starts = Vec::new();
    let mut summands = Vec::new();
    let mut partial_sums = Vec::new();
    let mut total = 0.0;
    let mut i = 1;
    while block_len * (i + 1) <= horizon {
        let (k0, k1) = (block_len * i, block_len * (i + 1));
        let mut prod: Option<Vec<f64>> = None;
        for t in k0 + 1..=k1 {
            // ε(t) needs t ≥ 2
            let eps = schedule.epsilon_at(t.max(2))?;
            let pt = chain.matrix_any(eps)?.to_dense();
            prod = Some(match prod {
                None => pt,
                Some(acc) => dense_mul(&acc, &pt, n),
            });
        }
        let lam = ergodicity_coefficient_dense(prod.as_deref().expect("block has a step"), n);
        total += 1.0 - lam;
        block_starts.push(k0);
        summands.push(1.0 - lam);
        partial_sums.push(total);
        i += 1;
    }
    let half = partial_sums.len() / 2;
    let tail = &partial_sums[half..];
    let ends: Vec<f64> = block_starts[half..].iter().map(|&k| (k + block_len) as f64).collect();
    let fit = tail.len() >= 2;
    let log_slope = fit.then(|| {
        let lx: Vec<f64> = ends.iter().map(|x| x.ln()).collect();
        linear_slope(&lx, tail)
    });
    let linear_slope_v = fit.then(|| linear_slope(&ends, tail));
    Ok(WeakErgodicityReport {
        block_len,
        block_starts,
        summands,
        partial_sums,
        log_slope,
        linear_slope: linear_slope_v,
    })
}
