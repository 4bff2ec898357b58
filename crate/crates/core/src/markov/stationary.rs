use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};

use super::matrix::TransitionMatrix;

/// Largest chain solved by dense elimination; `n³/3` flops.
pub const DEFAULT_DENSE_MAX: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Required `‖μᵀP − μᵀ‖₁`.
    pub tol: f64,
    pub max_iter: usize,
    pub dense_max: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            max_iter: 20_000,
            dense_max: DEFAULT_DENSE_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Grassmann–Taksar–Heyman elimination (subtraction free).
    Gth,
    /// Iterative aggregation/disaggregation over a state partition, with
    /// dense elimination on the aggregated chain.
    Aggregation,
    Power,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stationary {
    pub mu: Vec<f64>,
    pub residual: f64,
    pub method: SolverMethod,
    pub iterations: usize,
}

/// `‖vᵀP − vᵀ‖₁`.
pub fn residual(p: &TransitionMatrix, v: &[f64]) -> f64 {
    p.left_mul(v)
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .sum()
}

fn reach(n: usize, succ: impl Fn(usize, &mut Vec<usize>)) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut buf = Vec::new();
    while let Some(u) = queue.pop_front() {
        buf.clear();
        succ(u, &mut buf);
        for &v in &buf {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Whether every state reaches every other along positive entries.
pub fn is_irreducible(p: &TransitionMatrix) -> bool {
    let n = p.len();
    if n == 0 {
        return false;
    }
    let fwd = reach(n, |u, out| out.extend(p.row(u).map(|(j, _)| j)));
    if fwd.iter().any(|&x| !x) {
        return false;
    }
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in p.row(i) {
            pred[j].push(i);
        }
    }
    reach(n, |u, out| out.extend_from_slice(&pred[u]))
        .iter()
        .all(|&x| x)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of an irreducible chain: the gcd of `level(u) + 1 − level(v)`
/// over all edges, with BFS levels from state 0.
pub fn period(p: &TransitionMatrix) -> u64 {
    let n = p.len();
    let mut level = vec![u64::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for (v, _) in p.row(u) {
            if level[v] == u64::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0;
    for u in 0..n {
        if level[u] == u64::MAX {
            continue;
        }
        for (v, _) in p.row(u) {
            if level[v] != u64::MAX {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    g
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub states: usize,
    pub nonzeros: usize,
    pub max_row_sum_error: f64,
    pub min_entry: f64,
    pub irreducible: bool,
    pub period: u64,
}

impl StructureReport {
    pub fn ergodic(&self) -> bool {
        self.irreducible && self.period == 1
    }
}

pub fn check_structure(p: &TransitionMatrix) -> StructureReport {
    let irreducible = is_irreducible(p);
    StructureReport {
        states: p.len(),
        nonzeros: p.nnz(),
        max_row_sum_error: p.max_row_sum_error(),
        min_entry: p.min_entry(),
        irreducible,
        period: if irreducible { period(p) } else { 0 },
    }
}

/// Stationary vector of a dense irreducible stochastic matrix (row-major,
/// overwritten) by GTH elimination.
pub fn gth_dense(a: &mut [f64], n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    for k in (1..n).rev() {
        let s: f64 = a[k * n..k * n + k].iter().sum();
        if !(s > 0.0) {
            return Err(Error::Structural(format!(
                "chain is reducible: state {k} cannot reach lower states"
            )));
        }
        for i in 0..k {
            a[i * n + k] /= s;
        }
        let (upper, lower) = a.split_at_mut(k * n);
        let row_k = &lower[..k];
        for i in 0..k {
            let aik = upper[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for (x, &y) in upper[i * n..i * n + k].iter_mut().zip(row_k) {
                *x += aik * y;
            }
        }
    }
    let mut pi = vec![0.0; n];
    if n == 0 {
        return Ok(pi);
    }
    pi[0] = 1.0;
    for j in 1..n {
        pi[j] = (0..j).map(|i| pi[i] * a[i * n + j]).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    Ok(pi)
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

fn power(p: &TransitionMatrix, mut mu: Vec<f64>, opts: &SolverOptions) -> Result<Stationary> {
    for it in 1..=opts.max_iter {
        let mut next = p.left_mul(&mu);
        normalize(&mut next);
        let r: f64 = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
        mu = next;
        if r <= opts.tol {
            let residual = residual(p, &mu);
            if residual <= opts.tol {
                return Ok(Stationary {
                    mu,
                    residual,
                    method: SolverMethod::Power,
                    iterations: it,
                });
            }
        }
    }
    Err(Error::Structural(format!(
        "power iteration did not reach residual {} in {} sweeps",
        opts.tol, opts.max_iter
    )))
}

/// Koury–McAllister–Stewart aggregation/disaggregation. `blocks[k]` is the
/// block of state `k`; block ids must be `0..nb`.
fn aggregation(p: &TransitionMatrix, blocks: &[u32], opts: &SolverOptions) -> Result<Stationary> {
    let n = p.len();
    let nb = blocks.iter().map(|&b| b as usize + 1).max().unwrap_or(0);
    if nb > opts.dense_max {
        return Err(Error::capacity(
            "aggregated chain",
            nb as u128,
            opts.dense_max as u128,
            "use a coarser partition",
        ));
    }
    let mut size = vec![0usize; nb];
    blocks.iter().for_each(|&b| size[b as usize] += 1);
    let mut mu = vec![1.0 / n as f64; n];
    let mut agg = vec![0.0; nb * nb];
    for it in 1..=opts.max_iter {
        let mut mass = vec![0.0; nb];
        for (k, &b) in blocks.iter().enumerate() {
            mass[b as usize] += mu[k];
        }
        // within-block conditional weights; uniform if a block underflowed
        let weight = |k: usize| {
            let b = blocks[k] as usize;
            if mass[b] > 0.0 {
                mu[k] / mass[b]
            } else {
                1.0 / size[b] as f64
            }
        };
        agg.iter_mut().for_each(|x| *x = 0.0);
        for k in 0..n {
            let w = weight(k);
            if w == 0.0 {
                continue;
            }
            let row = &mut agg[blocks[k] as usize * nb..(blocks[k] as usize + 1) * nb];
            for (j, v) in p.row(k) {
                row[blocks[j] as usize] += w * v;
            }
        }
        let xi = gth_dense(&mut agg, nb)?;
        let z: Vec<f64> = (0..n).map(|k| xi[blocks[k] as usize] * weight(k)).collect();
        let mut next = p.left_mul(&z);
        let r: f64 = next.iter().zip(&z).map(|(a, b)| (a - b).abs()).sum();
        normalize(&mut next);
        mu = next;
        if r <= opts.tol {
            let residual = residual(p, &mu);
            if residual <= opts.tol {
                return Ok(Stationary {
                    mu,
                    residual,
                    method: SolverMethod::Aggregation,
                    iterations: it,
                });
            }
        }
    }
    Err(Error::Structural(format!(
        "aggregation did not reach residual {} in {} sweeps",
        opts.tol, opts.max_iter
    )))
}

fn require_irreducible(p: &TransitionMatrix) -> Result<()> {
    if is_irreducible(p) {
        Ok(())
    } else {
        Err(Error::Structural(
            "transition matrix is reducible; the pair state space is inconsistent".into(),
        ))
    }
}

/// Unique stationary distribution: GTH up to `dense_max` states, power
/// iteration beyond.
pub fn stationary_distribution(p: &TransitionMatrix, opts: &SolverOptions) -> Result<Stationary> {
    require_irreducible(p)?;
    if p.len() <= opts.dense_max {
        let mut d = p.to_dense();
        let mu = gth_dense(&mut d, p.len())?;
        let residual = residual(p, &mu);
        return Ok(Stationary {
            mu,
            residual,
            method: SolverMethod::Gth,
            iterations: 1,
        });
    }
    power(p, vec![1.0 / p.len() as f64; p.len()], opts)
}

/// As [`stationary_distribution`], but large chains are solved by
/// aggregation over the given partition.
pub fn stationary_distribution_blocked(
    p: &TransitionMatrix,
    blocks: &[u32],
    opts: &SolverOptions,
) -> Result<Stationary> {
    if p.len() <= opts.dense_max {
        return stationary_distribution(p, opts);
    }
    require_irreducible(p)?;
    assert_eq!(blocks.len(), p.len());
    aggregation(p, blocks, opts)
}

pub fn stationary_power(p: &TransitionMatrix, opts: &SolverOptions) -> Result<Stationary> {
    require_irreducible(p)?;
    power(p, vec![1.0 / p.len() as f64; p.len()], opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> TransitionMatrix {
        TransitionMatrix::from_dense(&[0.9, 0.1, 0.2, 0.8], 2, 0.1)
    }

    #[test]
    fn gth_two_state() {
        let s = stationary_distribution(&two_state(), &SolverOptions::default()).unwrap();
        assert!((s.mu[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!(s.residual < 1e-15);
    }

    #[test]
    fn doubly_stochastic_is_uniform() {
        let d = [0.5, 0.3, 0.2, 0.2, 0.5, 0.3, 0.3, 0.2, 0.5];
        let p = TransitionMatrix::from_dense(&d, 3, 0.1);
        let s = stationary_distribution(&p, &SolverOptions::default()).unwrap();
        assert!(s.mu.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn reducible_is_structural_error() {
        let p = TransitionMatrix::from_dense(&[1.0, 0.0, 0.5, 0.5], 2, 0.1);
        assert!(!is_irreducible(&p));
        assert!(matches!(
            stationary_distribution(&p, &SolverOptions::default()),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn period_of_cycles() {
        let cycle = TransitionMatrix::from_dense(&[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0], 3, 0.1);
        assert_eq!(period(&cycle), 3);
        assert_eq!(period(&two_state()), 1);
        let flip = TransitionMatrix::from_dense(&[0.0, 1.0, 1.0, 0.0], 2, 0.1);
        assert_eq!(check_structure(&flip).period, 2);
    }

    #[test]
    fn iterative_solvers_agree_with_gth() {
        // lazy random walk on a ring of 12 with a drift
        let n = 12;
        let rows = (0..n)
            .map(|i| {
                vec![
                    (i as u32, 0.5),
                    (((i + 1) % n) as u32, 0.35),
                    (((i + n - 1) % n) as u32, 0.15),
                ]
            })
            .collect();
        let p = TransitionMatrix::from_rows(rows, 0.1);
        let exact = stationary_distribution(&p, &SolverOptions::default()).unwrap();
        let opts = SolverOptions {
            dense_max: 4,
            ..SolverOptions::default()
        };
        let blocks: Vec<u32> = (0..n as u32).map(|k| k / 4).collect();
        let agg = stationary_distribution_blocked(&p, &blocks, &opts).unwrap();
        let pow = stationary_power(&p, &opts).unwrap();
        for k in 0..n {
            assert!((agg.mu[k] - exact.mu[k]).abs() < 1e-12);
            assert!((pow.mu[k] - exact.mu[k]).abs() < 1e-12);
        }
        assert_eq!(agg.method, SolverMethod::Aggregation);
    }
}
