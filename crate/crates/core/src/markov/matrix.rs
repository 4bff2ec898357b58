use std::io::Write;

use crate::error::{Error, Result};

/// Row-stochastic matrix in compressed sparse row form. Column indices are
/// sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    epsilon: f64,
}

impl TransitionMatrix {
    /// Builds from per-row `(column, probability)` lists; duplicate columns
    /// are summed and zero entries dropped.
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>, epsilon: f64) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            let start = cols.len();
            for (c, v) in row {
                if v == 0.0 {
                    continue;
                }
                if cols.len() > start && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        TransitionMatrix {
            n,
            row_ptr,
            cols,
            vals,
            epsilon,
        }
    }

    pub fn from_dense(dense: &[f64], n: usize, epsilon: f64) -> Self {
        assert_eq!(dense.len(), n * n);
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (j as u32, dense[i * n + j]))
                    .collect()
            })
            .collect();
        Self::from_rows(rows, epsilon)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.vals[r])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn row_cols(&self, i: usize) -> &[u32] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_vals(&self, i: usize) -> &[f64] {
        &self.vals[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = self.row_cols(i);
        match cols.binary_search(&(j as u32)) {
            Ok(k) => self.row_vals(i)[k],
            Err(_) => 0.0,
        }
    }

    /// Largest `|Σ_j P_ij − 1|` over rows.
    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.row_vals(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `vᵀ P`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (j, p) in self.row(i) {
                out[j] += vi * p;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, p) in self.row(i) {
                d[i * self.n + j] = p;
            }
        }
        d
    }

    /// Dense dump: little-endian `u64` n, `f64` ε, then `n²` row-major `f64`.
    pub fn write_dense_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&self.epsilon.to_le_bytes())?;
        let mut row = vec![0.0f64; self.n];
        for i in 0..self.n {
            row.iter_mut().for_each(|x| *x = 0.0);
            for (j, p) in self.row(i) {
                row[j] = p;
            }
            for x in &row {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_dense_binary(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::Structural("truncated dense matrix dump".into());
        let n = u64::from_le_bytes(bytes.get(0..8).ok_or_else(bad)?.try_into().unwrap()) as usize;
        let eps = f64::from_le_bytes(bytes.get(8..16).ok_or_else(bad)?.try_into().unwrap());
        let body = bytes.get(16..16 + 8 * n * n).ok_or_else(bad)?;
        let dense: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self::from_dense(&dense, n, eps))
    }
}

/// Dense row-major product `a · b` of `n × n` matrices.
pub fn dense_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let (brow, crow) = (&b[k * n..(k + 1) * n], &mut c[i * n..(i + 1) * n]);
            for (cj, bj) in crow.iter_mut().zip(brow) {
                *cj += aik * bj;
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_merges_duplicates_and_sorts() {
        let p = TransitionMatrix::from_rows(
            vec![vec![(1, 0.25), (0, 0.5), (1, 0.25)], vec![(1, 1.0), (0, 0.0)]],
            0.1,
        );
        assert_eq!(p.nnz(), 3);
        assert_eq!(p.get(0, 1), 0.5);
        assert_eq!(p.get(1, 0), 0.0);
        assert!(p.max_row_sum_error() < 1e-15);
        assert_eq!(p.left_mul(&[0.5, 0.5]), vec![0.25, 0.75]);
    }

    #[test]
    fn dense_dump_round_trip() {
        let d = vec![0.9, 0.1, 0.2, 0.8];
        let p = TransitionMatrix::from_dense(&d, 2, 0.3);
        let mut buf = Vec::new();
        p.write_dense_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 32);
        assert_eq!(&buf[0..8], &2u64.to_le_bytes());
        let q = TransitionMatrix::read_dense_binary(&buf).unwrap();
        assert_eq!(p, q);
        assert!(TransitionMatrix::read_dense_binary(&buf[..20]).is_err());
    }

    #[test]
    fn dense_product() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![0.0, 1.0, 1.0, 0.0];
        assert_eq!(dense_mul(&a, &b, 2), vec![2.0, 1.0, 4.0, 3.0]);
    }
}
