use super::matrix::TransitionMatrix;

fn overlap(ci: &[u32], vi: &[f64], cj: &[u32], vj: &[f64]) -> f64 {
    let (mut a, mut b, mut s) = (0, 0, 0.0);
    while a < ci.len() && b < cj.len() {
        match ci[a].cmp(&cj[b]) {
            std::cmp::Ordering::Less => a += 1,
            std::cmp::Ordering::Greater => b += 1,
            std::cmp::Ordering::Equal => {
                s += vi[a].min(vj[b]);
                a += 1;
                b += 1;
            }
        }
    }
    s
}

/// `λ(P) = 1 − min_{i,j} Σ_k min(P_ik, P_jk)`. Stops early once two rows
/// with disjoint supports are found.
pub fn ergodicity_coefficient(p: &TransitionMatrix) -> f64 {
    let n = p.len();
    let mut min_overlap: f64 = 1.0;
    for i in 0..n {
        for j in i + 1..n {
            let o = overlap(p.row_cols(i), p.row_vals(i), p.row_cols(j), p.row_vals(j));
            min_overlap = min_overlap.min(o);
            if min_overlap <= 0.0 {
                return 1.0;
            }
        }
    }
    (1.0 - min_overlap).clamp(0.0, 1.0)
}

/// [`ergodicity_coefficient`] of a dense row-major `n × n` matrix.
pub fn ergodicity_coefficient_dense(a: &[f64], n: usize) -> f64 {
    let mut min_overlap: f64 = 1.0;
    for i in 0..n {
        for j in i + 1..n {
            let o: f64 = a[i * n..(i + 1) * n]
                .iter()
                .zip(&a[j * n..(j + 1) * n])
                .map(|(x, y)| x.min(*y))
                .sum();
            min_overlap = min_overlap.min(o);
        }
    }
    (1.0 - min_overlap).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_values() {
        let p = TransitionMatrix::from_dense(&[0.9, 0.1, 0.2, 0.8], 2, 0.1);
        assert!((ergodicity_coefficient(&p) - 0.7).abs() < 1e-15);
        let same = TransitionMatrix::from_dense(&[0.3, 0.7, 0.3, 0.7], 2, 0.1);
        assert_eq!(ergodicity_coefficient(&same), 0.0);
        let id = TransitionMatrix::from_dense(&[1.0, 0.0, 0.0, 1.0], 2, 0.1);
        assert_eq!(ergodicity_coefficient(&id), 1.0);
        let one = TransitionMatrix::from_dense(&[1.0], 1, 0.1);
        assert_eq!(ergodicity_coefficient(&one), 0.0);
        assert!((ergodicity_coefficient_dense(&[0.9, 0.1, 0.2, 0.8], 2) - 0.7).abs() < 1e-15);
    }
}
