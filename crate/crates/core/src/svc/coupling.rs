//! Pairwise coupling of one-against-one probabilities.
//!
//! Given `r[i][j] ~ P(class i | class i or j)`, the class posterior `p`
//! minimizes `sum_i sum_{j != i} (r[j][i] p_i - r[i][j] p_j)^2` over the
//! probability simplex. The minimizer is found with the fixed-point
//! iteration of Wu, Lin and Weng; if that stalls, the equivalent
//! equality-constrained linear system is solved directly.

use crate::error::{Error, Result};

pub const MAX_ITER: usize = 200;
pub const TOL: f64 = 1e-10;

/// Coupling objective evaluated at `p`.
pub fn coupling_objective(r: &[Vec<f64>], p: &[f64]) -> f64 {
    let c = p.len();
    let mut obj = 0.0;
    for i in 0..c {
        for j in 0..c {
            if i != j {
                let d = r[j][i] * p[i] - r[i][j] * p[j];
                obj += d * d;
            }
        }
    }
    obj
}

fn q_matrix(r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let c = r.len();
    let mut q = vec![vec![0.0; c]; c];
    for t in 0..c {
        for j in 0..c {
            if j != t {
                q[t][t] += r[j][t] * r[j][t];
                q[t][j] = -r[j][t] * r[t][j];
            }
        }
    }
    q
}

fn fixed_point(q: &[Vec<f64>]) -> Option<Vec<f64>> {
    let c = q.len();
    let mut p = vec![1.0 / c as f64; c];
    let mut qp = vec![0.0; c];
    for _ in 0..MAX_ITER {
        let mut pqp = 0.0;
        for t in 0..c {
            qp[t] = (0..c).map(|j| q[t][j] * p[j]).sum();
            pqp += p[t] * qp[t];
        }
        let err = qp.iter().map(|v| (v - pqp).abs()).fold(0.0, f64::max);
        if err < TOL {
            return Some(p);
        }
        for t in 0..c {
            let diff = (-qp[t] + pqp) / q[t][t];
            p[t] += diff;
            pqp = (pqp + diff * (diff * q[t][t] + 2.0 * qp[t])) / (1.0 + diff) / (1.0 + diff);
            for j in 0..c {
                qp[j] = (qp[j] + diff * q[t][j]) / (1.0 + diff);
                p[j] /= 1.0 + diff;
            }
        }
    }
    None
}

/// Solves `[Q 1; 1^T 0] [p; b] = [0; 1]` by Gaussian elimination with
/// partial pivoting.
fn direct(q: &[Vec<f64>]) -> Option<Vec<f64>> {
    let c = q.len();
    let n = c + 1;
    let mut m = vec![vec![0.0; n + 1]; n];
    for i in 0..c {
        m[i][..c].copy_from_slice(&q[i]);
        m[i][c] = 1.0;
        m[c][i] = 1.0;
    }
    m[c][n] = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for k in col..=n {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
        }
    }
    Some((0..c).map(|i| m[i][n] / m[i][i]).collect())
}

/// Class posterior from a `c x c` matrix of pairwise probabilities with
/// `r[i][j] + r[j][i] = 1`. The result lies on the simplex.
pub fn pairwise_coupling(r: &[Vec<f64>]) -> Result<Vec<f64>> {
    let c = r.len();
    if c < 2 || r.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension(format!(
            "pairwise matrix must be square with at least 2 classes, got {c} rows"
        )));
    }
    for i in 0..c {
        for j in 0..c {
            if i != j && !(r[i][j] > 0.0 && r[i][j] < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "pairwise probability r[{i}][{j}] = {} outside (0, 1)",
                    r[i][j]
                )));
            }
        }
    }
    let q = q_matrix(r);
    let mut p = fixed_point(&q)
        .or_else(|| direct(&q))
        .ok_or(Error::NotConverged {
            solver: "pairwise coupling",
            limit: MAX_ITER,
            unit: "iterations",
        })?;
    for v in p.iter_mut() {
        *v = v.max(0.0);
    }
    let sum: f64 = p.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::NotConverged {
            solver: "pairwise coupling",
            limit: MAX_ITER,
            unit: "iterations",
        });
    }
    p.iter_mut().for_each(|v| *v /= sum);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_upper(c: usize, upper: &[f64]) -> Vec<Vec<f64>> {
        let mut r = vec![vec![0.0; c]; c];
        let mut k = 0;
        for i in 0..c {
            for j in i + 1..c {
                r[i][j] = upper[k];
                r[j][i] = 1.0 - upper[k];
                k += 1;
            }
        }
        r
    }

    #[test]
    fn binary_case_is_identity() {
        let p = pairwise_coupling(&from_upper(2, &[0.7])).unwrap();
        assert!((p[0] - 0.7).abs() < 1e-9 && (p[1] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn uniform_inputs_give_uniform_output() {
        for c in 2..7 {
            let r = from_upper(c, &vec![0.5; c * (c - 1) / 2]);
            let p = pairwise_coupling(&r).unwrap();
            for v in p {
                assert!((v - 1.0 / c as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn direct_solve_matches_fixed_point() {
        let r = from_upper(4, &[0.9, 0.6, 0.8, 0.3, 0.55, 0.7]);
        let q = q_matrix(&r);
        let a = fixed_point(&q).unwrap();
        let b = direct(&q).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn extreme_inputs_stay_on_simplex() {
        let r = from_upper(3, &[1e-7, 1.0 - 1e-7, 1e-7]);
        let p = pairwise_coupling(&r).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(pairwise_coupling(&from_upper(2, &[1.0])).is_err());
        assert!(pairwise_coupling(&[vec![0.0]]).is_err());
    }
}
