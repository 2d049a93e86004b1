//! Sigmoid calibration of decision values.

use crate::error::{Error, Result};

/// Parameters of `P(y = +1 | f) = 1 / (1 + exp(a f + b))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigmoid {
    pub a: f64,
    pub b: f64,
}

impl Sigmoid {
    pub fn probability(&self, decision: f64) -> f64 {
        let z = decision * self.a + self.b;
        if z >= 0.0 {
            (-z).exp() / (1.0 + (-z).exp())
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Smoothed targets `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)` for each label.
pub fn platt_targets(labels: &[f64]) -> Vec<f64> {
    let pos = labels.iter().filter(|&&y| y > 0.0).count() as f64;
    let neg = labels.len() as f64 - pos;
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    labels.iter().map(|&y| if y > 0.0 { hi } else { lo }).collect()
}

/// Cross-entropy of the sigmoid against the smoothed targets.
pub fn platt_nll(decisions: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    decisions
        .iter()
        .zip(targets)
        .map(|(&f, &t)| {
            let z = f * a + b;
            if z >= 0.0 {
                t * z + (-z).exp().ln_1p()
            } else {
                (t - 1.0) * z + z.exp().ln_1p()
            }
        })
        .sum()
}

/// Regularized maximum-likelihood sigmoid fit by Newton's method with
/// backtracking line search.
pub fn fit_platt(decisions: &[f64], labels: &[f64]) -> Result<Sigmoid> {
    if decisions.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} decision values for {} labels",
            decisions.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&y| y > 0.0).count();
    let neg = labels.len() - pos;
    if labels.len() < 2 || pos == 0 || neg == 0 {
        return Err(Error::SingleClass {
            positives: pos,
            negatives: neg,
        });
    }

    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    const EPS: f64 = 1e-5;

    let t = platt_targets(labels);
    let mut a = 0.0;
    let mut b = ((neg as f64 + 1.0) / (pos as f64 + 1.0)).ln();
    let mut fval = platt_nll(decisions, &t, a, b);

    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21) = (SIGMA, SIGMA, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&f, &ti) in decisions.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }

        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = platt_nll(decisions, &t, na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            break;
        }
    }
    Ok(Sigmoid { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_decisions_give_monotone_probabilities() {
        let f = [-3.0, -2.0, -1.5, -0.5, 0.4, 1.0, 2.2, 3.1];
        let y = [-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0];
        let s = fit_platt(&f, &y).unwrap();
        let probs: Vec<f64> = f.iter().map(|&v| s.probability(v)).collect();
        assert!(probs.windows(2).all(|w| w[0] < w[1]));
        // Every positive outranks every negative.
        assert!(probs[3] < probs[4]);
    }

    #[test]
    fn symmetric_data() {
        let f = [2.0, 1.0, 0.5, -0.3, -2.0, -1.0, -0.5, 0.3];
        let y = [1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0, 1.0];
        let s = fit_platt(&f, &y).unwrap();
        assert!(s.a < 0.0);
        assert!(s.b.abs() < 1e-6);
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(fit_platt(&[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(fit_platt(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn probability_is_stable_for_large_inputs() {
        let s = Sigmoid { a: -1.0, b: 0.0 };
        assert_eq!(s.probability(1e4), 1.0);
        assert_eq!(s.probability(-1e4), 0.0);
        assert_eq!(s.probability(0.0), 0.5);
    }
}
