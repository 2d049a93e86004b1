//! Working-set solver for the nu-SVC dual.
//!
//! With `l` samples the dual is solved in the scaled form
//!
//! ```text
//! min  1/2 a^T Q a      Q_ij = y_i y_j K(x_i, x_j)
//! s.t. 0 <= a_i <= 1,   sum_i y_i a_i = 0,   sum_i a_i = nu * l
//! ```
//!
//! which is the `1/l`-box dual of the primal multiplied by `l`. The two
//! equality constraints force every update to move a pair of variables with
//! the same label; the pair is chosen with second-order working-set
//! selection. After convergence the coefficients are divided by the margin
//! scale `r` so that free support vectors sit on `y f(x) = 1`.

use super::kernel::{Gram, KernelCache};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverLimits {
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub max_kernel_evals: usize,
    /// Kernel columns kept in the LRU cache.
    pub cache_columns: usize,
}

impl Default for SolverLimits {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 1_000_000,
            max_kernel_evals: 10_000_000,
            cache_columns: 4096,
        }
    }
}

/// Raw result of the scaled dual.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// Scaled multipliers in `[0, 1]`.
    pub alpha: Vec<f64>,
    /// `Q alpha`.
    pub gradient: Vec<f64>,
    pub objective: f64,
    /// Margin scale (the primal `rho` up to the `1/l` scaling).
    pub r: f64,
    /// Offset of the decision function before division by `r`.
    pub rho: f64,
    pub iterations: usize,
    /// Largest KKT violation at exit.
    pub violation: f64,
}

/// Largest `nu` for which the dual is feasible: `2 min(l+, l-) / l`.
pub fn max_feasible_nu(labels: &[f64]) -> f64 {
    let pos = labels.iter().filter(|&&y| y > 0.0).count();
    let neg = labels.len() - pos;
    if labels.is_empty() {
        return 0.0;
    }
    2.0 * pos.min(neg) as f64 / labels.len() as f64
}

fn check_problem(labels: &[f64], nu: f64) -> Result<()> {
    let pos = labels.iter().filter(|&&y| y > 0.0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass {
            positives: pos,
            negatives: neg,
        });
    }
    if !(nu > 0.0) || nu > 1.0 || nu > max_feasible_nu(labels) + 1e-12 {
        return Err(Error::InfeasibleNu {
            nu,
            positives: pos,
            negatives: neg,
        });
    }
    Ok(())
}

struct State<'a> {
    y: &'a [f64],
    alpha: Vec<f64>,
    grad: Vec<f64>,
    diag: Vec<f64>,
}

impl State<'_> {
    fn at_upper(&self, i: usize) -> bool {
        self.alpha[i] >= 1.0
    }

    fn at_lower(&self, i: usize) -> bool {
        self.alpha[i] <= 0.0
    }

    /// Returns the pair to update, or `None` with the current violation when
    /// the KKT conditions hold to `tol`.
    fn select(&self, cache: &mut KernelCache<'_>, tol: f64) -> (Option<(usize, usize)>, f64) {
        let n = self.alpha.len();
        let (mut gmaxp, mut ip) = (f64::NEG_INFINITY, None);
        let (mut gmaxn, mut in_) = (f64::NEG_INFINITY, None);
        for t in 0..n {
            if self.y[t] > 0.0 {
                if !self.at_upper(t) && -self.grad[t] >= gmaxp {
                    gmaxp = -self.grad[t];
                    ip = Some(t);
                }
            } else if !self.at_lower(t) && self.grad[t] >= gmaxn {
                gmaxn = self.grad[t];
                in_ = Some(t);
            }
        }

        let kp = ip.map(|i| cache.column(i).to_vec());
        let kn = in_.map(|i| cache.column(i).to_vec());

        let mut gmaxp2 = f64::NEG_INFINITY;
        let mut gmaxn2 = f64::NEG_INFINITY;
        let mut best: Option<usize> = None;
        let mut best_obj = f64::INFINITY;
        for j in 0..n {
            if self.y[j] > 0.0 {
                if !self.at_lower(j) {
                    gmaxp2 = gmaxp2.max(self.grad[j]);
                    if let (Some(i), Some(ki)) = (ip, kp.as_ref()) {
                        let diff = gmaxp + self.grad[j];
                        if diff > 0.0 {
                            let quad = self.diag[i] + self.diag[j] - 2.0 * ki[j];
                            let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                            if obj <= best_obj {
                                best = Some(j);
                                best_obj = obj;
                            }
                        }
                    }
                }
            } else if !self.at_upper(j) {
                gmaxn2 = gmaxn2.max(-self.grad[j]);
                if let (Some(i), Some(ki)) = (in_, kn.as_ref()) {
                    let diff = gmaxn - self.grad[j];
                    if diff > 0.0 {
                        let quad = self.diag[i] + self.diag[j] - 2.0 * ki[j];
                        let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= best_obj {
                            best = Some(j);
                            best_obj = obj;
                        }
                    }
                }
            }
        }

        let violation = (gmaxp + gmaxp2).max(gmaxn + gmaxn2).max(0.0);
        match best {
            Some(j) if violation >= tol => {
                let i = if self.y[j] > 0.0 { ip } else { in_ };
                (i.map(|i| (i, j)), violation)
            }
            _ => (None, violation),
        }
    }

    fn update(&mut self, cache: &mut KernelCache<'_>, i: usize, j: usize) {
        let kij = cache.column(i)[j];
        let quad = {
            let q = self.diag[i] + self.diag[j] - 2.0 * kij;
            if q > 0.0 {
                q
            } else {
                TAU
            }
        };
        // y_i == y_j, so Q_ij = K_ij and the step keeps both sums fixed.
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let delta = (self.grad[i] - self.grad[j]) / quad;
        let sum = old_i + old_j;
        let mut ai = old_i - delta;
        let mut aj = old_j + delta;
        if sum > 1.0 {
            if ai > 1.0 {
                ai = 1.0;
                aj = sum - 1.0;
            }
        } else if aj < 0.0 {
            aj = 0.0;
            ai = sum;
        }
        if sum > 1.0 {
            if aj > 1.0 {
                aj = 1.0;
                ai = sum - 1.0;
            }
        } else if ai < 0.0 {
            ai = 0.0;
            aj = sum;
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;

        let (di, dj) = (ai - old_i, aj - old_j);
        let yi = self.y[i];
        if di != 0.0 {
            let ki = cache.column(i);
            for (k, g) in self.grad.iter_mut().enumerate() {
                *g += yi * self.y[k] * ki[k] * di;
            }
        }
        if dj != 0.0 {
            let kj = cache.column(j);
            for (k, g) in self.grad.iter_mut().enumerate() {
                *g += yi * self.y[k] * kj[k] * dj;
            }
        }
    }

    /// Offset and margin scale from the free variables of each class.
    fn rho_and_r(&self) -> (f64, f64) {
        let mut side = [
            (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY),
            (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY),
        ];
        for (t, &g) in self.grad.iter().enumerate() {
            let s = &mut side[usize::from(self.y[t] < 0.0)];
            if self.at_upper(t) {
                s.3 = s.3.max(g);
            } else if self.at_lower(t) {
                s.2 = s.2.min(g);
            } else {
                s.0 += 1;
                s.1 += g;
            }
        }
        let level = |(free, sum, ub, lb): (usize, f64, f64, f64)| {
            if free > 0 {
                sum / free as f64
            } else {
                (ub + lb) / 2.0
            }
        };
        let r1 = level(side[0]);
        let r2 = level(side[1]);
        ((r1 - r2) / 2.0, (r1 + r2) / 2.0)
    }
}

/// Solves the scaled nu-SVC dual for labels `y` in `{-1, +1}`.
pub fn solve_nu_dual(
    gram: &dyn Gram,
    labels: &[f64],
    nu: f64,
    limits: &SolverLimits,
) -> Result<DualSolution> {
    let n = labels.len();
    if gram.len() != n {
        return Err(Error::Dimension(format!(
            "kernel has {} samples, labels have {n}",
            gram.len()
        )));
    }
    check_problem(labels, nu)?;

    let mut cache = KernelCache::new(gram, limits.cache_columns);
    let diag = cache.diagonal();

    let mut alpha = vec![0.0; n];
    let mut budget_pos = nu * n as f64 / 2.0;
    let mut budget_neg = budget_pos;
    for (a, &y) in alpha.iter_mut().zip(labels) {
        let budget = if y > 0.0 {
            &mut budget_pos
        } else {
            &mut budget_neg
        };
        *a = budget.min(1.0);
        *budget -= *a;
    }

    let mut grad = vec![0.0; n];
    for i in 0..n {
        if alpha[i] > 0.0 {
            let ki = cache.column(i);
            for k in 0..n {
                grad[k] += labels[i] * labels[k] * ki[k] * alpha[i];
            }
        }
    }

    let mut state = State {
        y: labels,
        alpha,
        grad,
        diag,
    };
    let mut iterations = 0;
    let violation = loop {
        let (pair, violation) = state.select(&mut cache, limits.tol);
        let Some((i, j)) = pair else {
            break violation;
        };
        if iterations >= limits.max_iter {
            return Err(Error::NotConverged {
                solver: "nu-SVC dual",
                limit: limits.max_iter,
                unit: "iterations",
            });
        }
        if cache.evaluations() > limits.max_kernel_evals {
            return Err(Error::NotConverged {
                solver: "nu-SVC dual",
                limit: limits.max_kernel_evals,
                unit: "kernel evaluations",
            });
        }
        state.update(&mut cache, i, j);
        iterations += 1;
    };

    let (rho, r) = state.rho_and_r();
    let objective = 0.5
        * state
            .alpha
            .iter()
            .zip(&state.grad)
            .map(|(a, g)| a * g)
            .sum::<f64>();
    Ok(DualSolution {
        alpha: state.alpha,
        gradient: state.grad,
        objective,
        r,
        rho,
        iterations,
        violation,
    })
}

/// Value of the scaled dual objective `1/2 a^T Q a` at any `alpha`.
pub fn dual_objective(gram: &dyn Gram, labels: &[f64], alpha: &[f64]) -> f64 {
    let n = labels.len();
    let mut obj = 0.0;
    for i in 0..n {
        for j in 0..n {
            obj += alpha[i] * alpha[j] * labels[i] * labels[j] * gram.entry(i, j);
        }
    }
    0.5 * obj
}
