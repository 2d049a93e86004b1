//! Smoothed total-variation refinement of probability maps.
//!
//! Each class map `V` is replaced by the minimizer of
//!
//! ```text
//! 1/2 |U - V|^2 + beta1 |grad U|_1 + beta2/2 |grad U|^2    with U = V on Omega
//! ```
//!
//! solved by ADMM on the splitting `Z = grad U` with scaled multiplier `L`:
//!
//! * `U`: solve `(I + mu grad^T grad) U = V + mu grad^T (Z - L)` over the
//!   unpinned pixels (pinned pixels held at `V`) with Jacobi-preconditioned
//!   conjugate gradients, warm-started from the previous iterate;
//! * `Z`: soft-threshold `mu (grad U + L) / (beta2 + mu)` at
//!   `beta1 / (beta2 + mu)`, per component (anisotropic) or per pixel
//!   vector (isotropic);
//! * `L += grad U - Z`.
//!
//! The gradient is a forward difference with Neumann boundary: the last
//! column (row) of the horizontal (vertical) component is zero.

use rayon::prelude::*;

use crate::data::{LabelRaster, ProbabilityTensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StvParams {
    pub beta1: f64,
    pub beta2: f64,
    /// ADMM penalty.
    pub mu: f64,
    pub max_iter: usize,
    /// Bound on the relative change of `U` and on the RMS primal and dual
    /// residuals at termination.
    pub tol: f64,
    pub isotropic: bool,
}

impl Default for StvParams {
    fn default() -> Self {
        Self {
            beta1: 0.2,
            beta2: 4.0,
            mu: 5.0,
            max_iter: 500,
            tol: 1e-5,
            isotropic: false,
        }
    }
}

impl StvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta1 >= 0.0 && self.beta2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "STV weights must be nonnegative, got beta1 = {}, beta2 = {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ADMM penalty must be positive, got {}",
                self.mu
            )));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter(format!(
                "STV stopping rule needs tol > 0 and max_iter > 0, got {} and {}",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

/// Forward differences of a `rows x cols` map.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub rows: usize,
    pub cols: usize,
    /// `U(i, j+1) - U(i, j)`, zero in the last column.
    pub horizontal: Vec<f64>,
    /// `U(i+1, j) - U(i, j)`, zero in the last row.
    pub vertical: Vec<f64>,
}

impl GradientField {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            horizontal: vec![0.0; rows * cols],
            vertical: vec![0.0; rows * cols],
        }
    }

    pub fn dot(&self, other: &GradientField) -> f64 {
        dot(&self.horizontal, &other.horizontal) + dot(&self.vertical, &other.vertical)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gradient_into(u: &[f64], rows: usize, cols: usize, g: &mut GradientField) {
    for i in 0..rows {
        for j in 0..cols {
            let p = i * cols + j;
            g.horizontal[p] = if j + 1 < cols { u[p + 1] - u[p] } else { 0.0 };
            g.vertical[p] = if i + 1 < rows { u[p + cols] - u[p] } else { 0.0 };
        }
    }
}

pub fn gradient(u: &[f64], rows: usize, cols: usize) -> GradientField {
    assert_eq!(u.len(), rows * cols, "map size");
    let mut g = GradientField::zeros(rows, cols);
    gradient_into(u, rows, cols, &mut g);
    g
}

fn divergence_into(h: &[f64], v: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for i in 0..rows {
        for j in 0..cols {
            let p = i * cols + j;
            let dh = if cols == 1 {
                0.0
            } else if j == 0 {
                h[p]
            } else if j + 1 == cols {
                -h[p - 1]
            } else {
                h[p] - h[p - 1]
            };
            let dv = if rows == 1 {
                0.0
            } else if i == 0 {
                v[p]
            } else if i + 1 == rows {
                -v[p - cols]
            } else {
                v[p] - v[p - cols]
            };
            out[p] = dh + dv;
        }
    }
}

/// Negative adjoint of [`gradient`]: `<grad U, G> = -<U, div G>`.
pub fn divergence(g: &GradientField) -> Vec<f64> {
    let mut out = vec![0.0; g.rows * g.cols];
    divergence_into(&g.horizontal, &g.vertical, g.rows, g.cols, &mut out);
    out
}

/// The smoothed-TV objective (without the pinning constraint).
pub fn stv_objective(
    u: &[f64],
    v: &[f64],
    rows: usize,
    cols: usize,
    beta1: f64,
    beta2: f64,
    isotropic: bool,
) -> f64 {
    let g = gradient(u, rows, cols);
    let fidelity: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 2.0;
    let tv: f64 = if isotropic {
        g.horizontal
            .iter()
            .zip(&g.vertical)
            .map(|(h, v)| h.hypot(*v))
            .sum()
    } else {
        g.horizontal.iter().chain(&g.vertical).map(|x| x.abs()).sum()
    };
    fidelity + beta1 * tv + beta2 / 2.0 * g.dot(&g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StvOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit; `u` is then the iterate with
    /// the lowest objective seen.
    pub converged: bool,
    /// RMS of `grad U - Z` at exit.
    pub primal_residual: f64,
    /// RMS of `mu grad^T (Z - Z_prev)` at exit.
    pub dual_residual: f64,
    pub relative_change: f64,
    pub objective: f64,
}

/// `x - mu div(grad x)` restricted to free pixels.
struct Operator<'a> {
    rows: usize,
    cols: usize,
    mu: f64,
    pinned: &'a [bool],
    diag: Vec<f64>,
    grad: GradientField,
}

impl<'a> Operator<'a> {
    fn new(rows: usize, cols: usize, mu: f64, pinned: &'a [bool]) -> Self {
        let diag = (0..rows * cols)
            .map(|p| {
                let (i, j) = (p / cols, p % cols);
                let neighbours = usize::from(i > 0)
                    + usize::from(i + 1 < rows)
                    + usize::from(j > 0)
                    + usize::from(j + 1 < cols);
                1.0 + mu * neighbours as f64
            })
            .collect();
        Self {
            rows,
            cols,
            mu,
            pinned,
            diag,
            grad: GradientField::zeros(rows, cols),
        }
    }

    fn apply(&mut self, x: &[f64], out: &mut [f64]) {
        gradient_into(x, self.rows, self.cols, &mut self.grad);
        divergence_into(
            &self.grad.horizontal,
            &self.grad.vertical,
            self.rows,
            self.cols,
            out,
        );
        for p in 0..out.len() {
            out[p] = x[p] - self.mu * out[p];
        }
    }

    /// Preconditioned CG on the free pixels; pinned entries of `x` are kept.
    fn solve(&mut self, rhs: &[f64], x: &mut [f64]) {
        let n = x.len();
        let mut ax = vec![0.0; n];
        self.apply(x, &mut ax);
        let mut r: Vec<f64> = (0..n)
            .map(|p| if self.pinned[p] { 0.0 } else { rhs[p] - ax[p] })
            .collect();
        let rhs_norm = (0..n)
            .filter(|&p| !self.pinned[p])
            .map(|p| rhs[p] * rhs[p])
            .sum::<f64>()
            .sqrt()
            .max(1e-300);
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(a, d)| a / d).collect();
        let mut dir = z.clone();
        let mut rz = dot(&r, &z);
        let mut ad = vec![0.0; n];
        for _ in 0..4 * n.max(25) {
            if dot(&r, &r).sqrt() <= 1e-13 * rhs_norm {
                break;
            }
            self.apply(&dir, &mut ad);
            for p in 0..n {
                if self.pinned[p] {
                    ad[p] = 0.0;
                }
            }
            let dad = dot(&dir, &ad);
            if dad <= 0.0 {
                break;
            }
            let step = rz / dad;
            for p in 0..n {
                x[p] += step * dir[p];
                r[p] -= step * ad[p];
            }
            for p in 0..n {
                z[p] = r[p] / self.diag[p];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for p in 0..n {
                dir[p] = z[p] + beta * dir[p];
            }
        }
    }
}

fn shrink(x: f64, t: f64) -> f64 {
    x.signum() * (x.abs() - t).max(0.0)
}

fn rms(values: impl Iterator<Item = f64>, count: usize) -> f64 {
    (values.map(|x| x * x).sum::<f64>() / count.max(1) as f64).sqrt()
}

/// Smooths one `rows x cols` map, holding pixels with `pinned[p]` at `v[p]`.
pub fn stv_denoise(
    v: &[f64],
    rows: usize,
    cols: usize,
    pinned: &[bool],
    params: &StvParams,
) -> Result<StvOutcome> {
    params.validate()?;
    let n = rows * cols;
    if v.len() != n || pinned.len() != n {
        return Err(Error::Dimension(format!(
            "map has {} values and mask {} entries for {rows}x{cols}",
            v.len(),
            pinned.len()
        )));
    }
    if let Some(index) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let objective =
        |u: &[f64]| stv_objective(u, v, rows, cols, params.beta1, params.beta2, params.isotropic);

    if params.beta1 == 0.0 && params.beta2 == 0.0 {
        return Ok(StvOutcome {
            u: v.to_vec(),
            iterations: 0,
            converged: true,
            primal_residual: 0.0,
            dual_residual: 0.0,
            relative_change: 0.0,
            objective: 0.0,
        });
    }

    let mu = params.mu;
    let scale = mu / (params.beta2 + mu);
    let threshold = params.beta1 / (params.beta2 + mu);

    let mut op = Operator::new(rows, cols, mu, pinned);
    let mut u = v.to_vec();
    let mut z = gradient(&u, rows, cols);
    let mut lam = GradientField::zeros(rows, cols);
    let mut gu = z.clone();
    let mut rhs = vec![0.0; n];
    let mut div = vec![0.0; n];
    let mut diff_h = vec![0.0; n];
    let mut diff_v = vec![0.0; n];

    let mut best = (objective(&u), u.clone());
    let mut outcome = None;
    let (mut primal, mut dual, mut change) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);

    for it in 1..=params.max_iter {
        // U-update.
        for p in 0..n {
            diff_h[p] = z.horizontal[p] - lam.horizontal[p];
            diff_v[p] = z.vertical[p] - lam.vertical[p];
        }
        divergence_into(&diff_h, &diff_v, rows, cols, &mut div);
        for p in 0..n {
            rhs[p] = v[p] - mu * div[p];
        }
        let u_prev = u.clone();
        op.solve(&rhs, &mut u);

        // Z-update.
        gradient_into(&u, rows, cols, &mut gu);
        let z_prev = z.clone();
        if params.isotropic {
            for p in 0..n {
                let wh = scale * (gu.horizontal[p] + lam.horizontal[p]);
                let wv = scale * (gu.vertical[p] + lam.vertical[p]);
                let norm = wh.hypot(wv);
                let factor = if norm > threshold {
                    (norm - threshold) / norm
                } else {
                    0.0
                };
                z.horizontal[p] = wh * factor;
                z.vertical[p] = wv * factor;
            }
        } else {
            for p in 0..n {
                z.horizontal[p] = shrink(scale * (gu.horizontal[p] + lam.horizontal[p]), threshold);
                z.vertical[p] = shrink(scale * (gu.vertical[p] + lam.vertical[p]), threshold);
            }
        }

        // Multiplier update.
        for p in 0..n {
            lam.horizontal[p] += gu.horizontal[p] - z.horizontal[p];
            lam.vertical[p] += gu.vertical[p] - z.vertical[p];
        }

        primal = rms(
            (0..n).flat_map(|p| {
                [
                    gu.horizontal[p] - z.horizontal[p],
                    gu.vertical[p] - z.vertical[p],
                ]
            }),
            2 * n,
        );
        for p in 0..n {
            diff_h[p] = z.horizontal[p] - z_prev.horizontal[p];
            diff_v[p] = z.vertical[p] - z_prev.vertical[p];
        }
        divergence_into(&diff_h, &diff_v, rows, cols, &mut div);
        dual = mu * rms(div.iter().copied(), n);
        let du = u.iter().zip(&u_prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let un = u_prev.iter().map(|a| a * a).sum::<f64>().sqrt();
        change = if un > 0.0 { du / un } else { du };

        let obj = objective(&u);
        if obj < best.0 {
            best = (obj, u.clone());
        }
        if change < params.tol && primal < params.tol && dual < params.tol {
            outcome = Some(it);
            break;
        }
    }

    Ok(match outcome {
        Some(iterations) => StvOutcome {
            objective: objective(&u),
            u,
            iterations,
            converged: true,
            primal_residual: primal,
            dual_residual: dual,
            relative_change: change,
        },
        None => StvOutcome {
            objective: best.0,
            u: best.1,
            iterations: params.max_iter,
            converged: false,
            primal_residual: primal,
            dual_residual: dual,
            relative_change: change,
        },
    })
}

/// Per-channel solver summaries from [`smooth_tensor`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Smooths every class channel, pinning the pixels in `pinned` to their
/// input values. The output is not renormalized.
pub fn smooth_tensor(
    tensor: &ProbabilityTensor,
    pinned: &[bool],
    params: &StvParams,
) -> Result<(ProbabilityTensor, Vec<ChannelReport>)> {
    let (rows, cols) = (tensor.rows(), tensor.cols());
    let outcomes: Vec<StvOutcome> = (0..tensor.classes())
        .into_par_iter()
        .map(|k| stv_denoise(&tensor.channel(k), rows, cols, pinned, params))
        .collect::<Result<_>>()?;
    let mut out = tensor.clone();
    let mut reports = Vec::with_capacity(outcomes.len());
    for (k, o) in outcomes.into_iter().enumerate() {
        out.set_channel(k, &o.u);
        reports.push(ChannelReport {
            iterations: o.iterations,
            converged: o.converged,
            primal_residual: o.primal_residual,
            dual_residual: o.dual_residual,
        });
    }
    Ok((out, reports))
}

/// Per-pixel argmax, ties to the smaller class id; excluded pixels stay 0.
pub fn classify(tensor: &ProbabilityTensor) -> Result<LabelRaster> {
    let labels = (0..tensor.rows() * tensor.cols())
        .map(|p| {
            if tensor.is_excluded(p) {
                return 0;
            }
            let v = tensor.pixel(p);
            let best = v
                .iter()
                .enumerate()
                .fold(0, |b, (k, &x)| if x > v[b] { k } else { b });
            best as u16 + 1
        })
        .collect();
    LabelRaster::new(tensor.rows(), tensor.cols(), labels, tensor.classes() as u16)
}
