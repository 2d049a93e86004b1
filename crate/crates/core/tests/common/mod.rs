//! Reference implementations written straight from the definitions, used
//! to cross-check the library. They favour clarity over speed and share no
//! code with the crate under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- NSW

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population Pearson correlation by the two-pass textbook formula.
pub fn naive_pearson(x: &[f64], y: &[f64], eps: f64) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let n = x.len() as f64;
    let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n;
    let vy = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n;
    if vx < eps || vy < eps {
        return 0.0;
    }
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    cov / (vx * vy).sqrt()
}

/// Exhaustive nested-window reconstruction of a pixel-major cube.
///
/// Pixels outside the image are zero spectra. Every `(a+1) x (a+1)` window
/// containing the target is scored by the mean correlation of its members
/// with the target; the first best window (offsets in lexicographic order
/// starting at `offset_min`, scores within 1e-12 treated as equal) supplies
/// correlation-normalized weights.
pub fn naive_nsw(
    values: &[f64],
    rows: usize,
    cols: usize,
    bands: usize,
    window: usize,
    offset_min: usize,
    eps: f64,
) -> Vec<f64> {
    let a = (window - 1) / 2;
    let zero = vec![0.0; bands];
    let spectrum = |m: isize, n: isize| -> &[f64] {
        if m < 0 || n < 0 || m >= rows as isize || n >= cols as isize {
            &zero
        } else {
            let p = m as usize * cols + n as usize;
            &values[p * bands..(p + 1) * bands]
        }
    };
    let mut out = vec![0.0; values.len()];
    for i in 0..rows {
        for j in 0..cols {
            let target = spectrum(i as isize, j as isize).to_vec();
            let mut best: Option<(f64, Vec<(Vec<f64>, f64)>)> = None;
            for p in offset_min..=a {
                for q in offset_min..=a {
                    let mut members = Vec::new();
                    for r in 0..=a {
                        for s in 0..=a {
                            let m = i as isize - a as isize + p as isize + r as isize;
                            let n = j as isize - a as isize + q as isize + s as isize;
                            let x = spectrum(m, n).to_vec();
                            let c = naive_pearson(&target, &x, eps);
                            members.push((x, c));
                        }
                    }
                    let score = members.iter().map(|(_, c)| c).sum::<f64>() / members.len() as f64;
                    if best.as_ref().is_none_or(|(b, _)| score > *b + 1e-12) {
                        best = Some((score, members));
                    }
                }
            }
            let (_, members) = best.expect("at least one window");
            let total: f64 = members.iter().map(|(_, c)| c).sum();
            let p = i * cols + j;
            let dst = &mut out[p * bands..(p + 1) * bands];
            if total < eps {
                dst.copy_from_slice(&target);
            } else {
                for (x, c) in &members {
                    for b in 0..bands {
                        dst[b] += c / total * x[b];
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------- PCA

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in decreasing order and the matching unit eigenvectors as
/// columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(y, y)].total_cmp(&m[(x, x)]));
    let values = order.iter().map(|&k| m[(k, k)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Population covariance (or second-moment matrix when `center` is false)
/// of a `bands x samples` matrix, with the mean used.
pub fn covariance(data: &DMatrix<f64>, center: bool) -> (DMatrix<f64>, DVector<f64>) {
    let (b, n) = data.shape();
    let mean = if center {
        DVector::from_fn(b, |r, _| data.row(r).sum() / n as f64)
    } else {
        DVector::zeros(b)
    };
    let mut cov = DMatrix::zeros(b, b);
    for s in 0..n {
        for i in 0..b {
            for j in 0..b {
                cov[(i, j)] += (data[(i, s)] - mean[i]) * (data[(j, s)] - mean[j]);
            }
        }
    }
    (cov / n as f64, mean)
}

/// Captured variance fraction and summed squared reconstruction residual
/// of the best rank-`d` subspace, from the eigen-decomposition.
pub fn pca_oracle(data: &DMatrix<f64>, d: usize, center: bool) -> (f64, f64, Vec<f64>, DMatrix<f64>) {
    let (cov, _) = covariance(data, center);
    let (values, vectors) = jacobi_eigen(&cov);
    let total: f64 = values.iter().sum();
    let kept: f64 = values[..d].iter().sum();
    let n = data.ncols() as f64;
    let basis = vectors.columns(0, d).into_owned();
    ((kept / total), (total - kept) * n, values, basis)
}

// ---------------------------------------------------------------- SVC dual

pub fn rbf(u: &[f64], v: &[f64], gamma: f64) -> f64 {
    (-gamma * u.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).exp()
}

/// Minimum of `1/2 a^T Q a` subject to `0 <= a <= 1`, `y^T a = 0`,
/// `1^T a = nu l`, by enumerating which variables sit at 0, at 1 or
/// strictly between. For each pattern the equality-constrained minimum over
/// the free variables is found from its KKT system and kept if it lies in
/// the box. `Q` must be positive definite.
pub fn qp_oracle(q: &DMatrix<f64>, y: &[f64], nu: f64) -> Option<f64> {
    let l = y.len();
    let target_sum = nu * l as f64;
    let objective = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..l {
            for j in 0..l {
                s += a[i] * a[j] * q[(i, j)];
            }
        }
        0.5 * s
    };
    let mut best: Option<f64> = None;
    let patterns = 3usize.pow(l as u32);
    for code in 0..patterns {
        let mut state = vec![0u8; l];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let free: Vec<usize> = (0..l).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { 1.0 } else { 0.0 }).collect();
        let fixed_y: f64 = (0..l).filter(|&i| state[i] == 1).map(|i| y[i]).sum();
        let fixed_n = state.iter().filter(|&&s| s == 1).count() as f64;
        let (rhs_y, rhs_n) = (-fixed_y, target_sum - fixed_n);

        if free.is_empty() {
            if rhs_y.abs() > 1e-9 || rhs_n.abs() > 1e-9 {
                continue;
            }
        } else {
            let same_sign = free.iter().all(|&i| y[i] == y[free[0]]);
            // Equality rows on the free block.
            let mut rows: Vec<(Vec<f64>, f64)> = vec![(free.iter().map(|_| 1.0).collect(), rhs_n)];
            if same_sign {
                if (y[free[0]] * rhs_n - rhs_y).abs() > 1e-9 {
                    continue;
                }
            } else {
                rows.push((free.iter().map(|&i| y[i]).collect(), rhs_y));
            }
            let f = free.len();
            let k = rows.len();
            let mut kkt = DMatrix::zeros(f + k, f + k);
            let mut rhs = DVector::zeros(f + k);
            for (a, &i) in free.iter().enumerate() {
                for (b, &j) in free.iter().enumerate() {
                    kkt[(a, b)] = q[(i, j)];
                }
                rhs[a] = -(0..l)
                    .filter(|&j| state[j] == 1)
                    .map(|j| q[(i, j)])
                    .sum::<f64>();
            }
            for (r, (coef, value)) in rows.iter().enumerate() {
                for a in 0..f {
                    kkt[(f + r, a)] = coef[a];
                    kkt[(a, f + r)] = coef[a];
                }
                rhs[f + r] = *value;
            }
            let Some(sol) = kkt.lu().solve(&rhs) else {
                continue;
            };
            if (0..f).any(|a| sol[a] < -1e-9 || sol[a] > 1.0 + 1e-9) {
                continue;
            }
            for (a, &i) in free.iter().enumerate() {
                alpha[i] = sol[a].clamp(0.0, 1.0);
            }
        }
        let obj = objective(&alpha);
        if best.is_none_or(|b| obj < b) {
            best = Some(obj);
        }
    }
    best
}

// ---------------------------------------------------------------- coupling

/// `sum_i sum_{j != i} (r_ji p_i - r_ij p_j)^2`.
pub fn coupling_loss(r: &[Vec<f64>], p: &[f64]) -> f64 {
    let c = p.len();
    let mut s = 0.0;
    for i in 0..c {
        for j in 0..c {
            if i != j {
                s += (r[j][i] * p[i] - r[i][j] * p[j]).powi(2);
            }
        }
    }
    s
}

/// Grid search of [`coupling_loss`] over the 3-simplex, refined around the
/// incumbent with a shrinking step.
pub fn coupling_grid_oracle(r: &[Vec<f64>]) -> Vec<f64> {
    assert_eq!(r.len(), 3);
    let eval = |p0: f64, p1: f64| -> Option<f64> {
        let p2 = 1.0 - p0 - p1;
        (p0 >= 0.0 && p1 >= 0.0 && p2 >= -1e-15).then(|| coupling_loss(r, &[p0, p1, p2.max(0.0)]))
    };
    let steps = 200;
    let h = 1.0 / steps as f64;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for a in 0..=steps {
        for b in 0..=steps - a {
            let (p0, p1) = (a as f64 * h, b as f64 * h);
            if let Some(v) = eval(p0, p1) {
                if v < best.0 {
                    best = (v, p0, p1);
                }
            }
        }
    }
    let mut step = h;
    while step > 1e-9 {
        let mut improved = true;
        while improved {
            improved = false;
            for (d0, d1) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
                let (p0, p1) = (best.1 + d0 * step, best.2 + d1 * step);
                if let Some(v) = eval(p0, p1) {
                    if v < best.0 {
                        best = (v, p0, p1);
                        improved = true;
                    }
                }
            }
        }
        step /= 2.0;
    }
    vec![best.1, best.2, 1.0 - best.1 - best.2]
}

/// A random pairwise matrix with `r_ij + r_ji = 1`.
pub fn random_pairwise(c: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut r = vec![vec![0.0; c]; c];
    for i in 0..c {
        for j in i + 1..c {
            let v = rng.random_range(0.05..0.95);
            r[i][j] = v;
            r[j][i] = 1.0 - v;
        }
    }
    r
}

// ---------------------------------------------------------------- STV

/// Forward differences with the last column/row difference set to zero.
fn diffs(u: &[f64], rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    let mut h = vec![0.0; rows * cols];
    let mut v = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let p = i * cols + j;
            if j + 1 < cols {
                h[p] = u[p + 1] - u[p];
            }
            if i + 1 < rows {
                v[p] = u[p + cols] - u[p];
            }
        }
    }
    (h, v)
}

/// `1/2 |u - v|^2 + beta1 |grad u|_1 + beta2/2 |grad u|^2`, anisotropic.
pub fn stv_energy(u: &[f64], v: &[f64], rows: usize, cols: usize, beta1: f64, beta2: f64) -> f64 {
    let (h, w) = diffs(u, rows, cols);
    let fid: f64 = u.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 2.0;
    let l1: f64 = h.iter().chain(&w).map(|x| x.abs()).sum();
    let l2: f64 = h.iter().chain(&w).map(|x| x * x).sum();
    fid + beta1 * l1 + beta2 / 2.0 * l2
}

/// Gradient of the energy with `|x|` replaced by `sign(x)` (subgradient) or
/// by its Huber smoothing of width `eta` when `eta > 0`.
fn energy_gradient(u: &[f64], v: &[f64], rows: usize, cols: usize, beta1: f64, beta2: f64, eta: f64) -> Vec<f64> {
    let (h, w) = diffs(u, rows, cols);
    let dphi = |x: f64| -> f64 {
        let s = if eta > 0.0 {
            (x / eta).clamp(-1.0, 1.0)
        } else {
            x.signum()
        };
        beta1 * s + beta2 * x
    };
    let mut g: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    for i in 0..rows {
        for j in 0..cols {
            let p = i * cols + j;
            if j + 1 < cols {
                let d = dphi(h[p]);
                g[p + 1] += d;
                g[p] -= d;
            }
            if i + 1 < rows {
                let d = dphi(w[p]);
                g[p + cols] += d;
                g[p] -= d;
            }
        }
    }
    g
}

/// Minimum of [`stv_energy`] found in two phases: Nesterov's accelerated
/// gradient on the Huber-smoothed energy (width `1e-7`), then a long
/// subgradient descent with diminishing steps started from that point.
/// Returns the lowest exact energy seen.
pub fn stv_oracle(v: &[f64], rows: usize, cols: usize, beta1: f64, beta2: f64) -> f64 {
    let n = v.len();
    let eta = 1e-7;
    // Smoothness of the smoothed energy: 1 + 8 (beta2 + beta1 / eta).
    let lip = 1.0 + 8.0 * (beta2 + beta1 / eta);
    let q = (1.0 / lip).sqrt();
    let momentum = (1.0 - q) / (1.0 + q);
    let mut x = v.to_vec();
    let mut prev = x.clone();
    let mut best = stv_energy(&x, v, rows, cols, beta1, beta2);
    let mut best_x = x.clone();
    for _ in 0..400_000 {
        let yk: Vec<f64> = (0..n).map(|k| x[k] + momentum * (x[k] - prev[k])).collect();
        let g = energy_gradient(&yk, v, rows, cols, beta1, beta2, eta);
        prev = x;
        x = (0..n).map(|k| yk[k] - g[k] / lip).collect();
        let e = stv_energy(&x, v, rows, cols, beta1, beta2);
        if e < best {
            best = e;
            best_x = x.clone();
        }
    }
    let mut u = best_x;
    for k in 0..200_000 {
        let g = energy_gradient(&u, v, rows, cols, beta1, beta2, 0.0);
        let step = 1e-3 / (1.0 + k as f64).sqrt();
        for (a, d) in u.iter_mut().zip(&g) {
            *a -= step * d;
        }
        best = best.min(stv_energy(&u, v, rows, cols, beta1, beta2));
    }
    best
}
