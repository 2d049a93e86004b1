//! Cross-checks of each numerical kernel against the reference
//! implementations in `common`.

mod common;

use common::*;
use hsi_stv::data::HsiCube;
use hsi_stv::nsw::{reconstruct_cube, select_best_window, NswParams};
use hsi_stv::pca::fit_pca;
use hsi_stv::stv::{stv_denoise, stv_objective, StvParams};
use hsi_stv::svc::kernel::RbfGram;
use hsi_stv::svc::platt::{fit_platt, platt_nll, platt_targets};
use hsi_stv::svc::smo::solve_nu_dual;
use hsi_stv::svc::{coupling::coupling_objective, pairwise_coupling, SolverLimits};
use nalgebra::DMatrix;
use rand::Rng;

#[test]
fn nsw_matches_naive_on_small_random_cube() {
    let mut rng = rng(1);
    let values: Vec<f64> = (0..5 * 5 * 4).map(|_| rng.random_range(0.0..1.0)).collect();
    let cube = HsiCube::new(5, 5, 4, values.clone()).unwrap();
    let ours = reconstruct_cube(&cube, &NswParams::new(3).unwrap()).unwrap();
    let reference = naive_nsw(&values, 5, 5, 4, 3, 0, 1e-12);
    for (a, b) in ours.values().iter().zip(&reference) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn nsw_offset_minimum_one_matches_naive() {
    let mut rng = rng(2);
    let values: Vec<f64> = (0..6 * 7 * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cube = HsiCube::new(6, 7, 5, values.clone()).unwrap();
    let params = NswParams {
        window: 5,
        offset_min: 1,
        eps: 1e-12,
    };
    let ours = reconstruct_cube(&cube, &params).unwrap();
    let reference = naive_nsw(&values, 6, 7, 5, 5, 1, 1e-12);
    for (a, b) in ours.values().iter().zip(&reference) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn nsw_selection_avoids_noisy_side() {
    // Left four columns share one spectrum; the right columns are noise.
    let (rows, cols, bands) = (7, 7, 6);
    let base: Vec<f64> = (0..bands).map(|b| (b as f64 * 0.9).sin() + 2.0).collect();
    let mut rng = rng(3);
    let mut values = Vec::new();
    for _i in 0..rows {
        for j in 0..cols {
            for b in 0..bands {
                values.push(if j <= 3 {
                    base[b]
                } else {
                    rng.random_range(-3.0..3.0)
                });
            }
        }
    }
    let cube = HsiCube::new(rows, cols, bands, values.clone()).unwrap();
    let sel = select_best_window(&cube, 3, 3, &NswParams::new(5).unwrap()).unwrap();
    // The window of columns 1..=3 lies in the homogeneous part.
    assert_eq!(sel.offset.1, 0);
    assert!((sel.mean_correlation - 1.0).abs() < 1e-12);
    let reference = naive_nsw(&values, rows, cols, bands, 5, 0, 1e-12);
    let p = 3 * cols + 3;
    for b in 0..bands {
        assert!((reference[p * bands + b] - base[b]).abs() < 1e-12);
    }
}

#[test]
fn pca_toy_captured_variance() {
    let data = DMatrix::from_column_slice(3, 4, &[1., 0., 0., 0., 1., 0., 0., 0., 1., 0., 0., 0.]);
    let model = fit_pca(&data, 2, true).unwrap();
    let (captured, _, values, _) = pca_oracle(&data, 2, true);
    assert!((model.captured_variance() - captured).abs() < 1e-12);
    assert!((captured - (values[0] + values[1]) / values.iter().sum::<f64>()).abs() < 1e-15);
    assert!((captured - 0.5 / 0.5625).abs() < 1e-12);
}

#[test]
fn pca_column_norms_match_oracle() {
    let mut rng = rng(4);
    let data = DMatrix::from_fn(6, 20, |_, _| rng.random_range(-1.0..1.0));
    let model = fit_pca(&data, 3, true).unwrap();
    let reduced = model.transform(&data).unwrap();
    let (_, mean) = covariance(&data, true);
    let (_, _, _, basis) = pca_oracle(&data, 3, true);
    for s in 0..20 {
        let centered = data.column(s) - &mean;
        let oracle = (basis.transpose() * centered).norm();
        assert!((reduced.column(s).norm() - oracle).abs() < 1e-8);
        assert!(reduced.column(s).norm() <= (data.column(s) - &mean).norm() + 1e-12);
    }
}

#[test]
fn pca_eigenvalues_and_residuals_match_oracle() {
    let mut rng = rng(5);
    for center in [true, false] {
        for _ in 0..10 {
            let b = rng.random_range(2..=8);
            let n = rng.random_range(b..=40);
            let d = rng.random_range(1..=b);
            let data = DMatrix::from_fn(b, n, |i, _| rng.random_range(-1.0..1.0) + i as f64 * 0.3);
            let model = fit_pca(&data, d, center).unwrap();
            let (captured, residual, values, _) = pca_oracle(&data, d, center);
            assert!((model.captured_variance() - captured).abs() < 1e-8);
            for k in 0..d {
                assert!((model.eigenvalues[k] - values[k]).abs() < 1e-8);
            }
            let back = model.inverse_transform(&model.transform(&data).unwrap()).unwrap();
            assert!(((&data - back).norm_squared() - residual).abs() < 1e-8);

            // Row variances of the reduced data are the leading eigenvalues,
            // in non-increasing order.
            if center {
                let reduced = model.transform(&data).unwrap();
                let var: Vec<f64> = (0..d)
                    .map(|k| reduced.row(k).iter().map(|x| x * x).sum::<f64>() / n as f64)
                    .collect();
                for k in 0..d {
                    assert!((var[k] - values[k]).abs() < 1e-8);
                    if k > 0 {
                        assert!(var[k] <= var[k - 1] + 1e-10);
                    }
                }
            }
        }
    }
}

#[test]
fn pca_spectrum_is_rotation_invariant() {
    let mut rng = rng(6);
    let data = DMatrix::from_fn(5, 30, |_, _| rng.random_range(-1.0..1.0));
    let random = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
    let q = random.qr().q();
    let rotated = &q * &data;
    let a = fit_pca(&data, 5, true).unwrap();
    let b = fit_pca(&rotated, 5, true).unwrap();
    for k in 0..5 {
        assert!((a.eigenvalues[k] - b.eigenvalues[k]).abs() < 1e-8);
    }
}

fn toy_problem(rng: &mut impl Rng, l: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let mut y: Vec<f64> = (0..l).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
    if rng.random_bool(0.5) {
        y[l - 1] = -y[l - 1];
    }
    let x: Vec<f64> = (0..2 * l).map(|k| rng.random_range(-1.0..1.0) + 0.5 * y[k / 2]).collect();
    let gamma = rng.random_range(0.5..2.0);
    (x, y, gamma)
}

#[test]
fn six_point_dual_matches_qp_oracle() {
    let mut rng = rng(7);
    for _ in 0..5 {
        let (x, y, gamma) = toy_problem(&mut rng, 6);
        let pos = y.iter().filter(|&&v| v > 0.0).count();
        let max_nu = 2.0 * pos.min(6 - pos) as f64 / 6.0;
        for nu in [0.2 * max_nu, 0.6 * max_nu, max_nu] {
            let gram = RbfGram {
                samples: &x,
                dim: 2,
                gamma,
            };
            let sol = solve_nu_dual(&gram, &y, nu, &SolverLimits::default()).unwrap();
            let q = DMatrix::from_fn(6, 6, |i, j| {
                y[i] * y[j] * rbf(&x[2 * i..2 * i + 2], &x[2 * j..2 * j + 2], gamma)
            });
            let oracle = qp_oracle(&q, &y, nu).unwrap();
            assert!((sol.objective - oracle).abs() < 1e-4, "{} vs {oracle}", sol.objective);

            // Feasibility of the returned multipliers.
            let tol = 1e-9;
            assert!(sol.alpha.iter().all(|&a| (-tol..=1.0 + tol).contains(&a)));
            let sum: f64 = sol.alpha.iter().sum();
            let signed: f64 = sol.alpha.iter().zip(&y).map(|(a, b)| a * b).sum();
            assert!((sum - nu * 6.0).abs() < 1e-9);
            assert!(signed.abs() < 1e-9);
        }
    }
}

#[test]
fn platt_fit_matches_grid_oracle() {
    let decisions = [-2.1, -1.4, -0.9, -0.3, 0.1, -0.2, 0.4, 0.8, 1.5, 2.2];
    let labels = [-1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0];
    let targets = platt_targets(&labels);
    let fitted = fit_platt(&decisions, &labels).unwrap();
    let ours = platt_nll(&decisions, &targets, fitted.a, fitted.b);

    // Independent likelihood with the same prior-smoothed targets.
    let nll = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&targets)
            .map(|(f, t)| {
                let p = 1.0 / (1.0 + (a * f + b).exp());
                -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
            })
            .sum()
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=400 {
        for j in 0..=400 {
            let (a, b) = (-10.0 + 0.05 * i as f64, -10.0 + 0.05 * j as f64);
            let v = nll(a, b);
            if v < best.0 {
                best = (v, a, b);
            }
        }
    }
    let mut step = 0.05;
    while step > 1e-10 {
        let mut moved = true;
        while moved {
            moved = false;
            for (da, db) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                let (a, b) = (best.1 + da * step, best.2 + db * step);
                let v = nll(a, b);
                if v < best.0 {
                    best = (v, a, b);
                    moved = true;
                }
            }
        }
        step /= 2.0;
    }
    assert!((ours - best.0).abs() < 1e-6, "{ours} vs {}", best.0);
    assert!(fitted.a < 0.0);
}

#[test]
fn coupling_matches_simplex_grid() {
    let r = vec![
        vec![0.0, 0.7, 0.6],
        vec![0.3, 0.0, 0.45],
        vec![0.4, 0.55, 0.0],
    ];
    let ours = pairwise_coupling(&r).unwrap();
    let oracle = coupling_grid_oracle(&r);
    for (a, b) in ours.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-3);
    }
    assert!((coupling_objective(&r, &ours) - coupling_loss(&r, &ours)).abs() < 1e-12);
}

#[test]
fn coupling_is_optimal_against_random_simplex_points() {
    let mut rng = rng(8);
    for c in [4, 5] {
        let r = random_pairwise(c, &mut rng);
        let p = pairwise_coupling(&r).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&x| x >= -1e-12));
        let best = coupling_loss(&r, &p);
        for _ in 0..2000 {
            let raw: Vec<f64> = (0..c).map(|_| rng.random_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let q: Vec<f64> = raw.iter().map(|x| x / s).collect();
            assert!(coupling_loss(&r, &q) >= best - 1e-12);
        }
    }
}

#[test]
fn stv_matches_oracle_on_single_map() {
    let mut rng = rng(9);
    let v: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
    let params = StvParams {
        beta1: 0.2,
        tol: 1e-8,
        max_iter: 100_000,
        ..StvParams::default()
    };
    let out = stv_denoise(&v, 8, 8, &[false; 64], &params).unwrap();
    let ours = stv_energy(&out.u, &v, 8, 8, 0.2, 4.0);
    assert!((ours - stv_objective(&out.u, &v, 8, 8, 0.2, 4.0, false)).abs() < 1e-12);
    let oracle = stv_oracle(&v, 8, 8, 0.2, 4.0);
    assert!((ours - oracle).abs() < 1e-4, "{ours} vs {oracle}");
}

#[test]
fn stv_objective_decreases_and_respects_range() {
    let mut rng = rng(10);
    for beta1 in [0.1, 0.5] {
        let v: Vec<f64> = (0..10 * 12).map(|_| rng.random_range(0.0..1.0)).collect();
        let params = StvParams {
            beta1,
            ..StvParams::default()
        };
        let out = stv_denoise(&v, 10, 12, &[false; 120], &params).unwrap();
        assert!(stv_energy(&out.u, &v, 10, 12, beta1, 4.0) <= stv_energy(&v, &v, 10, 12, beta1, 4.0) + 1e-9);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(out.u.iter().all(|&u| u >= lo - 1e-9 && u <= hi + 1e-9));
    }
}

#[test]
fn stv_pulls_flipped_pixels_toward_neighbours() {
    // A homogeneous channel at 0.9 with a few pixels knocked down to 0.1.
    let (rows, cols) = (9, 9);
    let mut v = vec![0.9; rows * cols];
    let flipped = [20, 42, 60];
    for &p in &flipped {
        v[p] = 0.1;
    }
    let params = StvParams::default();
    let out = stv_denoise(&v, rows, cols, &vec![false; rows * cols], &params).unwrap();
    for &p in &flipped {
        assert!(out.u[p] > 0.1 + 0.1, "pixel {p}: {}", out.u[p]);
    }
    assert!(stv_energy(&out.u, &v, rows, cols, 0.2, 4.0) < stv_energy(&v, &v, rows, cols, 0.2, 4.0));
}
