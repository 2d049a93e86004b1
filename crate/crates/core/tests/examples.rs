//! Runs every example's `run_example` and checks what it reports.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));
        }
    };
}

example!(ablation);
example!(full_pipeline);
example!(metrics);
example!(nsw_reconstruction);
example!(pca_reduction);
example!(stv_smoothing);
example!(svc_probability_map);
example!(synthetic_scene_io);

#[test]
fn nsw_reconstruction_reduces_noise() {
    let errors = nsw_reconstruction::run_example().unwrap();
    let input = errors[0].1;
    assert!(errors[1..].iter().all(|&(_, e)| e < input), "{errors:?}");
}

#[test]
fn pca_variance_grows_with_dims() {
    let captured = pca_reduction::run_example().unwrap();
    assert!(captured.windows(2).all(|w| w[1] >= w[0]));
    assert!(captured[5] > 0.9);
}

#[test]
fn svc_probability_map_is_accurate() {
    assert!(svc_probability_map::run_example().unwrap() > 0.9);
}

#[test]
fn stv_smoothing_repairs_flips() {
    let results = stv_smoothing::run_example().unwrap();
    assert!(results.iter().any(|&(_, wrong)| wrong < 20), "{results:?}");
}

#[test]
fn synthetic_scene_round_trips() {
    let agreement = synthetic_scene_io::run_example().unwrap();
    assert!(agreement > 0.7);
}

#[test]
fn full_pipeline_runs_all_trials() {
    let report = full_pipeline::run_example().unwrap();
    assert_eq!(report.trials.len(), 3);
    assert!(report.summary().oa.mean.unwrap() > 0.8);
}

#[test]
fn ablation_covers_four_methods() {
    let reports = ablation::run_example().unwrap();
    assert_eq!(reports.len(), 4);
    assert!(reports.iter().all(|r| r.failures.is_empty()));
}

#[test]
fn metrics_match_hand_computation() {
    let (oa, aa, kappa) = metrics::run_example().unwrap();
    // 11 labelled pixels, 9 correct; per class 4/5, 3/3, 2/3.
    assert!((oa - 9.0 / 11.0).abs() < 1e-12);
    assert!((aa - (0.8 + 1.0 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
    let pe = (5.0 * 5.0 + 3.0 * 4.0 + 3.0 * 2.0) / 121.0;
    assert!((kappa - (9.0 / 11.0 - pe) / (1.0 - pe)).abs() < 1e-12);
}
