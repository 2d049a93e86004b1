//! End-to-end behaviour of the classification pipeline on synthetic scenes.

use hsi_stv::data::{LabelRaster, Shortfall, TrainingSet};
use hsi_stv::eval::{self, ConfusionMatrix, TrialOutcome, TrialReport};
use hsi_stv::io::{self, generate_synthetic, SyntheticSceneSpec};
use hsi_stv::nsw::{reconstruct_cube, NswParams};
use hsi_stv::pipeline::*;
use hsi_stv::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(text: &str) -> PipelineConfig {
    PipelineConfig::resolve(&ConfigFile::from_toml(text).unwrap()).unwrap()
}

fn clean_scene() -> (hsi_stv::data::HsiCube, LabelRaster) {
    let spec = SyntheticSceneSpec {
        patch_side: 8,
        seed: 11,
        ..SyntheticSceneSpec::new(32, 32, 10, 4)
    };
    generate_synthetic(&spec).unwrap()
}

#[test]
fn nsw_keeps_interior_pixels_of_clean_scene() {
    let (cube, gt) = clean_scene();
    let w = 3;
    let out = reconstruct_cube(&cube, &NswParams::new(w).unwrap()).unwrap();
    let h = (w / 2) as isize;
    let mut checked = 0;
    for i in 0..cube.rows() {
        for j in 0..cube.cols() {
            let homogeneous = (-h..=h).all(|di| {
                (-h..=h).all(|dj| {
                    let (y, x) = (i as isize + di, j as isize + dj);
                    y >= 0
                        && x >= 0
                        && (y as usize) < gt.rows()
                        && (x as usize) < gt.cols()
                        && gt.get(y as usize, x as usize) == gt.get(i, j)
                })
            });
            if homogeneous {
                checked += 1;
                for (a, b) in out.spectrum(i, j).iter().zip(cube.spectrum(i, j)) {
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn clean_scene_is_classified_perfectly() {
    let (cube, gt) = clean_scene();
    let c = config("trials = 2\nper-class = 5\nseed = 3\nstages = \"svc\"\n");
    let report = run_trials(&cube, &gt, &c).unwrap();
    assert!(report.failures.is_empty());
    for t in &report.trials {
        assert_eq!(t.oa, 1.0);
        assert_eq!(t.aa, 1.0);
    }
    assert_eq!(report.max_errors(), 0);
}

fn noisy_scene() -> (hsi_stv::data::HsiCube, LabelRaster) {
    let spec = SyntheticSceneSpec {
        patch_side: 6,
        noise_sigma: 0.1,
        seed: 5,
        ..SyntheticSceneSpec::new(24, 24, 8, 3)
    };
    generate_synthetic(&spec).unwrap()
}

const NOISY: &str = "trials = 2\nper-class = 6\nseed = 9\nnsw-window = 3\npca-dims = 4\nbeta1 = 0.3\n";

#[test]
fn repeated_runs_are_identical() {
    let (cube, gt) = noisy_scene();
    let c = config(NOISY);
    let a = run_trials(&cube, &gt, &c).unwrap();
    let b = run_trials(&cube, &gt, &c).unwrap();
    assert_eq!(a, b);
    assert_eq!(io::report_rows(&[a]), io::report_rows(&[b]));
}

#[test]
fn identical_stage_sets_give_identical_reports() {
    let (cube, gt) = noisy_scene();
    let c = config(NOISY);
    let reports = ablate(&cube, &gt, &c, &[Stages::ALL, Stages::ALL]).unwrap();
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn ablation_pairs_training_sets() {
    let (cube, gt) = noisy_scene();
    let c = config(NOISY);
    let sets = [Stages::SVC_ONLY, Stages::ALL];
    let reports = ablate(&cube, &gt, &c, &sets).unwrap();
    assert_eq!(reports[0].label, "SVC");
    assert_eq!(reports[1].label, "NSW-PCA-SVC-STV");
    for (a, b) in reports[0].trials.iter().zip(&reports[1].trials) {
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.training_pixels, b.training_pixels);
    }
    assert!(reports[1].trials.iter().all(|t| t.stv_converged.is_some()));
    assert!(reports[0].trials.iter().all(|t| t.stv_converged.is_none()));
}

#[test]
fn empty_or_incomplete_stage_sets_are_rejected() {
    assert!("".parse::<Stages>().is_err());
    assert!("stv".parse::<Stages>().is_err());
    let (cube, gt) = noisy_scene();
    let c = config(NOISY);
    assert!(matches!(ablate(&cube, &gt, &c, &[]), Err(Error::Config(_))));

    // A synthetic run without a PCA block cannot enable PCA.
    let bare = config("trials = 1\nstages = \"svc\"\n");
    assert!(matches!(
        prepare_features(&cube, &gt, &Stages::ALL, &bare),
        Err(Error::Config(_))
    ));
}

#[test]
fn trial_seeds_depend_only_on_master_and_index() {
    assert_eq!(trial_seeds(4, 2), trial_seeds(4, 2));
    assert_ne!(trial_seeds(4, 2), trial_seeds(4, 3));
    assert_ne!(trial_seeds(4, 2), trial_seeds(5, 2));
}

#[test]
fn training_pixels_are_excluded_from_scoring() {
    let (cube, gt) = noisy_scene();
    let c = config(NOISY);
    let run = run_trial(&cube, &gt, &Stages::ALL, &c, 0).unwrap();
    let cm = eval::confusion(&gt, &run.prediction, Some(&run.training)).unwrap();
    let labelled = gt.labels().iter().filter(|&&l| l != 0).count() as u64;
    assert_eq!(cm.total(), labelled - run.training.len() as u64);
    for e in run.training.entries() {
        let p = e.row * gt.cols() + e.col;
        let k = run.probabilities.classes();
        let v = &run.probabilities.values()[p * k..(p + 1) * k];
        for (c, &x) in v.iter().enumerate() {
            assert_eq!(x, if c + 1 == e.class as usize { 1.0 } else { 0.0 });
        }
        assert_eq!(run.prediction.labels()[p], e.class);
    }
}

#[test]
fn outputs_are_written() {
    let (cube, gt) = noisy_scene();
    let c = config(NOISY);
    let reports = ablate(&cube, &gt, &c, &[Stages::SVC_ONLY, Stages::ALL]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &c, &reports).unwrap();
    for name in [REPORT_FILE, TRIALS_FILE, CONFIG_FILE] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    for r in &reports {
        let (rows, cols, max, counts) = io::read_pgm(&dir.path().join(error_map_file(&r.label))).unwrap();
        assert_eq!((rows, cols, max), (24, 24, 2));
        assert_eq!(counts, r.error_counts);
    }
    let saved = ConfigFile::load(&dir.path().join(CONFIG_FILE)).unwrap();
    let again = PipelineConfig::resolve(&saved).unwrap();
    assert_eq!(again.nsw, c.nsw);
    assert_eq!(again.stv, c.stv);
    assert_eq!(again.trials, c.trials);
}

#[test]
fn report_cells_use_four_decimals() {
    // One trial at 91.57% overall accuracy.
    let outcome = TrialOutcome {
        trial: 0,
        seed: 0,
        nu: 0.1,
        gamma: 1.0,
        oa: 0.9157,
        aa: 0.9,
        kappa: Some(0.88),
        class_accuracy: vec![Some(0.9157)],
        training_pixels: 10,
        shortfall: Vec::<Shortfall>::new(),
        stv_converged: None,
    };
    let report = TrialReport::assemble("SVC", 1, 1, 1, vec![Ok((outcome, vec![false]))]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    io::export_report(&[report], &path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.lines().any(|l| l == "OA,0.9157"), "{text}");
}

#[test]
fn kappa_vanishes_for_random_guesses() {
    let classes = 5u16;
    let n = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth: Vec<u16> = (0..n).map(|_| rng.random_range(1..=classes)).collect();
    let guess: Vec<u16> = (0..n).map(|_| rng.random_range(1..=classes)).collect();
    let gt = LabelRaster::new(1, n, truth, classes).unwrap();
    let pred = LabelRaster::new(1, n, guess, classes).unwrap();
    let cm = eval::confusion(&gt, &pred, None).unwrap();
    let kappa = cm.kappa().unwrap().unwrap();
    assert!(kappa.abs() < 0.01, "{kappa}");
    assert!((cm.overall_accuracy().unwrap() - 0.2).abs() < 0.01);
}

#[test]
fn perfect_agreement_has_unit_kappa() {
    let cm = ConfusionMatrix::from_counts(2, vec![30, 0, 0, 20]).unwrap();
    assert_eq!(cm.kappa().unwrap(), Some(1.0));
    let empty: Option<&TrainingSet> = None;
    let gt = LabelRaster::new(1, 3, vec![1, 2, 0], 2).unwrap();
    assert_eq!(eval::evaluation_mask(&gt, empty), vec![true, true, false]);
}
