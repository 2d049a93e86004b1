//! End-to-end runs: configuration, per-trial classification and ablations.
//!
//! Configuration files are flat TOML whose keys match the command-line flags:
//!
//! ```toml
//! scene = "indian-pines"
//! cube = "data/ip.hsic"
//! labels = "data/ip.hsil"
//! trials = 10
//! per-class = 10
//! seed = 7
//! stages = "nsw,pca,svc,stv"
//! beta2 = 4.0
//! ```
//!
//! Values given on the command line override the file, and the file
//! overrides built-in defaults. A scene name supplies the NSW window, PCA
//! dimension and `beta1` for that scene; without one, every enabled stage
//! needs its parameters spelled out.
//!
//! NSW and PCA do not depend on the training set, so their output is
//! computed once per run and shared by all trials.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sample_training_set, HsiCube, LabelRaster, ProbabilityTensor, TrainingSet};
use crate::error::{Error, Result};
use crate::eval::{self, TrialFailure, TrialOutcome, TrialReport, TrialResult};
use crate::io::{self, SyntheticSceneSpec};
use crate::nsw::{self, NswParams};
use crate::pca::{self, PcaModel};
use crate::stv::{self, ChannelReport, StvParams};
use crate::svc::{self, CvGrid, CvResult, Features, MulticlassModel, SolverLimits, SvcParams};

/// Which optional stages run. The SVC stage always runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stages {
    pub nsw: bool,
    pub pca: bool,
    pub stv: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        nsw: true,
        pca: true,
        stv: true,
    };
    pub const SVC_ONLY: Stages = Stages {
        nsw: false,
        pca: false,
        stv: false,
    };

    /// Method name such as `NSW-PCA-SVC-STV` or `SVC`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.nsw {
            parts.push("NSW");
        }
        if self.pca {
            parts.push("PCA");
        }
        parts.push("SVC");
        if self.stv {
            parts.push("STV");
        }
        parts.join("-")
    }

    /// Comma-separated form accepted by [`FromStr`].
    pub fn spec(&self) -> String {
        self.label().to_lowercase().replace('-', ",")
    }
}

impl FromStr for Stages {
    type Err = Error;

    /// Parses `nsw,pca,svc,stv`-style lists; `svc` is mandatory.
    fn from_str(s: &str) -> Result<Self> {
        let mut stages = Stages::SVC_ONLY;
        let mut svc = false;
        let mut any = false;
        for part in s.split([',', '+', '-']).map(str::trim).filter(|p| !p.is_empty()) {
            any = true;
            match part.to_ascii_lowercase().as_str() {
                "nsw" => stages.nsw = true,
                "pca" => stages.pca = true,
                "svc" => svc = true,
                "stv" => stages.stv = true,
                other => return Err(Error::Config(format!("unknown stage {other:?}"))),
            }
        }
        if !any {
            return Err(Error::Config("empty stage set".into()));
        }
        if !svc {
            return Err(Error::Config(format!(
                "stage set {s:?} lacks the mandatory svc stage"
            )));
        }
        Ok(stages)
    }
}

/// Benchmark scenes with tuned defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scene {
    IndianPines,
    Salinas,
    PaviaCenter,
    Ksc,
    Botswana,
    PaviaUniversity,
}

impl Scene {
    pub const ALL: [Scene; 6] = [
        Scene::IndianPines,
        Scene::Salinas,
        Scene::PaviaCenter,
        Scene::Ksc,
        Scene::Botswana,
        Scene::PaviaUniversity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scene::IndianPines => "indian-pines",
            Scene::Salinas => "salinas",
            Scene::PaviaCenter => "pavia-center",
            Scene::Ksc => "ksc",
            Scene::Botswana => "botswana",
            Scene::PaviaUniversity => "paviau",
        }
    }

    /// `(NSW window, PCA dimension, beta1)`.
    pub fn defaults(self) -> (usize, usize, f64) {
        match self {
            Scene::IndianPines => (21, 25, 0.2),
            Scene::Salinas => (29, 41, 0.8),
            Scene::PaviaCenter => (11, 9, 0.2),
            Scene::Ksc => (17, 67, 0.1),
            Scene::Botswana => (17, 9, 0.2),
            Scene::PaviaUniversity => (5, 23, 0.2),
        }
    }
}

impl FromStr for Scene {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Scene::ALL
            .into_iter()
            .find(|sc| sc.name() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = Scene::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("unknown scene {s:?}, expected one of {}", names.join(", ")))
            })
    }
}

/// Raw configuration as read from a file or assembled from flags. Every
/// field is optional; [`ConfigFile::merge`] layers sources and
/// [`PipelineConfig::resolve`] applies defaults and validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub scene: Option<String>,
    pub cube: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    pub per_class: Option<usize>,
    pub seed: Option<u64>,
    pub stages: Option<String>,

    pub nsw_window: Option<usize>,
    pub nsw_offset_min: Option<usize>,
    pub nsw_eps: Option<f64>,

    pub pca_dims: Option<usize>,
    pub pca_center: Option<bool>,

    pub svc_grid_nu: Option<Vec<f64>>,
    pub svc_grid_gamma: Option<Vec<f64>>,
    pub svc_tol: Option<f64>,
    pub svc_folds: Option<usize>,
    pub svc_max_iter: Option<usize>,

    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub admm_mu: Option<f64>,
    pub stv_tol: Option<f64>,
    pub stv_max_iters: Option<usize>,
    pub stv_isotropic: Option<bool>,

    pub synth_rows: Option<usize>,
    pub synth_cols: Option<usize>,
    pub synth_bands: Option<usize>,
    pub synth_classes: Option<u16>,
    pub synth_patch: Option<usize>,
    pub synth_noise: Option<f64>,
    pub synth_seed: Option<u64>,
}

macro_rules! merge_fields {
    ($base:ident, $over:ident; $($f:ident),* $(,)?) => {
        ConfigFile { $($f: $over.$f.or($base.$f)),* }
    };
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    /// Field-wise overlay: values set in `over` win.
    pub fn merge(self, over: ConfigFile) -> ConfigFile {
        let base = self;
        merge_fields!(base, over;
            scene, cube, labels, out, trials, per_class, seed, stages,
            nsw_window, nsw_offset_min, nsw_eps, pca_dims, pca_center,
            svc_grid_nu, svc_grid_gamma, svc_tol, svc_folds, svc_max_iter,
            beta1, beta2, admm_mu, stv_tol, stv_max_iters, stv_isotropic,
            synth_rows, synth_cols, synth_bands, synth_classes, synth_patch,
            synth_noise, synth_seed,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcaSettings {
    pub dims: usize,
    pub center: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files { cube: PathBuf, labels: PathBuf },
    Synthetic(SyntheticSceneSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<(HsiCube, LabelRaster)> {
        let (cube, gt) = match self {
            DataSource::Files { cube, labels } => (io::read_cube(cube)?, io::read_labels(labels)?),
            DataSource::Synthetic(spec) => io::generate_synthetic(spec)?,
        };
        crate::data::validate_pair(cube, gt)
    }
}

pub const DEFAULT_TRIALS: usize = 10;
pub const DEFAULT_PER_CLASS: usize = 10;
pub const DEFAULT_SEED: u64 = 0;

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scene: Option<Scene>,
    pub data: Option<DataSource>,
    pub out: Option<PathBuf>,
    pub trials: usize,
    pub per_class: usize,
    pub seed: u64,
    pub stages: Stages,
    /// Parameter blocks; `None` when neither given nor implied by the scene.
    pub nsw: Option<NswParams>,
    pub pca: Option<PcaSettings>,
    pub stv: Option<StvParams>,
    pub grid: CvGrid,
    pub limits: SolverLimits,
    pub folds: usize,
}

impl PipelineConfig {
    /// Applies scene and built-in defaults to `file` and validates the result.
    pub fn resolve(file: &ConfigFile) -> Result<Self> {
        let scene = file.scene.as_deref().map(Scene::from_str).transpose()?;
        let (scene_window, scene_dims, scene_beta1) = match scene {
            Some(s) => {
                let (w, d, b) = s.defaults();
                (Some(w), Some(d), Some(b))
            }
            None => (None, None, None),
        };
        let stages = match &file.stages {
            Some(s) => s.parse()?,
            None => Stages::ALL,
        };

        let nsw = file.nsw_window.or(scene_window).map(|window| NswParams {
            window,
            offset_min: file.nsw_offset_min.unwrap_or(0),
            eps: file.nsw_eps.unwrap_or(1e-12),
        });
        if let Some(p) = &nsw {
            p.validate().map_err(config_error)?;
        }

        let pca = file.pca_dims.or(scene_dims).map(|dims| PcaSettings {
            dims,
            center: file.pca_center.unwrap_or(true),
        });
        if pca.is_some_and(|p| p.dims == 0) {
            return Err(Error::Config("pca-dims must be positive".into()));
        }

        let defaults = StvParams::default();
        let stv = file.beta1.or(scene_beta1).map(|beta1| StvParams {
            beta1,
            beta2: file.beta2.unwrap_or(defaults.beta2),
            mu: file.admm_mu.unwrap_or(defaults.mu),
            tol: file.stv_tol.unwrap_or(defaults.tol),
            max_iter: file.stv_max_iters.unwrap_or(defaults.max_iter),
            isotropic: file.stv_isotropic.unwrap_or(false),
        });
        if let Some(p) = &stv {
            p.validate().map_err(config_error)?;
            if !(p.beta1 > 0.0) {
                return Err(Error::Config(format!("beta1 must be positive, got {}", p.beta1)));
            }
        }

        let default_grid = CvGrid::default();
        let grid = CvGrid {
            nu: file.svc_grid_nu.clone().unwrap_or(default_grid.nu),
            gamma: file.svc_grid_gamma.clone().unwrap_or(default_grid.gamma),
        };
        if grid.nu.is_empty() || grid.gamma.is_empty() {
            return Err(Error::Config("SVC grid must not be empty".into()));
        }
        let mut limits = SolverLimits::default();
        if let Some(t) = file.svc_tol {
            limits.tol = t;
        }
        if let Some(m) = file.svc_max_iter {
            limits.max_iter = m;
        }
        let folds = file.svc_folds.unwrap_or(5);
        for &nu in &grid.nu {
            for &gamma in &grid.gamma {
                SvcParams {
                    nu,
                    gamma,
                    limits,
                    folds,
                }
                .validate()
                .map_err(config_error)?;
            }
        }

        let data = resolve_data(file)?;
        let trials = file.trials.unwrap_or(DEFAULT_TRIALS);
        let per_class = file.per_class.unwrap_or(DEFAULT_PER_CLASS);
        if trials == 0 || per_class == 0 {
            return Err(Error::Config("trials and per-class must be positive".into()));
        }

        let config = Self {
            scene,
            data,
            out: file.out.clone(),
            trials,
            per_class,
            seed: file.seed.unwrap_or(DEFAULT_SEED),
            stages,
            nsw,
            pca,
            stv,
            grid,
            limits,
            folds,
        };
        config.check_stages(&stages)?;
        Ok(config)
    }

    /// Errors unless every stage enabled in `stages` has its parameters.
    pub fn check_stages(&self, stages: &Stages) -> Result<()> {
        let hint = if self.scene.is_some() {
            ""
        } else {
            " (no scene selected, so it must be given explicitly)"
        };
        if stages.nsw && self.nsw.is_none() {
            return Err(Error::Config(format!("nsw stage needs nsw-window{hint}")));
        }
        if stages.pca && self.pca.is_none() {
            return Err(Error::Config(format!("pca stage needs pca-dims{hint}")));
        }
        if stages.stv && self.stv.is_none() {
            return Err(Error::Config(format!("stv stage needs beta1{hint}")));
        }
        Ok(())
    }

    /// The flat form of this configuration, suitable for a snapshot file
    /// that reproduces the run.
    pub fn snapshot(&self) -> ConfigFile {
        let mut f = ConfigFile {
            scene: self.scene.map(|s| s.name().to_string()),
            out: self.out.clone(),
            trials: Some(self.trials),
            per_class: Some(self.per_class),
            seed: Some(self.seed),
            stages: Some(self.stages.spec()),
            svc_grid_nu: Some(self.grid.nu.clone()),
            svc_grid_gamma: Some(self.grid.gamma.clone()),
            svc_tol: Some(self.limits.tol),
            svc_folds: Some(self.folds),
            svc_max_iter: Some(self.limits.max_iter),
            ..ConfigFile::default()
        };
        if let Some(p) = &self.nsw {
            f.nsw_window = Some(p.window);
            f.nsw_offset_min = Some(p.offset_min);
            f.nsw_eps = Some(p.eps);
        }
        if let Some(p) = &self.pca {
            f.pca_dims = Some(p.dims);
            f.pca_center = Some(p.center);
        }
        if let Some(p) = &self.stv {
            f.beta1 = Some(p.beta1);
            f.beta2 = Some(p.beta2);
            f.admm_mu = Some(p.mu);
            f.stv_tol = Some(p.tol);
            f.stv_max_iters = Some(p.max_iter);
            f.stv_isotropic = Some(p.isotropic);
        }
        match &self.data {
            Some(DataSource::Files { cube, labels }) => {
                f.cube = Some(cube.clone());
                f.labels = Some(labels.clone());
            }
            Some(DataSource::Synthetic(s)) => {
                f.synth_rows = Some(s.rows);
                f.synth_cols = Some(s.cols);
                f.synth_bands = Some(s.bands);
                f.synth_classes = Some(s.classes);
                f.synth_patch = Some(s.patch_side);
                f.synth_noise = Some(s.noise_sigma);
                f.synth_seed = Some(s.seed);
            }
            None => {}
        }
        f
    }

    fn svc_params(&self, nu: f64, gamma: f64) -> SvcParams {
        SvcParams {
            nu,
            gamma,
            limits: self.limits,
            folds: self.folds,
        }
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::Config(m),
        e => e,
    }
}

fn resolve_data(file: &ConfigFile) -> Result<Option<DataSource>> {
    let synth = [
        file.synth_rows.is_some(),
        file.synth_cols.is_some(),
        file.synth_bands.is_some(),
        file.synth_classes.is_some(),
        file.synth_patch.is_some(),
        file.synth_noise.is_some(),
        file.synth_seed.is_some(),
    ]
    .contains(&true);
    let files = file.cube.is_some() || file.labels.is_some();
    match (files, synth) {
        (true, true) => Err(Error::Config(
            "give either cube/labels files or synth-* settings, not both".into(),
        )),
        (true, false) => match (&file.cube, &file.labels) {
            (Some(c), Some(l)) => Ok(Some(DataSource::Files {
                cube: c.clone(),
                labels: l.clone(),
            })),
            _ => Err(Error::Config("cube and labels must be given together".into())),
        },
        (false, true) => {
            let need = |v: Option<usize>, name: &str| {
                v.ok_or_else(|| Error::Config(format!("synthetic data needs {name}")))
            };
            let mut spec = SyntheticSceneSpec::new(
                need(file.synth_rows, "synth-rows")?,
                need(file.synth_cols, "synth-cols")?,
                need(file.synth_bands, "synth-bands")?,
                file.synth_classes
                    .ok_or_else(|| Error::Config("synthetic data needs synth-classes".into()))?,
            );
            if let Some(p) = file.synth_patch {
                spec.patch_side = p;
            }
            spec.noise_sigma = file.synth_noise.unwrap_or(0.0);
            spec.seed = file.synth_seed.or(file.seed).unwrap_or(DEFAULT_SEED);
            spec.validate().map_err(config_error)?;
            Ok(Some(DataSource::Synthetic(spec)))
        }
        (false, false) => Ok(None),
    }
}

/// Seeds used by one trial, derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    /// Identifies the trial in reports.
    pub trial: u64,
    pub sampling: u64,
    pub cv: u64,
    pub calibration: u64,
}

/// ChaCha8 seeded with `master`, switched to stream `trial`; the first
/// four outputs are the trial's seeds. Trials are therefore independent of
/// each other and of scheduling order.
pub fn trial_seeds(master: u64, trial: usize) -> TrialSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64);
    TrialSeeds {
        trial: rng.next_u64(),
        sampling: rng.next_u64(),
        cv: rng.next_u64(),
        calibration: rng.next_u64(),
    }
}

/// Training-independent features: `dim x pixels`, scaled so the largest
/// absolute value over labelled pixels is 1.
#[derive(Debug, Clone)]
pub struct PreparedFeatures {
    pub matrix: DMatrix<f64>,
    pub pca: Option<PcaModel>,
    pub scale: f64,
}

/// Runs the enabled pre-processing stages.
pub fn prepare_features(
    cube: &HsiCube,
    gt: &LabelRaster,
    stages: &Stages,
    config: &PipelineConfig,
) -> Result<PreparedFeatures> {
    config.check_stages(stages)?;
    let reconstructed;
    let source = if stages.nsw {
        let params = config.nsw.as_ref().expect("checked");
        reconstructed = nsw::reconstruct_cube(cube, params).map_err(|e| e.in_stage("nsw"))?;
        &reconstructed
    } else {
        cube
    };
    let bands = source.to_band_matrix();
    let (mut matrix, model) = if stages.pca {
        let p = config.pca.expect("checked");
        let model = pca::fit_pca(&bands, p.dims, p.center).map_err(|e| e.in_stage("pca"))?;
        (model.transform(&bands).map_err(|e| e.in_stage("pca"))?, Some(model))
    } else {
        (bands, None)
    };
    let max = gt
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != 0)
        .flat_map(|(p, _)| matrix.column(p).iter().map(|v| v.abs()).collect::<Vec<_>>())
        .fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 1.0 };
    matrix *= scale;
    Ok(PreparedFeatures {
        matrix,
        pca: model,
        scale,
    })
}

/// Everything one trial produces.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub training: TrainingSet,
    pub cv: CvResult,
    pub model: MulticlassModel,
    /// Probability tensor before smoothing.
    pub probabilities: ProbabilityTensor,
    /// Smoothed tensor and per-channel solver reports when STV ran.
    pub smoothed: Option<(ProbabilityTensor, Vec<ChannelReport>)>,
    pub prediction: LabelRaster,
}

/// Classifies the scene from prepared features and a given training set.
pub fn classify_scene(
    features: &PreparedFeatures,
    gt: &LabelRaster,
    training: &TrainingSet,
    stages: &Stages,
    config: &PipelineConfig,
    seeds: &TrialSeeds,
) -> Result<TrialRun> {
    config.check_stages(stages)?;
    let svc_stage = |e: Error| e.in_stage("svc");
    let columns: Vec<usize> = training
        .entries()
        .iter()
        .map(|e| e.row * gt.cols() + e.col)
        .collect();
    let labels: Vec<u16> = training.entries().iter().map(|e| e.class).collect();
    let samples = Features::from_columns(&features.matrix, &columns);
    let base = config.svc_params(config.grid.nu[0], config.grid.gamma[0]);
    let cv = svc::cross_validate(&samples, &labels, &config.grid, &base, seeds.cv)
        .map_err(svc_stage)?;
    let model = svc::train_multiclass(&samples, &labels, &cv.params, true, seeds.calibration)
        .map_err(svc_stage)?;
    let background: Vec<bool> = gt.labels().iter().map(|&l| l == 0).collect();
    let probabilities = svc::predict_probability_tensor(
        &model,
        &features.matrix,
        gt.rows(),
        gt.cols(),
        gt.classes() as usize,
        &background,
        training,
    )
    .map_err(svc_stage)?;

    let smoothed = if stages.stv {
        let params = config.stv.as_ref().expect("checked");
        Some(
            stv::smooth_tensor(&probabilities, &training.mask(), params)
                .map_err(|e| e.in_stage("stv"))?,
        )
    } else {
        None
    };
    let prediction = stv::classify(smoothed.as_ref().map_or(&probabilities, |s| &s.0))?;
    Ok(TrialRun {
        training: training.clone(),
        cv,
        model,
        probabilities,
        smoothed,
        prediction,
    })
}

/// Runs one complete trial: pre-processing, sampling and classification.
pub fn run_trial(
    cube: &HsiCube,
    gt: &LabelRaster,
    stages: &Stages,
    config: &PipelineConfig,
    trial: usize,
) -> Result<TrialRun> {
    let features = prepare_features(cube, gt, stages, config)?;
    let seeds = trial_seeds(config.seed, trial);
    let training = sample_training_set(gt, config.per_class, seeds.sampling)?;
    classify_scene(&features, gt, &training, stages, config, &seeds)
}

fn score_trial(
    trial: usize,
    features: &PreparedFeatures,
    gt: &LabelRaster,
    training: &TrainingSet,
    stages: &Stages,
    config: &PipelineConfig,
    seeds: &TrialSeeds,
) -> TrialResult {
    let run = || -> Result<(TrialOutcome, Vec<bool>)> {
        let r = classify_scene(features, gt, training, stages, config, seeds)?;
        let cm = eval::confusion(gt, &r.prediction, Some(training))?;
        let mut outcome = TrialOutcome::from_confusion(trial, seeds.trial, &cm, training)?;
        outcome.nu = r.cv.params.nu;
        outcome.gamma = r.cv.params.gamma;
        outcome.stv_converged = r
            .smoothed
            .as_ref()
            .map(|(_, reports)| reports.iter().all(|c| c.converged));
        Ok((outcome, eval::misclassified(gt, &r.prediction, Some(training))))
    };
    run().map_err(|e| TrialFailure {
        trial,
        seed: seeds.trial,
        message: e.to_string(),
    })
}

/// Runs every configured trial with the configured stage set.
///
/// Pre-processing failures abort the run; failures inside a trial are
/// recorded in the report and the remaining trials continue.
pub fn run_trials(cube: &HsiCube, gt: &LabelRaster, config: &PipelineConfig) -> Result<TrialReport> {
    Ok(ablate(cube, gt, config, &[config.stages])?.remove(0))
}

/// Runs each stage set over the same trials. Trial `t` uses the same
/// training set under every stage set, so the comparison is paired.
pub fn ablate(
    cube: &HsiCube,
    gt: &LabelRaster,
    config: &PipelineConfig,
    stage_sets: &[Stages],
) -> Result<Vec<TrialReport>> {
    if stage_sets.is_empty() {
        return Err(Error::Config("no stage sets to compare".into()));
    }
    for s in stage_sets {
        config.check_stages(s)?;
    }
    let seeds: Vec<TrialSeeds> = (0..config.trials).map(|t| trial_seeds(config.seed, t)).collect();
    let training: Vec<Result<TrainingSet>> = seeds
        .iter()
        .map(|s| sample_training_set(gt, config.per_class, s.sampling))
        .collect();

    let mut prepared: Vec<((bool, bool), PreparedFeatures)> = Vec::new();
    let mut reports = Vec::with_capacity(stage_sets.len());
    for stages in stage_sets {
        let key = (stages.nsw, stages.pca);
        if !prepared.iter().any(|(k, _)| *k == key) {
            prepared.push((key, prepare_features(cube, gt, stages, config)?));
        }
        let features = &prepared.iter().find(|(k, _)| *k == key).expect("inserted").1;
        let results: Vec<TrialResult> = (0..config.trials)
            .into_par_iter()
            .map(|t| match &training[t] {
                Ok(tr) => score_trial(t, features, gt, tr, stages, config, &seeds[t]),
                Err(e) => Err(TrialFailure {
                    trial: t,
                    seed: seeds[t].trial,
                    message: e.to_string(),
                }),
            })
            .collect();
        reports.push(TrialReport::assemble(
            stages.label(),
            gt.rows(),
            gt.cols(),
            gt.classes() as usize,
            results,
        ));
    }
    Ok(reports)
}

/// Files written by [`write_outputs`].
pub const REPORT_FILE: &str = "report.csv";
pub const TRIALS_FILE: &str = "trials.csv";
pub const CONFIG_FILE: &str = "config.toml";

/// Error map file name for a method label.
pub fn error_map_file(label: &str) -> String {
    format!("errors_{}.pgm", label.to_lowercase())
}

/// Writes the summary CSV, per-trial CSV, one error map per report and the
/// resolved configuration into `dir`.
pub fn write_outputs(dir: &Path, config: &PipelineConfig, reports: &[TrialReport]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::export_report(reports, &dir.join(REPORT_FILE))?;
    io::export_trials(reports, &dir.join(TRIALS_FILE))?;
    for r in reports {
        io::export_error_map(
            &r.error_counts,
            r.rows,
            r.cols,
            r.trials.len() as u32,
            &dir.join(error_map_file(&r.label)),
        )?;
    }
    io::write_text(&dir.join(CONFIG_FILE), &config.snapshot().to_toml())
}
