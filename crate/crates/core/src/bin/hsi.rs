//! Command-line front end. Exit status: 0 on success, 1 for configuration
//! errors, 2 when a stage fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hsi_stv::eval::format_table;
use hsi_stv::io::{self, Interleave, RawLayout, RawScalar, SyntheticSceneSpec};
use hsi_stv::pipeline::{self, ConfigFile, PipelineConfig, Stages};
use hsi_stv::{Error, Result};

#[derive(Parser)]
#[command(name = "hsi", version, about = "Hyperspectral pixel classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the multi-trial protocol with one stage set.
    Run(RunArgs),
    /// Compare stage sets on identical training sets.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Stage set such as `svc,stv`; repeat to compare several. Defaults
        /// to SVC, SVC-STV, NSW-PCA-SVC and NSW-PCA-SVC-STV.
        #[arg(long = "set")]
        sets: Vec<String>,
    },
    /// Generate a synthetic scene.
    Synth {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        bands: usize,
        #[arg(long)]
        classes: u16,
        #[arg(long, default_value_t = 8)]
        patch: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_cube: PathBuf,
        #[arg(long)]
        out_labels: PathBuf,
    },
    /// Convert a headerless raw dump into the cube or label format.
    Convert {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        /// Band count; ignored with `--labels`.
        #[arg(long, default_value_t = 1)]
        bands: usize,
        /// u8, u16, i16, f32 or f64.
        #[arg(long, default_value = "f32")]
        dtype: String,
        #[arg(long)]
        big_endian: bool,
        /// bsq, bil or bip.
        #[arg(long, default_value = "bsq")]
        interleave: String,
        /// Produce a label file instead of a cube.
        #[arg(long)]
        labels: bool,
    },
    /// Describe a cube, label or model file.
    Inspect { path: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with the same keys as these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scene: Option<String>,
    #[arg(long)]
    cube: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output directory for reports, error maps and the config snapshot.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stage list, e.g. `nsw,pca,svc,stv`.
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    no_nsw: bool,
    #[arg(long)]
    no_pca: bool,
    #[arg(long)]
    no_stv: bool,
    #[arg(long)]
    nsw_window: Option<usize>,
    #[arg(long)]
    nsw_offset_min: Option<usize>,
    #[arg(long)]
    nsw_eps: Option<f64>,
    #[arg(long)]
    pca_dims: Option<usize>,
    #[arg(long)]
    pca_no_center: bool,
    #[arg(long, value_delimiter = ',')]
    svc_grid_nu: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    svc_grid_gamma: Option<Vec<f64>>,
    #[arg(long)]
    svc_tol: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    admm_mu: Option<f64>,
    #[arg(long)]
    stv_tol: Option<f64>,
    #[arg(long)]
    stv_max_iters: Option<usize>,
    #[arg(long)]
    stv_isotropic: bool,
    #[arg(long)]
    synth_rows: Option<usize>,
    #[arg(long)]
    synth_cols: Option<usize>,
    #[arg(long)]
    synth_bands: Option<usize>,
    #[arg(long)]
    synth_classes: Option<u16>,
    #[arg(long)]
    synth_patch: Option<usize>,
    #[arg(long)]
    synth_noise: Option<f64>,
}

impl RunArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let flags = ConfigFile {
            scene: self.scene.clone(),
            cube: self.cube.clone(),
            labels: self.labels.clone(),
            out: self.out.clone(),
            trials: self.trials,
            per_class: self.per_class,
            seed: self.seed,
            stages: self.stages.clone(),
            nsw_window: self.nsw_window,
            nsw_offset_min: self.nsw_offset_min,
            nsw_eps: self.nsw_eps,
            pca_dims: self.pca_dims,
            pca_center: self.pca_no_center.then_some(false),
            svc_grid_nu: self.svc_grid_nu.clone(),
            svc_grid_gamma: self.svc_grid_gamma.clone(),
            svc_tol: self.svc_tol,
            beta1: self.beta1,
            beta2: self.beta2,
            admm_mu: self.admm_mu,
            stv_tol: self.stv_tol,
            stv_max_iters: self.stv_max_iters,
            stv_isotropic: self.stv_isotropic.then_some(true),
            synth_rows: self.synth_rows,
            synth_cols: self.synth_cols,
            synth_bands: self.synth_bands,
            synth_classes: self.synth_classes,
            synth_patch: self.synth_patch,
            synth_noise: self.synth_noise,
            ..ConfigFile::default()
        };
        let mut config = PipelineConfig::resolve(&file.merge(flags))?;
        config.stages.nsw &= !self.no_nsw;
        config.stages.pca &= !self.no_pca;
        config.stages.stv &= !self.no_stv;
        Ok(config)
    }
}

fn execute(config: &PipelineConfig, sets: &[Stages]) -> Result<()> {
    let data = config.data.as_ref().ok_or_else(|| {
        Error::Config("no input: give --cube and --labels or synth-* settings".into())
    })?;
    let (cube, gt) = data.load()?;
    let reports = pipeline::ablate(&cube, &gt, config, sets)?;
    println!("{}", format_table(&reports));
    for r in &reports {
        for f in &r.failures {
            eprintln!("{}: trial {} failed: {}", r.label, f.trial, f.message);
        }
    }
    if let Some(dir) = &config.out {
        pipeline::write_outputs(dir, config, &reports)?;
        eprintln!("results written to {}", dir.display());
    }
    if let Some(r) = reports.iter().find(|r| r.trials.is_empty()) {
        return Err(Error::Stage {
            stage: "trials",
            source: Box::new(Error::InvalidParameter(format!("every trial of {} failed", r.label))),
        });
    }
    Ok(())
}

fn inspect(path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if bytes.starts_with(io::CUBE_MAGIC.as_bytes()) {
        let cube = io::decode_cube(path, &bytes)?;
        let (lo, hi) = cube
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        println!(
            "cube {} x {} x {} bands, values in [{lo}, {hi}]",
            cube.rows(),
            cube.cols(),
            cube.bands()
        );
    } else if bytes.starts_with(io::LABEL_MAGIC.as_bytes()) {
        let gt = io::decode_labels(path, &bytes)?;
        println!("labels {} x {}, {} classes", gt.rows(), gt.cols(), gt.classes());
        for (k, n) in gt.histogram().iter().enumerate() {
            println!("  class {k:>3}: {n}");
        }
    } else if bytes.starts_with(hsi_stv::svc::model_io::MAGIC) {
        let m = hsi_stv::svc::model_io::decode(&bytes)?;
        println!(
            "model: {} classes, dim {}, nu {}, gamma {}, {} pairs",
            m.classes.len(),
            m.dim,
            m.nu,
            m.gamma,
            m.pairs.len()
        );
    } else {
        return Err(Error::Config(format!("{}: unrecognised file type", path.display())));
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let config = args.config()?;
            execute(&config, &[config.stages])
        }
        Command::Ablate { run, sets } => {
            let config = run.config()?;
            let sets: Vec<Stages> = if sets.is_empty() {
                ["svc", "svc,stv", "nsw,pca,svc", "nsw,pca,svc,stv"]
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<_>>()?
            } else {
                sets.iter().map(|s| s.parse()).collect::<Result<_>>()?
            };
            execute(&config, &sets)
        }
        Command::Synth {
            rows,
            cols,
            bands,
            classes,
            patch,
            noise,
            seed,
            out_cube,
            out_labels,
        } => {
            let spec = SyntheticSceneSpec {
                patch_side: patch,
                noise_sigma: noise,
                seed,
                ..SyntheticSceneSpec::new(rows, cols, bands, classes)
            };
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
            let (cube, gt) = io::generate_synthetic(&spec)?;
            io::write_cube(&cube, &out_cube)?;
            io::write_labels(&gt, &out_labels)
        }
        Command::Convert {
            input,
            out,
            rows,
            cols,
            bands,
            dtype,
            big_endian,
            interleave,
            labels,
        } => {
            let scalar: RawScalar = dtype.parse()?;
            let bytes = std::fs::read(&input).map_err(|e| Error::Io {
                path: input.clone(),
                source: e,
            })?;
            if labels {
                let gt = io::convert_raw_labels(&bytes, rows, cols, scalar, big_endian)?;
                io::write_labels(&gt, &out)
            } else {
                let layout = RawLayout {
                    rows,
                    cols,
                    bands,
                    scalar,
                    big_endian,
                    interleave: interleave.parse::<Interleave>()?,
                };
                io::write_cube(&io::convert_raw_cube(&bytes, &layout)?, &out)
            }
        }
        Command::Inspect { path } => inspect(&path),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 1 } else { 2 })
        }
    }
}
