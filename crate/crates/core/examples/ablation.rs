// Paired comparison of stage sets. Every stage set sees the same training
// pixels in each trial, so differences come from the stages alone.

use hsi_stv::eval::{format_table, TrialReport};
use hsi_stv::io::{generate_synthetic, SyntheticSceneSpec};
use hsi_stv::pipeline::{ablate, write_outputs, ConfigFile, PipelineConfig, Stages};
use hsi_stv::Result;

pub fn run_example() -> Result<Vec<TrialReport>> {
    let spec = SyntheticSceneSpec {
        patch_side: 8,
        noise_sigma: 0.15,
        seed: 8,
        ..SyntheticSceneSpec::new(32, 32, 12, 4)
    };
    let (cube, gt) = generate_synthetic(&spec)?;
    let config = PipelineConfig::resolve(&ConfigFile::from_toml(
        "trials = 2\nper-class = 8\nseed = 4\nnsw-window = 5\npca-dims = 5\nbeta1 = 0.2\n",
    )?)?;
    let sets: Vec<Stages> = ["svc", "svc,stv", "nsw,pca,svc", "nsw,pca,svc,stv"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_>>()?;
    let reports = ablate(&cube, &gt, &config, &sets)?;
    println!("{}", format_table(&reports));

    let dir = std::env::temp_dir().join(format!("hsi-ablation-example-{}", std::process::id()));
    write_outputs(&dir, &config, &reports)?;
    println!("reports and error maps written to {}", dir.display());
    Ok(reports)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
