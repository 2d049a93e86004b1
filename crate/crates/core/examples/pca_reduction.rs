// Band reduction with PCA: variance captured and reconstruction error as a
// function of the number of retained components.

use hsi_stv::io::{generate_synthetic, SyntheticSceneSpec};
use hsi_stv::pca::fit_pca;
use hsi_stv::Result;

/// Returns the captured variance fraction for 1..=6 components.
pub fn run_example() -> Result<Vec<f64>> {
    let spec = SyntheticSceneSpec {
        noise_sigma: 0.03,
        seed: 3,
        ..SyntheticSceneSpec::new(24, 24, 30, 5)
    };
    let (cube, _) = generate_synthetic(&spec)?;
    let bands = cube.to_band_matrix();

    let mut captured = Vec::new();
    for dims in 1..=6 {
        let model = fit_pca(&bands, dims, true)?;
        let back = model.inverse_transform(&model.transform(&bands)?)?;
        let err = (&bands - back).norm() / bands.norm();
        println!(
            "{dims} components: {:6.2}% variance, relative reconstruction error {err:.4}",
            100.0 * model.captured_variance()
        );
        captured.push(model.captured_variance());
    }
    Ok(captured)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
