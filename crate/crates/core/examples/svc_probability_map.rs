// Trains a calibrated multi-class nu-SVC on a handful of labelled pixels and
// turns it into per-class probability maps.

use hsi_stv::io::{generate_synthetic, SyntheticSceneSpec};
use hsi_stv::svc::{self, model_io, CvGrid, Features, SvcParams};
use hsi_stv::{sample_training_set, stv, Result};

/// Returns the fraction of test pixels whose most probable class is correct.
pub fn run_example() -> Result<f64> {
    let spec = SyntheticSceneSpec {
        patch_side: 6,
        noise_sigma: 0.06,
        seed: 21,
        ..SyntheticSceneSpec::new(30, 30, 12, 3)
    };
    let (cube, gt) = generate_synthetic(&spec)?;
    let features = cube.to_band_matrix();
    let training = sample_training_set(&gt, 8, 1)?;

    let columns: Vec<usize> = training.entries().iter().map(|e| e.row * gt.cols() + e.col).collect();
    let labels: Vec<u16> = training.entries().iter().map(|e| e.class).collect();
    let samples = Features::from_columns(&features, &columns);

    let grid = CvGrid {
        nu: vec![0.1, 0.3, 0.5],
        gamma: vec![0.5, 2.0, 8.0],
    };
    let cv = svc::cross_validate(&samples, &labels, &grid, &SvcParams::new(0.1, 1.0), 2)?;
    println!(
        "selected nu = {}, gamma = {} (cv accuracy {:.3})",
        cv.params.nu, cv.params.gamma, cv.accuracy
    );
    let model = svc::train_multiclass(&samples, &labels, &cv.params, true, 3)?;

    // Models round-trip through their binary encoding.
    let model = model_io::decode(&model_io::encode(&model))?;

    let background: Vec<bool> = gt.labels().iter().map(|&l| l == 0).collect();
    let tensor = svc::predict_probability_tensor(
        &model,
        &features,
        gt.rows(),
        gt.cols(),
        gt.classes() as usize,
        &background,
        &training,
    )?;
    let pred = stv::classify(&tensor)?;
    let mask = training.mask();
    let (mut right, mut total) = (0usize, 0usize);
    for ((&truth, &guess), &trained) in gt.labels().iter().zip(pred.labels()).zip(&mask) {
        if truth != 0 && !trained {
            total += 1;
            right += usize::from(guess == truth);
        }
    }
    let centre = (gt.rows() / 2) * gt.cols() + gt.cols() / 2;
    println!("probabilities at the centre pixel: {:?}", tensor.pixel(centre));
    let acc = right as f64 / total as f64;
    println!("argmax accuracy on {total} test pixels: {:.2}%", 100.0 * acc);
    Ok(acc)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
