// Smoothed-TV denoising of a single probability map with salt-and-pepper
// noise, for a range of regularization weights.

use hsi_stv::stv::{stv_denoise, StvParams};
use hsi_stv::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Returns `(beta1, pixels on the wrong side of 0.5)` for each weight tried.
pub fn run_example() -> Result<Vec<(f64, usize)>> {
    let (rows, cols) = (40, 40);
    // A disc of high probability on a low background.
    let truth: Vec<f64> = (0..rows * cols)
        .map(|p| {
            let (i, j) = ((p / cols) as f64 - 20.0, (p % cols) as f64 - 20.0);
            if i * i + j * j < 150.0 { 0.8 } else { 0.2 }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noisy: Vec<f64> = truth
        .iter()
        .map(|&v| if rng.random_bool(0.1) { 1.0 - v } else { v })
        .collect();
    let wrong = |u: &[f64]| u.iter().zip(&truth).filter(|(a, b)| (**a > 0.5) != (**b > 0.5)).count();
    println!("flipped pixels in the input: {}", wrong(&noisy));

    let free = vec![false; rows * cols];
    let mut out = Vec::new();
    for beta1 in [0.05, 0.2, 0.8] {
        let params = StvParams {
            beta1,
            ..StvParams::default()
        };
        let r = stv_denoise(&noisy, rows, cols, &free, &params)?;
        println!(
            "beta1 {beta1:>4}: {:>3} wrong, {} iterations, objective {:.4}",
            wrong(&r.u),
            r.iterations,
            r.objective
        );
        out.push((beta1, wrong(&r.u)));
    }
    Ok(out)
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
