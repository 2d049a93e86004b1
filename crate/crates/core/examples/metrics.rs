// Accuracy metrics from a confusion matrix, and aggregation over trials.

use hsi_stv::eval::{self, ConfusionMatrix, Stat};
use hsi_stv::{LabelRaster, Result};

/// Returns `(OA, AA, kappa)` of a small hand-made prediction.
pub fn run_example() -> Result<(f64, f64, f64)> {
    let truth = LabelRaster::new(3, 4, vec![1, 1, 1, 2, 1, 1, 2, 2, 0, 3, 3, 3], 3)?;
    let pred = LabelRaster::new(3, 4, vec![1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 3, 1], 3)?;
    let cm = eval::confusion(&truth, &pred, None)?;
    for t in 1..=3u16 {
        let row: Vec<u64> = (1..=3u16).map(|p| cm.count(t, p)).collect();
        println!("true class {t}: {row:?}");
    }
    let (oa, aa) = (cm.overall_accuracy()?, cm.average_accuracy()?);
    let kappa = cm.kappa()?.unwrap_or(f64::NAN);
    println!("OA {oa:.4}  AA {aa:.4}  kappa {kappa:.4}");
    println!("per class: {:?}", cm.class_accuracy());

    // When every pixel falls into one class, chance agreement is 1 and
    // kappa is undefined.
    let degenerate = ConfusionMatrix::from_counts(2, vec![5, 0, 0, 0])?;
    println!("single-class kappa: {:?}", degenerate.kappa()?);

    let oas = Stat::of([0.91, 0.93, 0.92]);
    println!(
        "OA over trials: mean {:.4}, sample std {:.4}",
        oas.mean.unwrap_or(f64::NAN),
        oas.std.unwrap_or(f64::NAN)
    );
    Ok((oa, aa, kappa))
}

fn main() -> Result<()> {
    run_example().map(|_| ())
}
