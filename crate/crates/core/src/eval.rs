//! Accuracy metrics and multi-trial aggregation.
//!
//! Evaluated pixels are the labelled (non-background) pixels that were not
//! used for training.

use serde::{Deserialize, Serialize};

use crate::data::{LabelRaster, Shortfall, TrainingSet};
use crate::error::{Error, Result};

/// Confusion counts: `count(t, p)` is the number of evaluated pixels of true
/// class `t` predicted as `p` (both 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != classes * classes {
            return Err(Error::Dimension(format!(
                "{} counts for a {classes}x{classes} confusion matrix",
                counts.len()
            )));
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn count(&self, truth: u16, predicted: u16) -> u64 {
        self.counts[(truth as usize - 1) * self.classes + predicted as usize - 1]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn row_sum(&self, t: usize) -> u64 {
        self.counts[t * self.classes..(t + 1) * self.classes].iter().sum()
    }

    fn col_sum(&self, p: usize) -> u64 {
        (0..self.classes).map(|t| self.counts[t * self.classes + p]).sum()
    }

    fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.counts[k * self.classes + k]).sum()
    }

    /// Overall accuracy.
    pub fn overall_accuracy(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(Error::EmptyConfusion);
        }
        Ok(self.trace() as f64 / n as f64)
    }

    /// Accuracy of each class, `None` for classes without evaluated pixels.
    pub fn class_accuracy(&self) -> Vec<Option<f64>> {
        (0..self.classes)
            .map(|k| {
                let n = self.row_sum(k);
                (n > 0).then(|| self.counts[k * self.classes + k] as f64 / n as f64)
            })
            .collect()
    }

    /// Mean of the defined per-class accuracies.
    pub fn average_accuracy(&self) -> Result<f64> {
        let defined: Vec<f64> = self.class_accuracy().into_iter().flatten().collect();
        if defined.is_empty() {
            return Err(Error::EmptyConfusion);
        }
        Ok(defined.iter().sum::<f64>() / defined.len() as f64)
    }

    /// Classes that had no evaluated pixels and were left out of the average.
    pub fn unevaluated_classes(&self) -> Vec<u16> {
        (0..self.classes)
            .filter(|&k| self.row_sum(k) == 0)
            .map(|k| k as u16 + 1)
            .collect()
    }

    /// Cohen's kappa; `None` when chance agreement is 1 and kappa is undefined.
    pub fn kappa(&self) -> Result<Option<f64>> {
        let n = self.total() as f64;
        let po = self.overall_accuracy()?;
        let pe = (0..self.classes)
            .map(|k| self.row_sum(k) as f64 * self.col_sum(k) as f64)
            .sum::<f64>()
            / (n * n);
        Ok((pe < 1.0).then(|| (po - pe) / (1.0 - pe)))
    }
}

/// Mask of the pixels that count for evaluation.
pub fn evaluation_mask(gt: &LabelRaster, training: Option<&TrainingSet>) -> Vec<bool> {
    let mut mask: Vec<bool> = gt.labels().iter().map(|&l| l != 0).collect();
    if let Some(t) = training {
        for e in t.entries() {
            mask[e.row * gt.cols() + e.col] = false;
        }
    }
    mask
}

/// Tabulates predictions over the evaluated pixels.
pub fn confusion(
    gt: &LabelRaster,
    predicted: &LabelRaster,
    training: Option<&TrainingSet>,
) -> Result<ConfusionMatrix> {
    if gt.rows() != predicted.rows() || gt.cols() != predicted.cols() {
        return Err(Error::Dimension(format!(
            "ground truth is {}x{}, prediction is {}x{}",
            gt.rows(),
            gt.cols(),
            predicted.rows(),
            predicted.cols()
        )));
    }
    let c = gt.classes() as usize;
    let mut counts = vec![0u64; c * c];
    let mask = evaluation_mask(gt, training);
    for (p, (&t, &y)) in gt.labels().iter().zip(predicted.labels()).enumerate() {
        if !mask[p] {
            continue;
        }
        if y == 0 || y as usize > c {
            return Err(Error::LabelRange {
                row: p / gt.cols(),
                col: p % gt.cols(),
                label: y,
                max: gt.classes(),
            });
        }
        counts[(t as usize - 1) * c + y as usize - 1] += 1;
    }
    let cm = ConfusionMatrix::from_counts(c, counts)?;
    if cm.total() == 0 {
        return Err(Error::EmptyConfusion);
    }
    Ok(cm)
}

/// Evaluated pixels whose prediction is wrong.
pub fn misclassified(
    gt: &LabelRaster,
    predicted: &LabelRaster,
    training: Option<&TrainingSet>,
) -> Vec<bool> {
    let mask = evaluation_mask(gt, training);
    gt.labels()
        .iter()
        .zip(predicted.labels())
        .zip(mask)
        .map(|((t, y), m)| m && t != y)
        .collect()
}

/// Metrics of one successful trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    /// Selected hyperparameters.
    pub nu: f64,
    pub gamma: f64,
    pub oa: f64,
    pub aa: f64,
    pub kappa: Option<f64>,
    pub class_accuracy: Vec<Option<f64>>,
    pub training_pixels: usize,
    pub shortfall: Vec<Shortfall>,
    /// Whether every STV channel converged; `None` when STV was off.
    pub stv_converged: Option<bool>,
}

impl TrialOutcome {
    /// Fills the metric fields from a confusion matrix.
    pub fn from_confusion(
        trial: usize,
        seed: u64,
        cm: &ConfusionMatrix,
        training: &TrainingSet,
    ) -> Result<Self> {
        Ok(Self {
            trial,
            seed,
            nu: f64::NAN,
            gamma: f64::NAN,
            oa: cm.overall_accuracy()?,
            aa: cm.average_accuracy()?,
            kappa: cm.kappa()?,
            class_accuracy: cm.class_accuracy(),
            training_pixels: training.len(),
            shortfall: training.shortfall().to_vec(),
            stv_converged: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub message: String,
}

/// Mean and sample standard deviation of a metric over trials.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stat {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub count: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Self::default();
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean: Some(mean),
            std: Some(std),
            count: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub oa: Stat,
    pub aa: Stat,
    pub kappa: Stat,
    /// Mean per-class accuracy over the trials in which the class was evaluated.
    pub class_accuracy: Vec<Option<f64>>,
}

/// Results of one method over all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub label: String,
    pub rows: usize,
    pub cols: usize,
    pub classes: usize,
    /// Successful trials in trial order.
    pub trials: Vec<TrialOutcome>,
    pub failures: Vec<TrialFailure>,
    /// Per pixel, the number of successful trials that misclassified it.
    pub error_counts: Vec<u32>,
}

/// What a single trial hands back to [`TrialReport::assemble`].
pub type TrialResult = std::result::Result<(TrialOutcome, Vec<bool>), TrialFailure>;

impl TrialReport {
    /// Collects per-trial results. The order of `results` does not matter;
    /// trials are sorted by index so the report is deterministic.
    pub fn assemble(
        label: impl Into<String>,
        rows: usize,
        cols: usize,
        classes: usize,
        mut results: Vec<TrialResult>,
    ) -> Self {
        results.sort_by_key(|r| match r {
            Ok((t, _)) => t.trial,
            Err(f) => f.trial,
        });
        let mut report = Self {
            label: label.into(),
            rows,
            cols,
            classes,
            trials: Vec::new(),
            failures: Vec::new(),
            error_counts: vec![0; rows * cols],
        };
        for r in results {
            match r {
                Ok((outcome, wrong)) => {
                    for (c, w) in report.error_counts.iter_mut().zip(wrong) {
                        *c += u32::from(w);
                    }
                    report.trials.push(outcome);
                }
                Err(f) => report.failures.push(f),
            }
        }
        report
    }

    pub fn summary(&self) -> Summary {
        let class_accuracy = (0..self.classes)
            .map(|k| {
                Stat::of(
                    self.trials
                        .iter()
                        .filter_map(|t| t.class_accuracy.get(k).copied().flatten()),
                )
                .mean
            })
            .collect();
        Summary {
            oa: Stat::of(self.trials.iter().map(|t| t.oa)),
            aa: Stat::of(self.trials.iter().map(|t| t.aa)),
            kappa: Stat::of(self.trials.iter().filter_map(|t| t.kappa)),
            class_accuracy,
        }
    }

    /// Highest error count, bounded by the number of trials.
    pub fn max_errors(&self) -> u32 {
        self.error_counts.iter().copied().max().unwrap_or(0)
    }
}

/// Plain-text table of several reports, accuracies in percent.
pub fn format_table(reports: &[TrialReport]) -> String {
    let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", 100.0 * x));
    let summaries: Vec<Summary> = reports.iter().map(TrialReport::summary).collect();
    let mut lines = Vec::new();
    let mut header = format!("{:<10}", "");
    for r in reports {
        header.push_str(&format!(" {:>16}", r.label));
    }
    lines.push(header);
    let classes = reports.iter().map(|r| r.classes).max().unwrap_or(0);
    for k in 0..classes {
        let mut line = format!("{:<10}", format!("class {}", k + 1));
        for s in &summaries {
            line.push_str(&format!(" {:>16}", pct(s.class_accuracy.get(k).copied().flatten())));
        }
        lines.push(line);
    }
    for (name, pick) in [
        ("OA", (|s: &Summary| s.oa) as fn(&Summary) -> Stat),
        ("AA", |s| s.aa),
        ("kappa", |s| s.kappa),
    ] {
        let mut line = format!("{name:<10}");
        for s in &summaries {
            let st = pick(s);
            let cell = match (st.mean, st.std) {
                (Some(m), Some(d)) => format!("{} ± {}", pct(Some(m)), pct(Some(d))),
                _ => "-".to_string(),
            };
            line.push_str(&format!(" {cell:>16}"));
        }
        lines.push(line);
    }
    lines.join("\n")
}
