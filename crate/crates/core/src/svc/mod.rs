//! Pixel-wise nu-SVC classification with calibrated class probabilities.
//!
//! Multiclass problems use one-against-one decomposition: one binary nu-SVC
//! per unordered class pair, oriented so the smaller class id is the
//! positive side. Each binary decision value is mapped to a pairwise
//! probability with a Platt sigmoid fitted on internal cross-validation
//! outputs, and the pairwise probabilities of a pixel are coupled into one
//! posterior vector.

pub mod coupling;
pub mod kernel;
pub mod model_io;
pub mod platt;
pub mod smo;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use coupling::pairwise_coupling;
pub use kernel::rbf_kernel;
pub use platt::{fit_platt, Sigmoid};
pub use smo::SolverLimits;

use crate::data::{ProbabilityTensor, TrainingSet};
use crate::error::{Error, Result};
use kernel::{DenseGram, Gram, RbfGram, SubGram};

/// Pairwise probabilities are clipped into `[MIN_PAIR_PROB, 1 - MIN_PAIR_PROB]`.
pub const MIN_PAIR_PROB: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvcParams {
    pub nu: f64,
    pub gamma: f64,
    pub limits: SolverLimits,
    /// Folds for hyperparameter selection and for Platt decision values.
    pub folds: usize,
}

impl SvcParams {
    pub fn new(nu: f64, gamma: f64) -> Self {
        Self {
            nu,
            gamma,
            limits: SolverLimits::default(),
            folds: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "nu must be in (0, 1], got {}",
                self.nu
            )));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.limits.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "solver tolerance must be positive, got {}",
                self.limits.tol
            )));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        Ok(())
    }
}

/// Row-major sample matrix: one `dim`-vector per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    dim: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::Dimension(format!(
                "{} values do not split into rows of {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    /// Gathers the given columns of a `dim x n` feature matrix.
    pub fn from_columns(matrix: &DMatrix<f64>, columns: &[usize]) -> Self {
        let dim = matrix.nrows();
        let mut data = Vec::with_capacity(dim * columns.len());
        for &c in columns {
            data.extend(matrix.column(c).iter());
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn subset(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self {
            dim: self.dim,
            data,
        }
    }
}

/// A trained binary nu-SVC.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryModel {
    /// Indices of the support vectors in the training sample list.
    pub support: Vec<usize>,
    /// Support-vector coordinates, row-major.
    pub vectors: Features,
    /// `y_i a_i / r` for each support vector.
    pub coef: Vec<f64>,
    /// Decision offset: `f(x) = sum coef_i K(sv_i, x) - rho`.
    pub rho: f64,
    /// Margin scale of the nu formulation; coefficients are divided by it
    /// when positive and left unscaled otherwise.
    pub margin: f64,
    pub gamma: f64,
    pub sigmoid: Option<Sigmoid>,
    pub iterations: usize,
}

impl BinaryModel {
    /// Bias `b` of the hyperplane `w^T phi(x) + b`.
    pub fn bias(&self) -> f64 {
        -self.rho
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        (0..self.coef.len())
            .map(|k| self.coef[k] * rbf_kernel(self.vectors.row(k), x, self.gamma))
            .sum::<f64>()
            - self.rho
    }

    /// Probability of the positive side, clipped away from 0 and 1.
    pub fn probability(&self, x: &[f64]) -> Option<f64> {
        let s = self.sigmoid?;
        Some(
            s.probability(self.decision(x))
                .clamp(MIN_PAIR_PROB, 1.0 - MIN_PAIR_PROB),
        )
    }
}

fn binary_from_gram(
    gram: &dyn Gram,
    samples: &Features,
    labels: &[f64],
    params: &SvcParams,
) -> Result<BinaryModel> {
    let sol = smo::solve_nu_dual(gram, labels, params.nu, &params.limits)?;
    // With every multiplier at a bound the margin estimate can be
    // nonpositive; the unscaled decision function keeps the right sign.
    let scale = if sol.r > 0.0 { sol.r } else { 1.0 };
    let support: Vec<usize> = (0..labels.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
    let coef = support
        .iter()
        .map(|&i| labels[i] * sol.alpha[i] / scale)
        .collect();
    Ok(BinaryModel {
        vectors: samples.subset(&support),
        support,
        coef,
        rho: sol.rho / scale,
        margin: sol.r,
        gamma: params.gamma,
        sigmoid: None,
        iterations: sol.iterations,
    })
}

/// Trains a binary nu-SVC on labels in `{-1, +1}` (no calibration).
pub fn train_binary(samples: &Features, labels: &[f64], params: &SvcParams) -> Result<BinaryModel> {
    params.validate()?;
    if samples.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} samples for {} labels",
            samples.len(),
            labels.len()
        )));
    }
    let gram = RbfGram {
        samples: samples.as_slice(),
        dim: samples.dim(),
        gamma: params.gamma,
    };
    binary_from_gram(&gram, samples, labels, params)
}

/// Decision values for every sample from `folds`-fold cross-validation.
///
/// Folds whose training part lacks a class emit a constant decision value
/// (+1 or -1 toward the class that is present).
fn cv_decision_values(
    gram: &dyn Gram,
    samples: &Features,
    labels: &[f64],
    params: &SvcParams,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = labels.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let folds = params.folds.min(n);
    let mut dec = vec![0.0; n];
    for f in 0..folds {
        let (start, end) = (f * n / folds, (f + 1) * n / folds);
        let test = &perm[start..end];
        let train: Vec<usize> = perm[..start].iter().chain(&perm[end..]).copied().collect();
        let ty: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
        let pos = ty.iter().filter(|&&y| y > 0.0).count();
        let neg = ty.len() - pos;
        if pos == 0 || neg == 0 {
            let v = if pos > 0 {
                1.0
            } else if neg > 0 {
                -1.0
            } else {
                0.0
            };
            test.iter().for_each(|&i| dec[i] = v);
            continue;
        }
        let sub = SubGram {
            parent: gram,
            index: &train,
        };
        let sub_params = SvcParams {
            nu: params.nu.min(smo::max_feasible_nu(&ty)),
            ..*params
        };
        let model = binary_from_gram(&sub, &samples.subset(&train), &ty, &sub_params)?;
        for &i in test {
            dec[i] = model.decision(samples.row(i));
        }
    }
    Ok(dec)
}

/// One model per unordered class pair `(first, second)`, `first < second`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairModel {
    pub first: u16,
    pub second: u16,
    pub model: BinaryModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassModel {
    /// Class ids in increasing order.
    pub classes: Vec<u16>,
    pub dim: usize,
    pub nu: f64,
    pub gamma: f64,
    /// Pair models in lexicographic `(first, second)` order.
    pub pairs: Vec<PairModel>,
}

impl MulticlassModel {
    /// Predicted class by majority vote, ties to the smaller class id.
    pub fn vote(&self, x: &[f64]) -> u16 {
        let mut votes = vec![0usize; self.classes.len()];
        let slot = |c: u16| self.classes.binary_search(&c).expect("known class");
        for pm in &self.pairs {
            let winner = if pm.model.decision(x) > 0.0 {
                pm.first
            } else {
                pm.second
            };
            votes[slot(winner)] += 1;
        }
        let best = votes
            .iter()
            .enumerate()
            .fold(0, |b, (k, &v)| if v > votes[b] { k } else { b });
        self.classes[best]
    }

    /// Coupled posterior over `classes`; requires calibrated pair models.
    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        let c = self.classes.len();
        if c == 1 {
            return Ok(vec![1.0]);
        }
        let mut r = vec![vec![0.0; c]; c];
        for pm in &self.pairs {
            let i = self.classes.binary_search(&pm.first).expect("known class");
            let j = self.classes.binary_search(&pm.second).expect("known class");
            let p = pm.model.probability(x).ok_or_else(|| {
                Error::InvalidParameter("model was trained without probability calibration".into())
            })?;
            r[i][j] = p;
            r[j][i] = 1.0 - p;
        }
        pairwise_coupling(&r)
    }
}

/// Trains the one-against-one model on all samples.
///
/// With `calibrate`, every pair also gets a Platt sigmoid fitted on
/// cross-validated decision values; `seed` fixes the fold assignment.
/// Samples are used in the order given, which keeps the result independent
/// of how the class ids are numbered.
pub fn train_multiclass(
    samples: &Features,
    labels: &[u16],
    params: &SvcParams,
    calibrate: bool,
    seed: u64,
) -> Result<MulticlassModel> {
    params.validate()?;
    let gram = RbfGram {
        samples: samples.as_slice(),
        dim: samples.dim(),
        gamma: params.gamma,
    };
    let dense = DenseGram::compute(&gram);
    train_multiclass_with_gram(&dense, samples, labels, params, calibrate, seed)
}

fn train_multiclass_with_gram(
    gram: &dyn Gram,
    samples: &Features,
    labels: &[u16],
    params: &SvcParams,
    calibrate: bool,
    seed: u64,
) -> Result<MulticlassModel> {
    if samples.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} samples for {} labels",
            samples.len(),
            labels.len()
        )));
    }
    let mut classes: Vec<u16> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass {
            positives: labels.len(),
            negatives: 0,
        });
    }

    let pairs: Vec<(u16, u16)> = classes
        .iter()
        .enumerate()
        .flat_map(|(k, &a)| classes[k + 1..].iter().map(move |&b| (a, b)))
        .collect();

    let trained: Result<Vec<PairModel>> = pairs
        .par_iter()
        .map(|&(first, second)| {
            let index: Vec<usize> = (0..labels.len())
                .filter(|&i| labels[i] == first || labels[i] == second)
                .collect();
            let y: Vec<f64> = index
                .iter()
                .map(|&i| if labels[i] == first { 1.0 } else { -1.0 })
                .collect();
            let sub = SubGram {
                parent: gram,
                index: &index,
            };
            let pair_samples = samples.subset(&index);
            let mut model = binary_from_gram(&sub, &pair_samples, &y, params)?;
            if calibrate {
                let dec = cv_decision_values(&sub, &pair_samples, &y, params, seed)?;
                model.sigmoid = Some(fit_platt(&dec, &y)?);
            }
            model.support = model.support.iter().map(|&k| index[k]).collect();
            Ok(PairModel {
                first,
                second,
                model,
            })
        })
        .collect();

    Ok(MulticlassModel {
        classes,
        dim: samples.dim(),
        nu: params.nu,
        gamma: params.gamma,
        pairs: trained?,
    })
}

/// Candidate hyperparameters for cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct CvGrid {
    pub nu: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Default for CvGrid {
    /// `nu` in 0.05..=0.5 (step 0.05), `gamma` in 2^-8..=2^4.
    fn default() -> Self {
        Self {
            nu: (1..=10).map(|k| k as f64 * 0.05).collect(),
            gamma: (-8..=4).map(|e| 2f64.powi(e)).collect(),
        }
    }
}

/// Outcome of the grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub params: SvcParams,
    pub accuracy: f64,
    /// Mean fold accuracy for every feasible `(nu, gamma)` point.
    pub scores: Vec<(f64, f64, f64)>,
}

/// Stratified fold index for each sample.
///
/// Samples are shuffled with `seed`, then each class deals its samples
/// round-robin over the folds in shuffled order.
pub fn stratified_folds(labels: &[u16], folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut next = std::collections::HashMap::new();
    let mut fold = vec![0; labels.len()];
    for i in order {
        let k = next.entry(labels[i]).or_insert(0usize);
        fold[i] = *k % folds;
        *k += 1;
    }
    fold
}

/// Selects `(nu, gamma)` by stratified k-fold accuracy on the training set.
///
/// The best mean fold accuracy wins; ties go to the smaller `gamma`, then
/// the smaller `nu`. Grid points that are infeasible for some fold are
/// skipped.
pub fn cross_validate(
    samples: &Features,
    labels: &[u16],
    grid: &CvGrid,
    base: &SvcParams,
    seed: u64,
) -> Result<CvResult> {
    if grid.nu.is_empty() || grid.gamma.is_empty() {
        return Err(Error::InvalidParameter("empty cross-validation grid".into()));
    }
    let folds = base.folds;
    let fold_of = stratified_folds(labels, folds, seed);

    let mut gammas = grid.gamma.clone();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let mut nus = grid.nu.clone();
    nus.sort_by(f64::total_cmp);
    nus.dedup();

    let per_gamma: Vec<Vec<(f64, f64, Option<f64>)>> = gammas
        .par_iter()
        .map(|&gamma| {
            let dense = DenseGram::compute(&RbfGram {
                samples: samples.as_slice(),
                dim: samples.dim(),
                gamma,
            });
            nus.iter()
                .map(|&nu| {
                    let params = SvcParams { nu, gamma, ..*base };
                    let acc = fold_accuracy(&dense, samples, labels, &fold_of, folds, &params);
                    (nu, gamma, acc)
                })
                .collect()
        })
        .collect();

    let mut scores = Vec::new();
    let mut best: Option<(f64, f64, f64)> = None;
    for (nu, gamma, acc) in per_gamma.into_iter().flatten() {
        let Some(acc) = acc else { continue };
        scores.push((nu, gamma, acc));
        if best.is_none_or(|b| acc > b.2) {
            best = Some((nu, gamma, acc));
        }
    }
    let (nu, gamma, accuracy) = best.ok_or(Error::NoFeasibleGridPoint)?;
    Ok(CvResult {
        params: SvcParams { nu, gamma, ..*base },
        accuracy,
        scores,
    })
}

fn fold_accuracy(
    gram: &DenseGram,
    samples: &Features,
    labels: &[u16],
    fold_of: &[usize],
    folds: usize,
    params: &SvcParams,
) -> Option<f64> {
    let mut total = 0.0;
    let mut used = 0;
    for f in 0..folds {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] == f).collect();
        if test.is_empty() {
            continue;
        }
        let sub = SubGram {
            parent: gram,
            index: &train,
        };
        let train_labels: Vec<u16> = train.iter().map(|&i| labels[i]).collect();
        let model = train_multiclass_with_gram(
            &sub,
            &samples.subset(&train),
            &train_labels,
            params,
            false,
            0,
        )
        .ok()?;
        let correct = test
            .iter()
            .filter(|&&i| model.vote(samples.row(i)) == labels[i])
            .count();
        total += correct as f64 / test.len() as f64;
        used += 1;
    }
    (used > 0).then(|| total / used as f64)
}

/// Builds the probability tensor for a `classes`-class scene.
///
/// `features` is the `dim x (rows*cols)` matrix in row-major pixel order.
/// Background pixels get all-zero vectors and are marked excluded; training
/// pixels are overridden with the one-hot vector of their class; every other
/// pixel gets the coupled posterior of `model`.
pub fn predict_probability_tensor(
    model: &MulticlassModel,
    features: &DMatrix<f64>,
    rows: usize,
    cols: usize,
    classes: usize,
    background: &[bool],
    training: &TrainingSet,
) -> Result<ProbabilityTensor> {
    if features.nrows() != model.dim {
        return Err(Error::Dimension(format!(
            "model expects {} features, matrix has {}",
            model.dim,
            features.nrows()
        )));
    }
    if features.ncols() != rows * cols || background.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "feature matrix has {} columns and mask {} entries for a {rows}x{cols} image",
            features.ncols(),
            background.len()
        )));
    }
    if let Some(&c) = model.classes.iter().find(|&&c| c == 0 || c as usize > classes) {
        return Err(Error::InvalidParameter(format!(
            "model class {c} outside 1..={classes}"
        )));
    }

    let mut values = vec![0.0; rows * cols * classes];
    values
        .par_chunks_mut(classes)
        .enumerate()
        .try_for_each(|(p, out)| -> Result<()> {
            if background[p] {
                return Ok(());
            }
            let x: Vec<f64> = features.column(p).iter().copied().collect();
            let probs = model.probabilities(&x)?;
            for (&c, v) in model.classes.iter().zip(probs) {
                out[c as usize - 1] = v;
            }
            Ok(())
        })?;

    for e in training.entries() {
        let p = e.row * cols + e.col;
        let out = &mut values[p * classes..(p + 1) * classes];
        out.iter_mut().for_each(|v| *v = 0.0);
        out[e.class as usize - 1] = 1.0;
    }
    ProbabilityTensor::new(rows, cols, classes, values, background.to_vec())
}
