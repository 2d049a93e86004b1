//! Shared data model.
//!
//! All rasters are stored row-major: pixel `(i, j)` of an `rows x cols`
//! image has linear index `i * cols + j`. That linear index is also the
//! column index used for the band matrix `R` and the feature matrix `D`.
//! Per-pixel vectors (spectra, class probabilities) are stored contiguously,
//! so element `(i, j, b)` of a cube lives at `(i * cols + j) * bands + b`.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `rows x cols x bands` reflectance cube in pixel-major layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsiCube {
    rows: usize,
    cols: usize,
    bands: usize,
    values: Vec<f64>,
}

impl HsiCube {
    pub fn new(rows: usize, cols: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || bands == 0 {
            return Err(Error::Dimension(format!(
                "cube dimensions must be positive, got {rows}x{cols}x{bands}"
            )));
        }
        if values.len() != rows * cols * bands {
            return Err(Error::Dimension(format!(
                "cube {rows}x{cols}x{bands} needs {} values, got {}",
                rows * cols * bands,
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            rows,
            cols,
            bands,
            values,
        })
    }

    /// Builds a cube from a `bands x (rows*cols)` matrix whose columns are
    /// pixels in row-major order.
    pub fn from_band_matrix(rows: usize, cols: usize, matrix: &DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() != rows * cols {
            return Err(Error::Dimension(format!(
                "band matrix has {} columns, image has {} pixels",
                matrix.ncols(),
                rows * cols
            )));
        }
        // nalgebra is column-major, so the raw slice is already pixel-major.
        Self::new(rows, cols, matrix.nrows(), matrix.as_slice().to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixel_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize, b: usize) -> f64 {
        self.values[(i * self.cols + j) * self.bands + b]
    }

    pub fn spectrum(&self, i: usize, j: usize) -> &[f64] {
        self.pixel(i * self.cols + j)
    }

    /// Spectrum of the pixel with row-major linear index `p`.
    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.values[p * self.bands..(p + 1) * self.bands]
    }

    /// The `bands x (rows*cols)` matrix `R` with one column per pixel.
    pub fn to_band_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.bands, self.pixel_count(), &self.values)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Class map with `0` as background and classes `1..=classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRaster {
    rows: usize,
    cols: usize,
    classes: u16,
    labels: Vec<u16>,
}

impl LabelRaster {
    pub fn new(rows: usize, cols: usize, labels: Vec<u16>, classes: u16) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "label raster dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if labels.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "label raster {rows}x{cols} needs {} labels, got {}",
                rows * cols,
                labels.len()
            )));
        }
        if let Some(p) = labels.iter().position(|&l| l > classes) {
            return Err(Error::LabelRange {
                row: p / cols,
                col: p % cols,
                label: labels[p],
                max: classes,
            });
        }
        Ok(Self {
            rows,
            cols,
            classes,
            labels,
        })
    }

    /// Class count inferred as the largest label present.
    pub fn from_labels(rows: usize, cols: usize, labels: Vec<u16>) -> Result<Self> {
        let classes = labels.iter().copied().max().unwrap_or(0);
        Self::new(rows, cols, labels, classes)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn classes(&self) -> u16 {
        self.classes
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> u16 {
        self.labels[i * self.cols + j]
    }

    pub fn pixel_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Number of pixels carrying each class; index 0 counts background.
    pub fn histogram(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes as usize + 1];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Applies `map` to every non-background label.
    pub fn relabel(&self, map: impl Fn(u16) -> u16) -> Result<Self> {
        let labels = self
            .labels
            .iter()
            .map(|&l| if l == 0 { 0 } else { map(l) })
            .collect();
        Self::new(self.rows, self.cols, labels, self.classes)
    }
}

/// Checks that a cube and its ground truth describe the same scene.
pub fn validate_pair(cube: HsiCube, gt: LabelRaster) -> Result<(HsiCube, LabelRaster)> {
    if cube.rows != gt.rows || cube.cols != gt.cols {
        return Err(Error::Dimension(format!(
            "cube is {}x{} but labels are {}x{}",
            cube.rows, cube.cols, gt.rows, gt.cols
        )));
    }
    if let Some(index) = cube.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    if let Some(p) = gt.labels.iter().position(|&l| l > gt.classes) {
        return Err(Error::LabelRange {
            row: p / gt.cols,
            col: p % gt.cols,
            label: gt.labels[p],
            max: gt.classes,
        });
    }
    if gt.classes < 2 {
        return Err(Error::InvalidParameter(format!(
            "ground truth needs at least 2 classes, found {}",
            gt.classes
        )));
    }
    Ok((cube, gt))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrainingPixel {
    pub row: usize,
    pub col: usize,
    pub class: u16,
}

/// A class that had fewer ground-truth pixels than requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub class: u16,
    pub available: usize,
    pub requested: usize,
}

/// Labeled pixels (the set Omega) used for training and pinned during smoothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSet {
    rows: usize,
    cols: usize,
    entries: Vec<TrainingPixel>,
    shortfall: Vec<Shortfall>,
}

impl TrainingSet {
    /// Builds a training set from explicit entries, checking them against `gt`.
    pub fn from_entries(gt: &LabelRaster, mut entries: Vec<TrainingPixel>) -> Result<Self> {
        entries.sort();
        for w in entries.windows(2) {
            if w[0].row == w[1].row && w[0].col == w[1].col {
                return Err(Error::InvalidParameter(format!(
                    "duplicate training pixel ({}, {})",
                    w[0].row, w[0].col
                )));
            }
        }
        for e in &entries {
            if e.row >= gt.rows || e.col >= gt.cols {
                return Err(Error::Dimension(format!(
                    "training pixel ({}, {}) outside {}x{} raster",
                    e.row, e.col, gt.rows, gt.cols
                )));
            }
            let truth = gt.get(e.row, e.col);
            if e.class == 0 || truth != e.class {
                return Err(Error::InvalidParameter(format!(
                    "training pixel ({}, {}) claims class {} but ground truth is {}",
                    e.row, e.col, e.class, truth
                )));
            }
        }
        Ok(Self {
            rows: gt.rows,
            cols: gt.cols,
            entries,
            shortfall: Vec::new(),
        })
    }

    pub fn entries(&self) -> &[TrainingPixel] {
        &self.entries
    }

    pub fn shortfall(&self) -> &[Shortfall] {
        &self.shortfall
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major boolean mask of the training pixels.
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.rows * self.cols];
        for e in &self.entries {
            mask[e.row * self.cols + e.col] = true;
        }
        mask
    }

    /// Same pixels with class ids mapped through `map`.
    pub fn relabel(&self, map: impl Fn(u16) -> u16) -> Self {
        let mut entries: Vec<_> = self
            .entries
            .iter()
            .map(|e| TrainingPixel {
                class: map(e.class),
                ..*e
            })
            .collect();
        entries.sort();
        Self {
            entries,
            shortfall: self.shortfall.clone(),
            ..*self
        }
    }
}

/// Draws `per_class` pixels uniformly without replacement from every class.
///
/// Classes are visited in increasing id order from one ChaCha8 stream seeded
/// with `seed`, so identical inputs always give identical sets. A class with
/// fewer than `per_class` pixels contributes all of them and is recorded in
/// [`TrainingSet::shortfall`].
pub fn sample_training_set(gt: &LabelRaster, per_class: usize, seed: u64) -> Result<TrainingSet> {
    if per_class == 0 {
        return Err(Error::InvalidParameter(
            "per-class training count must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); gt.classes as usize + 1];
    for (p, &l) in gt.labels.iter().enumerate() {
        by_class[l as usize].push(p);
    }

    let mut entries = Vec::new();
    let mut shortfall = Vec::new();
    for class in 1..=gt.classes {
        let pool = &by_class[class as usize];
        if pool.is_empty() {
            return Err(Error::EmptyClass(class));
        }
        let take = per_class.min(pool.len());
        if take < per_class {
            shortfall.push(Shortfall {
                class,
                available: pool.len(),
                requested: per_class,
            });
        }
        for k in index::sample(&mut rng, pool.len(), take) {
            let p = pool[k];
            entries.push(TrainingPixel {
                row: p / gt.cols,
                col: p % gt.cols,
                class,
            });
        }
    }
    entries.sort();
    Ok(TrainingSet {
        rows: gt.rows,
        cols: gt.cols,
        entries,
        shortfall,
    })
}

/// Per-pixel class probabilities, `rows x cols x classes`, pixel-major.
///
/// Channel `k` (0-based) holds the probability of class `k + 1`. Excluded
/// pixels (background) carry all-zero vectors and are never classified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTensor {
    rows: usize,
    cols: usize,
    classes: usize,
    values: Vec<f64>,
    excluded: Vec<bool>,
}

impl ProbabilityTensor {
    pub fn new(
        rows: usize,
        cols: usize,
        classes: usize,
        values: Vec<f64>,
        excluded: Vec<bool>,
    ) -> Result<Self> {
        if values.len() != rows * cols * classes || excluded.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "probability tensor {rows}x{cols}x{classes} got {} values and {} mask entries",
                values.len(),
                excluded.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            rows,
            cols,
            classes,
            values,
            excluded,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn excluded(&self) -> &[bool] {
        &self.excluded
    }

    pub fn is_excluded(&self, p: usize) -> bool {
        self.excluded[p]
    }

    /// Class vector of the pixel with linear index `p`.
    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.values[p * self.classes..(p + 1) * self.classes]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.cols + j) * self.classes + k]
    }

    /// The `rows x cols` map of channel `k`, row-major.
    pub fn channel(&self, k: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(k)
            .step_by(self.classes)
            .copied()
            .collect()
    }

    pub fn set_channel(&mut self, k: usize, map: &[f64]) {
        assert_eq!(map.len(), self.rows * self.cols, "channel size");
        for (p, &v) in map.iter().enumerate() {
            self.values[p * self.classes + k] = v;
        }
    }

    /// Reorders channels so that new channel `perm[k]` holds old channel `k`.
    pub fn permute_channels(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.classes);
        let mut values = vec![0.0; self.values.len()];
        for p in 0..self.rows * self.cols {
            for k in 0..self.classes {
                values[p * self.classes + perm[k]] = self.values[p * self.classes + k];
            }
        }
        Self {
            values,
            excluded: self.excluded.clone(),
            ..*self
        }
    }
}
