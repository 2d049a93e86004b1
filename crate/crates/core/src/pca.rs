//! Principal component projection of the reconstructed band matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Subtracted before projection; all zeros when fitted without centering.
    pub mean: DVector<f64>,
    /// `bands x dims` matrix with orthonormal columns.
    pub projection: DMatrix<f64>,
    /// Variances along each retained direction, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// Sum of all `bands` eigenvalues of the covariance matrix.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn bands(&self) -> usize {
        self.projection.nrows()
    }

    pub fn dims(&self) -> usize {
        self.projection.ncols()
    }

    /// Fraction of the total variance kept by the retained directions.
    pub fn captured_variance(&self) -> f64 {
        if self.total_variance <= 0.0 {
            return 1.0;
        }
        self.eigenvalues.iter().sum::<f64>() / self.total_variance
    }

    /// `D = W^T (R - mean)`, one column per input column.
    pub fn transform(&self, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if data.nrows() != self.bands() {
            return Err(Error::Dimension(format!(
                "PCA model expects {} bands, data has {}",
                self.bands(),
                data.nrows()
            )));
        }
        let (bands, dims) = (self.bands(), self.dims());
        let mut out = DMatrix::zeros(dims, data.ncols());
        out.as_mut_slice()
            .par_chunks_mut(dims)
            .zip(data.as_slice().par_chunks(bands))
            .for_each(|(dst, col)| {
                for (k, d) in dst.iter_mut().enumerate() {
                    let w = self.projection.column(k);
                    *d = col
                        .iter()
                        .zip(self.mean.iter())
                        .zip(w.iter())
                        .map(|((x, m), w)| (x - m) * w)
                        .sum();
                }
            });
        Ok(out)
    }

    /// Maps reduced columns back to band space: `W D + mean`.
    pub fn inverse_transform(&self, reduced: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if reduced.nrows() != self.dims() {
            return Err(Error::Dimension(format!(
                "PCA model has {} components, data has {}",
                self.dims(),
                reduced.nrows()
            )));
        }
        let mut out = &self.projection * reduced;
        for mut col in out.column_iter_mut() {
            col += &self.mean;
        }
        Ok(out)
    }
}

/// Fits the top-`dims` principal directions of `data` (`bands x samples`).
///
/// The covariance is normalized by the sample count, so `eigenvalues[k]` is
/// the variance of row `k` of the transformed data. Each eigenvector is
/// signed so that its largest-magnitude entry is positive.
pub fn fit_pca(data: &DMatrix<f64>, dims: usize, center: bool) -> Result<PcaModel> {
    let (bands, n) = data.shape();
    if dims == 0 || dims > bands.min(n) {
        return Err(Error::InvalidParameter(format!(
            "PCA dimension {dims} must be in 1..={}",
            bands.min(n)
        )));
    }
    let mean = if center {
        data.column_mean()
    } else {
        DVector::zeros(bands)
    };

    let mut scatter = DMatrix::<f64>::zeros(bands, bands);
    let mut centered = vec![0.0; bands];
    for col in data.column_iter() {
        for (c, (x, m)) in centered.iter_mut().zip(col.iter().zip(mean.iter())) {
            *c = x - m;
        }
        for a in 0..bands {
            let ca = centered[a];
            for b in a..bands {
                scatter[(a, b)] += ca * centered[b];
            }
        }
    }
    for a in 0..bands {
        for b in a..bands {
            let v = scatter[(a, b)] / n as f64;
            scatter[(a, b)] = v;
            scatter[(b, a)] = v;
        }
    }
    let total_variance = scatter.trace();

    let eig = SymmetricEigen::try_new(scatter, f64::EPSILON, 10_000).ok_or(
        Error::NotConverged {
            solver: "symmetric eigensolver",
            limit: 10_000,
            unit: "iterations",
        },
    )?;

    let mut order: Vec<usize> = (0..bands).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut projection = DMatrix::zeros(bands, dims);
    let mut eigenvalues = Vec::with_capacity(dims);
    for (k, &idx) in order.iter().take(dims).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        projection.set_column(k, &v);
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
    }

    Ok(PcaModel {
        mean,
        projection,
        eigenvalues,
        total_variance,
    })
}
