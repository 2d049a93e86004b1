//! Nested-sliding-window (NSW) reconstruction.
//!
//! For a target pixel with half-width `a = (window - 1) / 2`, every
//! `(a+1) x (a+1)` sub-window of the zero-padded `window x window`
//! neighbourhood that still contains the target is a candidate. The
//! candidate whose members have the largest mean Pearson correlation with
//! the target wins, and the target is rebuilt as the correlation-weighted
//! average of that window's spectra.
//!
//! Candidate offsets `(p, q)` place the window over rows `i-a+p ..= i+p`
//! and columns `j-a+q ..= j+q`. Offsets run over `offset_min ..= a` in
//! lexicographic order; the first maximum wins, where means closer than
//! [`TIE_TOLERANCE`] count as equal.

use rayon::prelude::*;

use crate::data::HsiCube;
use crate::error::{Error, Result};

/// Window means within this distance of the incumbent do not replace it,
/// so rounding noise cannot reorder exact ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NswParams {
    /// Neighbourhood side length, odd and at least 3.
    pub window: usize,
    /// Smallest window offset, 0 or 1.
    pub offset_min: usize,
    /// Variance floor below which a spectrum counts as constant.
    pub eps: f64,
}

impl Default for NswParams {
    fn default() -> Self {
        Self {
            window: 3,
            offset_min: 0,
            eps: 1e-12,
        }
    }
}

impl NswParams {
    pub fn new(window: usize) -> Result<Self> {
        let p = Self {
            window,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn half_width(&self) -> usize {
        (self.window - 1) / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "NSW window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if self.offset_min > 1 {
            return Err(Error::InvalidParameter(format!(
                "NSW offset minimum must be 0 or 1, got {}",
                self.offset_min
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "NSW variance floor must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }

    fn offsets(&self) -> impl Iterator<Item = (usize, usize)> {
        let a = self.half_width();
        let lo = self.offset_min;
        (lo..=a).flat_map(move |p| (lo..=a).map(move |q| (p, q)))
    }
}

/// A spectrum shifted to zero mean, with its sum of squares.
struct Centered {
    values: Vec<f64>,
    sum_sq: f64,
}

impl Centered {
    fn new(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let values: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let sum_sq = values.iter().map(|v| v * v).sum();
        Self { values, sum_sq }
    }

    fn zero(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            sum_sq: 0.0,
        }
    }
}

fn centered_corr(x: &Centered, y: &Centered, eps: f64) -> f64 {
    let n = x.values.len() as f64;
    if x.sum_sq / n < eps || y.sum_sq / n < eps {
        return 0.0;
    }
    let dot: f64 = x.values.iter().zip(&y.values).map(|(a, b)| a * b).sum();
    (dot / (x.sum_sq * y.sum_sq).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson correlation with population normalization.
///
/// Returns 0 when either spectrum has variance below `eps`.
pub fn pearson(x: &[f64], y: &[f64], eps: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "pearson: lengths {} and {} differ",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Dimension(format!(
            "pearson: need at least 2 samples, got {}",
            x.len()
        )));
    }
    Ok(centered_corr(&Centered::new(x), &Centered::new(y), eps))
}

/// The zero-padded `window x window` block around a pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub window: usize,
    pub bands: usize,
    /// `window * window` spectra, row-major.
    pub spectra: Vec<f64>,
    /// Positions that fell outside the image and were zero-filled.
    pub padded: Vec<bool>,
}

impl Neighborhood {
    pub fn spectrum(&self, r: usize, s: usize) -> &[f64] {
        let k = r * self.window + s;
        &self.spectra[k * self.bands..(k + 1) * self.bands]
    }
}

/// Image position of neighbourhood slot `(r, s)` around `(i, j)`, if inside.
fn neighbor_position(
    cube: &HsiCube,
    i: usize,
    j: usize,
    a: usize,
    r: usize,
    s: usize,
) -> Option<(usize, usize)> {
    let m = (i + r).checked_sub(a)?;
    let n = (j + s).checked_sub(a)?;
    (m < cube.rows() && n < cube.cols()).then_some((m, n))
}

pub fn padded_neighborhood(cube: &HsiCube, i: usize, j: usize, window: usize) -> Neighborhood {
    let a = (window - 1) / 2;
    let bands = cube.bands();
    let mut spectra = vec![0.0; window * window * bands];
    let mut padded = vec![true; window * window];
    for r in 0..window {
        for s in 0..window {
            if let Some((m, n)) = neighbor_position(cube, i, j, a, r, s) {
                let k = r * window + s;
                spectra[k * bands..(k + 1) * bands].copy_from_slice(cube.spectrum(m, n));
                padded[k] = false;
            }
        }
    }
    Neighborhood {
        window,
        bands,
        spectra,
        padded,
    }
}

/// The winning sub-window for one target pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSelection {
    pub target: (usize, usize),
    /// Chosen offsets `(k, l)`.
    pub offset: (usize, usize),
    pub side: usize,
    pub bands: usize,
    /// `side * side` member spectra, row-major within the window.
    pub spectra: Vec<f64>,
    /// Correlation of each member with the target.
    pub correlations: Vec<f64>,
    pub mean_correlation: f64,
    /// Member index of the target itself.
    pub target_member: usize,
    pub eps: f64,
}

impl WindowSelection {
    /// Correlations divided by their sum, or weight 1 on the target when the
    /// sum is below the variance floor (near zero or negative).
    pub fn weights(&self) -> Vec<f64> {
        let sum: f64 = self.correlations.iter().sum();
        if sum < self.eps {
            let mut w = vec![0.0; self.correlations.len()];
            w[self.target_member] = 1.0;
            return w;
        }
        self.correlations.iter().map(|c| c / sum).collect()
    }

    pub fn member(&self, k: usize) -> &[f64] {
        &self.spectra[k * self.bands..(k + 1) * self.bands]
    }
}

/// Correlations of the target with every neighbourhood slot, row-major.
fn correlation_grid(
    centered: &[Centered],
    cube: &HsiCube,
    i: usize,
    j: usize,
    params: &NswParams,
) -> Vec<f64> {
    let w = params.window;
    let a = params.half_width();
    let target = &centered[i * cube.cols() + j];
    let mut grid = vec![0.0; w * w];
    for r in 0..w {
        for s in 0..w {
            if let Some((m, n)) = neighbor_position(cube, i, j, a, r, s) {
                grid[r * w + s] = centered_corr(target, &centered[m * cube.cols() + n], params.eps);
            }
        }
    }
    grid
}

/// Offset of the window with the largest mean correlation, and that mean.
fn best_offset(grid: &[f64], params: &NswParams) -> ((usize, usize), f64) {
    let w = params.window;
    let side = params.half_width() + 1;
    let count = (side * side) as f64;
    let mut best = ((params.offset_min, params.offset_min), f64::NEG_INFINITY);
    for (p, q) in params.offsets() {
        let mut sum = 0.0;
        for r in p..p + side {
            for s in q..q + side {
                sum += grid[r * w + s];
            }
        }
        let mean = sum / count;
        if mean > best.1 + TIE_TOLERANCE {
            best = ((p, q), mean);
        }
    }
    best
}

fn weighted_sum(
    grid: &[f64],
    params: &NswParams,
    offset: (usize, usize),
    member: impl Fn(usize, usize) -> Option<usize>,
    cube: &HsiCube,
    out: &mut [f64],
) {
    let w = params.window;
    let a = params.half_width();
    let side = a + 1;
    let (p, q) = offset;
    let mut sum = 0.0;
    for r in p..p + side {
        for s in q..q + side {
            sum += grid[r * w + s];
        }
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    if sum < params.eps {
        let target = member(a, a).expect("target is inside the image");
        out.copy_from_slice(cube.pixel(target));
        return;
    }
    for r in p..p + side {
        for s in q..q + side {
            let c = grid[r * w + s] / sum;
            if let Some(idx) = member(r, s) {
                for (o, x) in out.iter_mut().zip(cube.pixel(idx)) {
                    *o += c * x;
                }
            }
        }
    }
}

pub fn select_best_window(
    cube: &HsiCube,
    i: usize,
    j: usize,
    params: &NswParams,
) -> Result<WindowSelection> {
    params.validate()?;
    if i >= cube.rows() || j >= cube.cols() {
        return Err(Error::Dimension(format!(
            "pixel ({i}, {j}) outside {}x{} image",
            cube.rows(),
            cube.cols()
        )));
    }
    let a = params.half_width();
    let side = a + 1;
    let bands = cube.bands();
    let hood = padded_neighborhood(cube, i, j, params.window);
    let centered: Vec<Centered> = (0..params.window * params.window)
        .map(|k| {
            if hood.padded[k] {
                Centered::zero(bands)
            } else {
                Centered::new(&hood.spectra[k * bands..(k + 1) * bands])
            }
        })
        .collect();
    let center = a * params.window + a;
    let grid: Vec<f64> = centered
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if hood.padded[k] {
                0.0
            } else {
                centered_corr(&centered[center], c, params.eps)
            }
        })
        .collect();
    let ((p, q), mean) = best_offset(&grid, params);

    let mut spectra = Vec::with_capacity(side * side * bands);
    let mut correlations = Vec::with_capacity(side * side);
    for r in p..p + side {
        for s in q..q + side {
            spectra.extend_from_slice(hood.spectrum(r, s));
            correlations.push(grid[r * params.window + s]);
        }
    }
    Ok(WindowSelection {
        target: (i, j),
        offset: (p, q),
        side,
        bands,
        spectra,
        correlations,
        mean_correlation: mean,
        target_member: (a - p) * side + (a - q),
        eps: params.eps,
    })
}

pub fn reconstruct_pixel(sel: &WindowSelection) -> Vec<f64> {
    let mut out = vec![0.0; sel.bands];
    for (k, c) in sel.weights().into_iter().enumerate() {
        if c != 0.0 {
            for (o, x) in out.iter_mut().zip(sel.member(k)) {
                *o += c * x;
            }
        }
    }
    out
}

/// Reconstructs every pixel; the result is the cube-shaped form of `R`.
pub fn reconstruct_cube(cube: &HsiCube, params: &NswParams) -> Result<HsiCube> {
    params.validate()?;
    let (rows, cols, bands) = (cube.rows(), cube.cols(), cube.bands());
    let a = params.half_width();
    let centered: Vec<Centered> = (0..cube.pixel_count())
        .into_par_iter()
        .map(|p| Centered::new(cube.pixel(p)))
        .collect();

    let mut values = vec![0.0; cube.values().len()];
    values
        .par_chunks_mut(cols * bands)
        .enumerate()
        .for_each(|(i, row)| {
            for j in 0..cols {
                let grid = correlation_grid(&centered, cube, i, j, params);
                let (offset, _) = best_offset(&grid, params);
                let member = |r: usize, s: usize| {
                    neighbor_position(cube, i, j, a, r, s).map(|(m, n)| m * cols + n)
                };
                weighted_sum(
                    &grid,
                    params,
                    offset,
                    member,
                    cube,
                    &mut row[j * bands..(j + 1) * bands],
                );
            }
        });
    HsiCube::new(rows, cube.cols(), bands, values)
}
