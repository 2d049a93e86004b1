//! File formats, synthetic scenes and result export.
//!
//! Cube files (`.hsic`) are one ASCII header line followed by raw
//! little-endian `f32` values in pixel-major row-major order
//! (`(i * cols + j) * bands + b`):
//!
//! ```text
//! HSIC v1 <rows> <cols> <bands> f32 le row-major\n<payload>
//! ```
//!
//! Label files (`.hsil`) hold little-endian `u16` class ids, 0 = background:
//!
//! ```text
//! HSIL v1 <rows> <cols> u16 le row-major\n<payload>
//! ```
//!
//! Cube values are widened to `f64` on read and narrowed to `f32` on write,
//! so a cube read from disk writes back bit-for-bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{HsiCube, LabelRaster};
use crate::error::{Error, Result};
use crate::eval::TrialReport;

pub const CUBE_MAGIC: &str = "HSIC";
pub const LABEL_MAGIC: &str = "HSIL";

/// Parsed header of a cube or label file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileHeader {
    pub rows: usize,
    pub cols: usize,
    /// 1 for label files.
    pub bands: usize,
    /// Bytes per scalar in the payload.
    pub scalar_width: usize,
}

impl FileHeader {
    pub fn payload_len(&self) -> usize {
        self.rows * self.cols * self.bands * self.scalar_width
    }
}

pub fn cube_header(rows: usize, cols: usize, bands: usize) -> String {
    format!("{CUBE_MAGIC} v1 {rows} {cols} {bands} f32 le row-major\n")
}

pub fn label_header(rows: usize, cols: usize) -> String {
    format!("{LABEL_MAGIC} v1 {rows} {cols} u16 le row-major\n")
}

fn split_header<'a>(path: &Path, bytes: &'a [u8]) -> Result<(&'a str, &'a [u8])> {
    let bad = |reason: &str| Error::InvalidHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let end = bytes
        .iter()
        .take(256)
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("no header line"))?;
    let line = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not ASCII"))?;
    Ok((line, &bytes[end + 1..]))
}

fn parse_header(path: &Path, line: &str, magic: &str) -> Result<FileHeader> {
    let bad = |reason: String| Error::InvalidHeader {
        path: path.to_path_buf(),
        reason,
    };
    let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
    let (dims, scalar) = match magic {
        CUBE_MAGIC => (3, "f32"),
        _ => (2, "u16"),
    };
    if tokens.len() != dims + 5 {
        return Err(bad(format!("expected {} fields, found {}", dims + 5, tokens.len())));
    }
    if tokens[0] != magic {
        return Err(bad(format!("bad magic {:?}, expected {magic}", tokens[0])));
    }
    if tokens[1] != "v1" {
        return Err(bad(format!("unsupported version {:?}", tokens[1])));
    }
    let mut sizes = [1usize; 3];
    for k in 0..dims {
        let v: usize = tokens[2 + k]
            .parse()
            .map_err(|_| bad(format!("bad dimension {:?}", tokens[2 + k])))?;
        if v == 0 {
            return Err(bad("dimensions must be positive".into()));
        }
        sizes[k] = v;
    }
    let tail = &tokens[2 + dims..];
    if tail != [scalar, "le", "row-major"] {
        return Err(bad(format!(
            "unsupported encoding {:?}, expected \"{scalar} le row-major\"",
            tail.join(" ")
        )));
    }
    Ok(FileHeader {
        rows: sizes[0],
        cols: sizes[1],
        bands: sizes[2],
        scalar_width: if magic == CUBE_MAGIC { 4 } else { 2 },
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn check_payload(path: &Path, header: &FileHeader, payload: &[u8]) -> Result<()> {
    let expected = header.payload_len();
    if payload.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::InvalidHeader {
            path: path.to_path_buf(),
            reason: format!("{} trailing bytes after payload", payload.len() - expected),
        });
    }
    Ok(())
}

pub fn decode_cube(path: &Path, bytes: &[u8]) -> Result<HsiCube> {
    let (line, payload) = split_header(path, bytes)?;
    let header = parse_header(path, line, CUBE_MAGIC)?;
    check_payload(path, &header, payload)?;
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    HsiCube::new(header.rows, header.cols, header.bands, values)
}

pub fn encode_cube(cube: &HsiCube) -> Vec<u8> {
    let mut out = cube_header(cube.rows(), cube.cols(), cube.bands()).into_bytes();
    out.reserve(cube.values().len() * 4);
    for &v in cube.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn read_cube(path: &Path) -> Result<HsiCube> {
    decode_cube(path, &read_file(path)?)
}

pub fn write_cube(cube: &HsiCube, path: &Path) -> Result<()> {
    fs::write(path, encode_cube(cube)).map_err(|e| Error::io(path, e))
}

pub fn decode_labels(path: &Path, bytes: &[u8]) -> Result<LabelRaster> {
    let (line, payload) = split_header(path, bytes)?;
    let header = parse_header(path, line, LABEL_MAGIC)?;
    check_payload(path, &header, payload)?;
    let labels = payload
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    LabelRaster::from_labels(header.rows, header.cols, labels)
}

pub fn encode_labels(labels: &LabelRaster) -> Vec<u8> {
    let mut out = label_header(labels.rows(), labels.cols()).into_bytes();
    for &l in labels.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

pub fn read_labels(path: &Path) -> Result<LabelRaster> {
    decode_labels(path, &read_file(path)?)
}

pub fn write_labels(labels: &LabelRaster, path: &Path) -> Result<()> {
    fs::write(path, encode_labels(labels)).map_err(|e| Error::io(path, e))
}

/// Scalar type of a raw input file for [`convert_raw_cube`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawScalar {
    U8,
    U16,
    I16,
    F32,
    F64,
}

impl RawScalar {
    pub fn width(self) -> usize {
        match self {
            RawScalar::U8 => 1,
            RawScalar::U16 | RawScalar::I16 => 2,
            RawScalar::F32 => 4,
            RawScalar::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], big_endian: bool) -> f64 {
        macro_rules! num {
            ($t:ty) => {{
                let a = b.try_into().expect("scalar width");
                if big_endian {
                    <$t>::from_be_bytes(a) as f64
                } else {
                    <$t>::from_le_bytes(a) as f64
                }
            }};
        }
        match self {
            RawScalar::U8 => b[0] as f64,
            RawScalar::U16 => num!(u16),
            RawScalar::I16 => num!(i16),
            RawScalar::F32 => num!(f32),
            RawScalar::F64 => num!(f64),
        }
    }
}

impl std::str::FromStr for RawScalar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "u8" => RawScalar::U8,
            "u16" => RawScalar::U16,
            "i16" => RawScalar::I16,
            "f32" => RawScalar::F32,
            "f64" => RawScalar::F64,
            _ => return Err(Error::Config(format!("unknown scalar type {s:?}"))),
        })
    }
}

/// Band interleave of a raw input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interleave {
    /// Band sequential: `b, i, j`.
    Bsq,
    /// Band interleaved by line: `i, b, j`.
    Bil,
    /// Band interleaved by pixel: `i, j, b` (the native layout).
    Bip,
}

impl std::str::FromStr for Interleave {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bsq" => Interleave::Bsq,
            "bil" => Interleave::Bil,
            "bip" => Interleave::Bip,
            _ => return Err(Error::Config(format!("unknown interleave {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawLayout {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub scalar: RawScalar,
    pub big_endian: bool,
    pub interleave: Interleave,
}

/// Reinterprets a headerless raw dump as a cube.
pub fn convert_raw_cube(bytes: &[u8], layout: &RawLayout) -> Result<HsiCube> {
    let RawLayout {
        rows,
        cols,
        bands,
        scalar,
        big_endian,
        interleave,
    } = *layout;
    let w = scalar.width();
    let expected = rows * cols * bands * w;
    if bytes.len() != expected {
        return Err(Error::Dimension(format!(
            "raw file has {} bytes, layout needs {expected}",
            bytes.len()
        )));
    }
    let mut values = vec![0.0; rows * cols * bands];
    for i in 0..rows {
        for j in 0..cols {
            for b in 0..bands {
                let src = match interleave {
                    Interleave::Bsq => (b * rows + i) * cols + j,
                    Interleave::Bil => (i * bands + b) * cols + j,
                    Interleave::Bip => (i * cols + j) * bands + b,
                };
                values[(i * cols + j) * bands + b] =
                    scalar.decode(&bytes[src * w..(src + 1) * w], big_endian);
            }
        }
    }
    HsiCube::new(rows, cols, bands, values)
}

/// Reinterprets a headerless raw class map (integer scalar types only).
pub fn convert_raw_labels(
    bytes: &[u8],
    rows: usize,
    cols: usize,
    scalar: RawScalar,
    big_endian: bool,
) -> Result<LabelRaster> {
    if !matches!(scalar, RawScalar::U8 | RawScalar::U16) {
        return Err(Error::Config("labels must be u8 or u16".into()));
    }
    let w = scalar.width();
    if bytes.len() != rows * cols * w {
        return Err(Error::Dimension(format!(
            "raw label file has {} bytes, layout needs {}",
            bytes.len(),
            rows * cols * w
        )));
    }
    let labels = bytes
        .chunks_exact(w)
        .map(|c| scalar.decode(c, big_endian) as u16)
        .collect();
    LabelRaster::from_labels(rows, cols, labels)
}

/// Parameters of a synthetic piecewise-constant scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSceneSpec {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub classes: u16,
    /// Mean side length of a homogeneous patch, in pixels.
    pub patch_side: usize,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Per-class mean spectra; generated from `seed` when absent.
    #[serde(default)]
    pub class_means: Option<Vec<Vec<f64>>>,
    /// Per-class multiplier on `noise_sigma`; 1 for every class when absent.
    #[serde(default)]
    pub class_noise_scale: Option<Vec<f64>>,
}

impl SyntheticSceneSpec {
    pub fn new(rows: usize, cols: usize, bands: usize, classes: u16) -> Self {
        Self {
            rows,
            cols,
            bands,
            classes,
            patch_side: 8,
            noise_sigma: 0.0,
            seed: 0,
            class_means: None,
            class_noise_scale: None,
        }
    }

    fn cells(&self) -> (usize, usize) {
        (
            self.rows.div_ceil(self.patch_side),
            self.cols.div_ceil(self.patch_side),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.rows == 0 || self.cols == 0 || self.bands == 0 {
            return bad("synthetic scene dimensions must be positive".into());
        }
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.patch_side == 0 {
            return bad("patch side must be positive".into());
        }
        let (cy, cx) = self.cells();
        if cy * cx < self.classes as usize {
            return bad(format!(
                "{} patches cannot host {} classes",
                cy * cx,
                self.classes
            ));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad(format!("noise sigma must be >= 0, got {}", self.noise_sigma));
        }
        if let Some(means) = &self.class_means {
            if means.len() != self.classes as usize
                || means.iter().any(|m| m.len() != self.bands)
            {
                return bad("class means must be classes x bands".into());
            }
        }
        if let Some(scale) = &self.class_noise_scale {
            if scale.len() != self.classes as usize || scale.iter().any(|s| !(*s >= 0.0)) {
                return bad("class noise scales must be one nonnegative value per class".into());
            }
        }
        Ok(())
    }
}

/// Smooth random spectra, one per class, with values roughly in `[0.1, 0.9]`.
pub fn random_class_means(classes: usize, bands: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|_| {
            let level: f64 = rng.random_range(0.35..0.65);
            let harmonics: Vec<(f64, f64)> = (1..=3)
                .map(|_| {
                    (
                        rng.random_range(-0.12..0.12),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            (0..bands)
                .map(|b| {
                    let t = b as f64 / bands as f64;
                    level
                        + harmonics
                            .iter()
                            .enumerate()
                            .map(|(h, (amp, phase))| {
                                amp * (std::f64::consts::TAU * (h + 1) as f64 * t + phase).sin()
                            })
                            .sum::<f64>()
                })
                .collect()
        })
        .collect()
}

/// Generates a scene whose labels are a Voronoi partition of one jittered
/// seed per `patch_side` grid cell, and whose spectra are the class mean
/// plus i.i.d. Gaussian noise.
///
/// Seeds sit on pixel centres, so each seed owns at least its own pixel and
/// every class appears. The result depends only on the spec.
pub fn generate_synthetic(spec: &SyntheticSceneSpec) -> Result<(HsiCube, LabelRaster)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (cy, cx) = spec.cells();
    let ps = spec.patch_side;

    let mut seeds = Vec::with_capacity(cy * cx);
    for gy in 0..cy {
        for gx in 0..cx {
            let (y0, x0) = (gy * ps, gx * ps);
            let y = y0 + rng.random_range(0..ps.min(spec.rows - y0));
            let x = x0 + rng.random_range(0..ps.min(spec.cols - x0));
            seeds.push((y, x));
        }
    }
    let classes = spec.classes as usize;
    let mut seed_class: Vec<u16> = (0..seeds.len())
        .map(|k| {
            if k < classes {
                k as u16 + 1
            } else {
                rng.random_range(1..=spec.classes)
            }
        })
        .collect();
    seed_class.shuffle(&mut rng);

    let mut labels = vec![0u16; spec.rows * spec.cols];
    for i in 0..spec.rows {
        for j in 0..spec.cols {
            // Only seeds from nearby cells can be nearest.
            let (gy, gx) = (i / ps, j / ps);
            let mut best = (usize::MAX, 0u16);
            for ny in gy.saturating_sub(2)..(gy + 3).min(cy) {
                for nx in gx.saturating_sub(2)..(gx + 3).min(cx) {
                    let k = ny * cx + nx;
                    let (y, x) = seeds[k];
                    let d = y.abs_diff(i).pow(2) + x.abs_diff(j).pow(2);
                    if d < best.0 {
                        best = (d, seed_class[k]);
                    }
                }
            }
            labels[i * spec.cols + j] = best.1;
        }
    }

    let means = match &spec.class_means {
        Some(m) => m.clone(),
        None => random_class_means(classes, spec.bands, &mut rng),
    };
    let scale = spec
        .class_noise_scale
        .clone()
        .unwrap_or_else(|| vec![1.0; classes]);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut values = Vec::with_capacity(spec.rows * spec.cols * spec.bands);
    for &l in &labels {
        let k = l as usize - 1;
        let sigma = spec.noise_sigma * scale[k];
        for b in 0..spec.bands {
            let noise = if sigma > 0.0 {
                sigma * normal.sample(&mut rng)
            } else {
                0.0
            };
            values.push(means[k][b] + noise);
        }
    }
    let cube = HsiCube::new(spec.rows, spec.cols, spec.bands, values)?;
    let gt = LabelRaster::new(spec.rows, spec.cols, labels, spec.classes)?;
    Ok((cube, gt))
}

/// Mean over pixels of the fraction of in-image 4-neighbours that share the
/// pixel's class.
pub fn neighbor_agreement(labels: &LabelRaster) -> f64 {
    let (rows, cols) = (labels.rows(), labels.cols());
    let mut total = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let l = labels.get(i, j);
            let mut same = 0;
            let mut count = 0;
            let mut visit = |m: usize, n: usize| {
                count += 1;
                same += usize::from(labels.get(m, n) == l);
            };
            if i > 0 {
                visit(i - 1, j);
            }
            if i + 1 < rows {
                visit(i + 1, j);
            }
            if j > 0 {
                visit(i, j - 1);
            }
            if j + 1 < cols {
                visit(i, j + 1);
            }
            total += if count > 0 {
                same as f64 / count as f64
            } else {
                1.0
            };
        }
    }
    total / (rows * cols) as f64
}

/// Writes per-pixel counts as a plain (`P2`) PGM with maxval `max_value`.
pub fn export_error_map(
    counts: &[u32],
    rows: usize,
    cols: usize,
    max_value: u32,
    path: &Path,
) -> Result<()> {
    if counts.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{} counts for a {rows}x{cols} map",
            counts.len()
        )));
    }
    if let Some(&c) = counts.iter().find(|&&c| c > max_value) {
        return Err(Error::InvalidParameter(format!(
            "count {c} exceeds the number of trials {max_value}"
        )));
    }
    let mut text = format!("P2\n{cols} {rows}\n{}\n", max_value.max(1));
    for row in counts.chunks(cols) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        text.push_str(&line.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a plain PGM written by [`export_error_map`]: `(rows, cols, maxval, values)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, u32, Vec<u32>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::InvalidHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_ascii_whitespace);
    if tokens.next() != Some("P2") {
        return Err(bad("not a plain PGM"));
    }
    let mut num = || -> Result<u32> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad number"))
    };
    let cols = num()? as usize;
    let rows = num()? as usize;
    let max = num()?;
    let values = (0..rows * cols).map(|_| num()).collect::<Result<Vec<_>>>()?;
    Ok((rows, cols, max, values))
}

fn fraction(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// Writes the summary table of one or more methods as CSV.
///
/// Columns are `metric` followed by one column per report label. Rows are
/// `class_1 .. class_c` (mean per-class accuracy), then `OA`, `AA`, `kappa`
/// (means) and `OA_std`, `AA_std`, `kappa_std` (sample standard
/// deviations over trials). Values are fractions with four decimals, so an
/// overall accuracy of 91.57% is written as `0.9157`; undefined entries are
/// empty.
pub fn export_report(reports: &[TrialReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["metric".to_string()];
    header.extend(reports.iter().map(|r| r.label.clone()));
    w.write_record(&header)?;
    for row in report_rows(reports) {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// The body rows of [`export_report`], without the header.
pub fn report_rows(reports: &[TrialReport]) -> Vec<Vec<String>> {
    let classes = reports.iter().map(|r| r.classes).max().unwrap_or(0);
    let summaries: Vec<_> = reports.iter().map(TrialReport::summary).collect();
    let mut rows = Vec::new();
    for k in 0..classes {
        let mut row = vec![format!("class_{}", k + 1)];
        row.extend(
            summaries
                .iter()
                .map(|s| fraction(s.class_accuracy.get(k).copied().flatten())),
        );
        rows.push(row);
    }
    type Pick = fn(&crate::eval::Summary) -> Option<f64>;
    let metrics: [(&str, Pick); 6] = [
        ("OA", |s| s.oa.mean),
        ("AA", |s| s.aa.mean),
        ("kappa", |s| s.kappa.mean),
        ("OA_std", |s| s.oa.std),
        ("AA_std", |s| s.aa.std),
        ("kappa_std", |s| s.kappa.std),
    ];
    for (name, pick) in metrics {
        let mut row = vec![name.to_string()];
        row.extend(summaries.iter().map(|s| fraction(pick(s))));
        rows.push(row);
    }
    rows
}

/// One line per trial: `method,trial,seed,nu,gamma,oa,aa,kappa,training_pixels`.
pub fn export_trials(reports: &[TrialReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "trial",
        "seed",
        "nu",
        "gamma",
        "oa",
        "aa",
        "kappa",
        "training_pixels",
    ])?;
    for r in reports {
        for t in &r.trials {
            w.write_record([
                r.label.clone(),
                t.trial.to_string(),
                t.seed.to_string(),
                t.nu.to_string(),
                t.gamma.to_string(),
                fraction(Some(t.oa)),
                fraction(Some(t.aa)),
                fraction(t.kappa),
                t.training_pixels.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
