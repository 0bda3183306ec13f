//! Dataset loading, preprocessing, synthetic blob generation, simplified
//! image augmentation, and seeded subsampling.
//!
//! On-disk format: headerless numeric CSV, one sample per row, optional
//! integer label as the last column. Image data is flattened
//! channel-plane-major (all of channel 0's H*W pixels, then channel 1,
//! ...); grayscale data is simply the H*W pixels.

use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageGeometry {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageGeometry {
    pub fn pixels(&self) -> usize {
        self.height * self.width * self.channels
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: DenseMatrix,
    /// Ground-truth labels, evaluation only. Dense in 0..k with every
    /// class nonempty.
    pub y: Option<Vec<usize>>,
    pub name: String,
    pub geometry: Option<ImageGeometry>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.y.as_ref().map(|y| y.iter().copied().max().map_or(0, |m| m + 1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelColumn {
    None,
    Last,
}

/// Load a headerless numeric CSV. With `LabelColumn::Last` the final
/// column must hold nonnegative integers; label values are densified to
/// 0..k preserving their order.
pub fn load_dense_csv(path: &Path, labels: LabelColumn) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<u64> = Vec::new();
    let mut width = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut values = Vec::new();
        for cell in trimmed.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("not a number: '{}'", cell.trim()),
            })?;
            values.push(v);
        }
        if let Some(w) = width {
            if values.len() != w {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {w} columns, found {}", values.len()),
                });
            }
        } else {
            width = Some(values.len());
        }
        if labels == LabelColumn::Last {
            let raw = values.pop().ok_or(Error::Parse {
                line: lineno,
                message: "row has no label column".into(),
            })?;
            if raw < 0.0 || raw.fract() != 0.0 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("label must be a nonnegative integer, got {raw}"),
                });
            }
            raw_labels.push(raw as u64);
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Input(format!("{} contains no data rows", path.display())));
    }
    if labels == LabelColumn::Last && rows[0].is_empty() {
        return Err(Error::Input("file has only a label column and no features".into()));
    }
    let x = DenseMatrix::from_rows(&rows)?;
    let y = match labels {
        LabelColumn::None => None,
        LabelColumn::Last => {
            let mut uniq: Vec<u64> = raw_labels.clone();
            uniq.sort_unstable();
            uniq.dedup();
            Some(raw_labels.iter().map(|l| uniq.binary_search(l).unwrap()).collect())
        }
    };
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Dataset { x, y, name, geometry: None })
}

/// Channel-wise z-transformation: per color channel for multi-channel
/// images, globally over all pixels for single-channel images, per
/// feature for non-image data. Constant slices get a unit divisor, so a
/// constant feature maps to 0.
pub fn z_transform(dataset: &mut Dataset) {
    let n = dataset.x.rows();
    let dim = dataset.x.cols();
    let groups: Vec<Vec<usize>> = match &dataset.geometry {
        Some(g) if g.channels > 1 => {
            let plane = g.height * g.width;
            (0..g.channels).map(|c| (c * plane..(c + 1) * plane).collect()).collect()
        }
        Some(_) => vec![(0..dim).collect()],
        None => (0..dim).map(|f| vec![f]).collect(),
    };
    for cols in groups {
        let count = (n * cols.len()) as f64;
        let mut mean = 0.0;
        for i in 0..n {
            let row = dataset.x.row(i);
            for &c in &cols {
                mean += row[c];
            }
        }
        mean /= count;
        let mut var = 0.0;
        for i in 0..n {
            let row = dataset.x.row(i);
            for &c in &cols {
                let d = row[c] - mean;
                var += d * d;
            }
        }
        var /= count;
        let std = var.sqrt();
        let div = if std > 1e-12 { std } else { 1.0 };
        for i in 0..n {
            let row = dataset.x.row_mut(i);
            for &c in &cols {
                row[c] = (row[c] - mean) / div;
            }
        }
    }
}

/// Gaussian blobs around random centers with pairwise center distance of
/// at least `separation`. Deterministic in `rng`; errors out if the
/// centers cannot be placed after bounded retries.
pub fn make_blobs(
    k: usize,
    n_per_cluster: usize,
    dim: usize,
    separation: f64,
    spread: f64,
    rng: &mut SeededRng,
) -> Result<Dataset> {
    if k == 0 || n_per_cluster == 0 || dim == 0 {
        return Err(Error::Input("blobs need k, n_per_cluster and dim >= 1".into()));
    }
    if separation <= 0.0 || spread <= 0.0 {
        return Err(Error::Input("separation and spread must be positive".into()));
    }
    let mut box_side = separation * (k as f64).powf(1.0 / dim as f64) * 2.0;
    let mut centers: Vec<Vec<f64>> = Vec::new();
    'rounds: for round in 0..8 {
        centers.clear();
        let attempts = 200 * k;
        for _ in 0..attempts {
            let cand: Vec<f64> = (0..dim).map(|_| rng.next_uniform(0.0, box_side)).collect();
            let ok = centers.iter().all(|c| {
                let d2: f64 = c.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum();
                d2 >= separation * separation
            });
            if ok {
                centers.push(cand);
                if centers.len() == k {
                    break 'rounds;
                }
            }
        }
        box_side *= 1.5;
        if round == 7 {
            return Err(Error::Input(format!(
                "could not place {k} centers at separation {separation} after bounded retries"
            )));
        }
    }
    let mut x = DenseMatrix::zeros(k * n_per_cluster, dim);
    let mut y = Vec::with_capacity(k * n_per_cluster);
    for (label, center) in centers.iter().enumerate() {
        for s in 0..n_per_cluster {
            let row = x.row_mut(label * n_per_cluster + s);
            for (v, c) in row.iter_mut().zip(center) {
                *v = c + spread * rng.next_gaussian();
            }
            y.push(label);
        }
    }
    Ok(Dataset { x, y: Some(y), name: format!("blobs{k}"), geometry: None })
}

/// Simplified per-sample augmentation: integer-pixel translation,
/// nearest-neighbor rotation about the image center, and additive
/// Gaussian jitter. Geometry-free data gets jitter only. Values are left
/// unclamped (inputs are standardized reals).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub max_translate_px: usize,
    pub max_rotate_deg: f64,
    pub jitter_std: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { enabled: false, max_translate_px: 0, max_rotate_deg: 0.0, jitter_std: 0.0 }
    }
}

impl AugmentConfig {
    /// Translation of about 10% of the image side and rotation up to
    /// +/-16 degrees.
    pub fn image_default(geometry: &ImageGeometry) -> Self {
        let side = geometry.height.min(geometry.width) as f64;
        AugmentConfig {
            enabled: true,
            max_translate_px: (0.1 * side).round() as usize,
            max_rotate_deg: 16.0,
            jitter_std: 0.0,
        }
    }
}

fn rotate_translate_plane(
    src: &[f64],
    dst: &mut [f64],
    h: usize,
    w: usize,
    dx: i64,
    dy: i64,
    theta: f64,
) {
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let (sin, cos) = theta.sin_cos();
    for yo in 0..h {
        for xo in 0..w {
            // invert: undo translation, then rotate backwards around center
            let ty = yo as f64 - dy as f64 - cy;
            let tx = xo as f64 - dx as f64 - cx;
            let sx = cos * tx + sin * ty + cx;
            let sy = -sin * tx + cos * ty + cy;
            let xi = sx.round() as i64;
            let yi = sy.round() as i64;
            dst[yo * w + xo] = if xi >= 0 && xi < w as i64 && yi >= 0 && yi < h as i64 {
                src[yi as usize * w + xi as usize]
            } else {
                0.0
            };
        }
    }
}

/// Augment every row independently; output is row-aligned with the input.
pub fn augment_batch(
    batch: &DenseMatrix,
    geometry: Option<&ImageGeometry>,
    cfg: &AugmentConfig,
    rng: &mut SeededRng,
) -> DenseMatrix {
    if !cfg.enabled {
        return batch.clone();
    }
    let mut out = batch.clone();
    for i in 0..batch.rows() {
        if let Some(g) = geometry {
            debug_assert_eq!(batch.cols(), g.pixels());
            let t = cfg.max_translate_px as i64;
            let dx = if t > 0 { rng.next_index((2 * t + 1) as usize) as i64 - t } else { 0 };
            let dy = if t > 0 { rng.next_index((2 * t + 1) as usize) as i64 - t } else { 0 };
            let theta = if cfg.max_rotate_deg > 0.0 {
                rng.next_uniform(-cfg.max_rotate_deg, cfg.max_rotate_deg).to_radians()
            } else {
                0.0
            };
            let plane = g.height * g.width;
            let src = batch.row(i).to_vec();
            let dst = out.row_mut(i);
            for c in 0..g.channels {
                rotate_translate_plane(
                    &src[c * plane..(c + 1) * plane],
                    &mut dst[c * plane..(c + 1) * plane],
                    g.height,
                    g.width,
                    dx,
                    dy,
                    theta,
                );
            }
        }
        if cfg.jitter_std > 0.0 {
            for v in out.row_mut(i) {
                *v += cfg.jitter_std * rng.next_gaussian();
            }
        }
    }
    out
}

/// `min(n_max, n)` distinct indices drawn uniformly without replacement
/// (partial Fisher-Yates). Returns all of `0..n` untouched when
/// `n_max >= n`.
pub fn subsample_indices(n: usize, n_max: usize, rng: &mut SeededRng) -> Vec<usize> {
    assert!(n_max >= 1, "subsample size must be >= 1");
    let mut indices: Vec<usize> = (0..n).collect();
    if n_max >= n {
        return indices;
    }
    for i in 0..n_max {
        let j = i + rng.next_index(n - i);
        indices.swap(i, j);
    }
    indices.truncate(n_max);
    indices
}
