//! Synthetic tasks, non-i.i.d. label partitioning, IDX ingestion and
//! bandwidth assignment.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::learning::{HingeTask, LocalTask, QuadraticTask};
use crate::rng::{self, streams};

/// Largest accepted condition number of a synthetic design matrix.
pub const MAX_CONDITION: f64 = 100.0;
const MAX_DESIGN_DRAWS: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSpec {
    pub m: usize,
    pub n: usize,
    /// Data points (rows of `A_i`) per device; must be at least `n`.
    pub rows: usize,
    /// Entries of `A_i` are `N(0, design_scale²/rows)`, so `A_iᵀA_i` has
    /// eigenvalues near `design_scale²`.
    pub design_scale: f64,
    pub heterogeneity: f64,
    /// Draw an independent design per device instead of one shared design.
    pub per_device_design: bool,
    pub seed: u64,
}

impl QuadraticSpec {
    pub fn new(m: usize, n: usize, heterogeneity: f64, seed: u64) -> Self {
        Self {
            m,
            n,
            rows: 2 * n,
            design_scale: 1.0,
            heterogeneity,
            per_device_design: false,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticInstance {
    pub tasks: Vec<LocalTask>,
    /// Shared target `w°`.
    pub center: Vec<f64>,
    /// `w° + heterogeneity·u_i`, the minimizer of each local objective.
    pub local_minimizers: Vec<Vec<f64>>,
}

pub fn synth_quadratic(
    m: usize,
    n: usize,
    heterogeneity: f64,
    seed: u64,
) -> Result<QuadraticInstance> {
    synth_quadratic_spec(&QuadraticSpec::new(m, n, heterogeneity, seed))
}

/// Device `i` gets `A_i` with i.i.d. `N(0, design_scale²/rows)` entries (redrawn until
/// its condition number is at most [`MAX_CONDITION`]) and
/// `b_i = A_i (w° + heterogeneity·u_i)` with `u_i` a random unit vector.
pub fn synth_quadratic_spec(spec: &QuadraticSpec) -> Result<QuadraticInstance> {
    let QuadraticSpec {
        m,
        n,
        rows,
        design_scale,
        heterogeneity,
        per_device_design,
        seed,
    } = *spec;
    if m == 0 || n == 0 {
        return Err(Error::invalid("synthetic quadratic needs m, n >= 1"));
    }
    if rows < n {
        return Err(Error::invalid(format!(
            "rows per device ({rows}) must be at least the dimension ({n})"
        )));
    }
    if !(design_scale.is_finite() && design_scale > 0.0) {
        return Err(Error::invalid("design scale must be positive"));
    }
    if !(heterogeneity.is_finite() && heterogeneity >= 0.0) {
        return Err(Error::invalid(
            "heterogeneity must be finite and non-negative",
        ));
    }
    let mut rng = rng::stream(seed, streams::QUADRATIC, 0);
    let center: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let shared = if per_device_design {
        None
    } else {
        Some(draw_design(seed, u64::MAX, rows, n, design_scale)?)
    };

    let mut tasks = Vec::with_capacity(m);
    let mut local_minimizers = Vec::with_capacity(m);
    for i in 0..m {
        let design = match &shared {
            Some(a) => a.clone(),
            None => draw_design(seed, i as u64, rows, n, design_scale)?,
        };
        let mut dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        dir.iter_mut().for_each(|v| *v /= norm);
        let target_w: Vec<f64> = center
            .iter()
            .zip(&dir)
            .map(|(c, u)| c + heterogeneity * u)
            .collect();
        let b: Vec<f64> = design
            .iter()
            .map(|row| row.iter().zip(&target_w).map(|(a, w)| a * w).sum())
            .collect();
        tasks.push(LocalTask::Quadratic(QuadraticTask::new(design, b)?));
        local_minimizers.push(target_w);
    }
    Ok(QuadraticInstance {
        tasks,
        center,
        local_minimizers,
    })
}

fn draw_design(
    seed: u64,
    device: u64,
    rows: usize,
    n: usize,
    design_scale: f64,
) -> Result<Vec<Vec<f64>>> {
    let scale = design_scale / (rows as f64).sqrt();
    for attempt in 0..MAX_DESIGN_DRAWS {
        let mut rng = rng::stream(seed, streams::QUADRATIC, rng::derive(device, 1, attempt));
        let a: Vec<Vec<f64>> = (0..rows)
            .map(|_| {
                (0..n)
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        if condition_number(&a) <= MAX_CONDITION {
            return Ok(a);
        }
    }
    Err(Error::NumericFailure(format!(
        "no {rows}x{n} design with condition number <= {MAX_CONDITION} in {MAX_DESIGN_DRAWS} draws"
    )))
}

fn condition_number(a: &[Vec<f64>]) -> f64 {
    let (rows, cols) = (a.len(), a[0].len());
    let mat = DMatrix::from_row_iterator(rows, cols, a.iter().flatten().copied());
    let sv = mat.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Feature vectors of width `features` with integer labels in `[0, classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: usize,
    classes: usize,
    x: Vec<f64>,
    labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(features: usize, classes: usize, x: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if features == 0 || classes == 0 {
            return Err(Error::invalid(
                "dataset needs features >= 1 and classes >= 1",
            ));
        }
        if x.len() != features * labels.len() {
            return Err(Error::invalid(format!(
                "{} feature values do not form {} samples of width {features}",
                x.len(),
                labels.len()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::invalid(format!("label {y} outside [0, {classes})")));
        }
        Ok(Self {
            features,
            classes,
            x,
            labels,
        })
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, s: usize) -> &[f64] {
        &self.x[s * self.features..(s + 1) * self.features]
    }

    fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features,
            classes: self.classes,
            x: indices
                .iter()
                .flat_map(|&s| self.sample(s).iter().copied())
                .collect(),
            labels: indices.iter().map(|&s| self.labels[s]).collect(),
        }
    }

    /// Even-indexed samples and odd-indexed samples, as `(train, test)`.
    pub fn split_alternating(&self) -> (Self, Self) {
        let even: Vec<usize> = (0..self.len()).step_by(2).collect();
        let odd: Vec<usize> = (1..self.len()).step_by(2).collect();
        (self.subset(&even), self.subset(&odd))
    }

    /// Linear multiclass-margin task over this data.
    pub fn hinge_task(&self, l2: f64) -> Result<LocalTask> {
        Ok(LocalTask::Hinge(HingeTask::new(
            self.features,
            self.classes,
            self.x.clone(),
            self.labels.clone(),
            l2,
        )?))
    }
}

#[derive(Debug, Clone)]
pub struct LabelPartition {
    pub devices: Vec<LabeledDataset>,
    /// Labels assigned to each device, sorted.
    pub label_sets: Vec<Vec<usize>>,
    /// Indices into the source dataset held by each device.
    pub origin: Vec<Vec<usize>>,
}

/// Non-i.i.d. split: labels are shuffled (seeded) and dealt round-robin,
/// `labels_per_device` to each device; every label's samples are then split
/// evenly among its owners in source order, with the remainder going to the
/// lowest-id owner.
pub fn label_partition(
    ds: &LabeledDataset,
    m: usize,
    labels_per_device: usize,
    seed: u64,
) -> Result<LabelPartition> {
    let classes = ds.classes;
    if m == 0 || labels_per_device == 0 {
        return Err(Error::invalid(
            "need at least one device and one label per device",
        ));
    }
    if labels_per_device > classes {
        return Err(Error::invalid(format!(
            "{labels_per_device} labels per device exceeds {classes} classes"
        )));
    }
    if m * labels_per_device < classes {
        return Err(Error::invalid(format!(
            "{m} devices x {labels_per_device} labels cannot cover {classes} classes"
        )));
    }
    let mut order: Vec<usize> = (0..classes).collect();
    order.shuffle(&mut rng::stream(seed, streams::PARTITION, 0));

    let mut label_sets: Vec<Vec<usize>> = (0..m)
        .map(|d| {
            (0..labels_per_device)
                .map(|t| order[(d * labels_per_device + t) % classes])
                .collect()
        })
        .collect();
    label_sets.iter_mut().for_each(|s| s.sort_unstable());

    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (s, &y) in ds.labels.iter().enumerate() {
        by_label[y].push(s);
    }
    let mut origin: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (label, samples) in by_label.iter().enumerate() {
        let owners: Vec<usize> = (0..m).filter(|&d| label_sets[d].contains(&label)).collect();
        let share = samples.len() / owners.len();
        let extra = samples.len() % owners.len();
        let mut cursor = 0;
        for (rank, &d) in owners.iter().enumerate() {
            let take = share + if rank == 0 { extra } else { 0 };
            origin[d].extend_from_slice(&samples[cursor..cursor + take]);
            cursor += take;
        }
    }
    origin.iter_mut().for_each(|o| o.sort_unstable());
    let devices = origin.iter().map(|idx| ds.subset(idx)).collect();
    Ok(LabelPartition {
        devices,
        label_sets,
        origin,
    })
}

/// Gaussian class clusters in `[0, 1]^features`, for pipelines that need an
/// image-shaped classification set without real data on disk.
pub fn synth_blobs(
    classes: usize,
    per_class: usize,
    features: usize,
    spread: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    let mut rng = rng::stream(seed, streams::PARTITION, 1);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..features).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut x = Vec::with_capacity(classes * per_class * features);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            for &mu in center {
                let v: f64 = mu + spread * rng.sample::<f64, _>(StandardNormal);
                x.push(v.clamp(0.0, 1.0));
            }
            labels.push(c);
        }
    }
    LabeledDataset::new(features, classes, x, labels)
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Parsed IDX file: rank-3 unsigned-byte images or rank-1 unsigned-byte labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdxFile {
    Images {
        count: usize,
        rows: usize,
        cols: usize,
        pixels: Vec<u8>,
    },
    Labels(Vec<u8>),
}

impl IdxFile {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let magic = read_u32(bytes, 0)?;
        let rank = match magic {
            IDX_IMAGES_MAGIC => 3,
            IDX_LABELS_MAGIC => 1,
            other => {
                return Err(Error::Format {
                    offset: 0,
                    message: format!("unsupported magic 0x{other:08x}"),
                })
            }
        };
        let dims: Vec<usize> = (0..rank)
            .map(|d| read_u32(bytes, 4 + 4 * d).map(|v| v as usize))
            .collect::<Result<_>>()?;
        let header = 4 + 4 * rank;
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(Error::Format {
                offset: 4,
                message: "dimension product overflows".into(),
            })?;
        let actual = bytes.len() - header;
        if actual != expected {
            return Err(Error::Format {
                offset: header + actual.min(expected),
                message: format!("expected {expected} payload bytes, found {actual}"),
            });
        }
        let payload = bytes[header..].to_vec();
        Ok(match rank {
            3 => IdxFile::Images {
                count: dims[0],
                rows: dims[1],
                cols: dims[2],
                pixels: payload,
            },
            _ => IdxFile::Labels(payload),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            IdxFile::Images {
                count,
                rows,
                cols,
                pixels,
            } => {
                out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
                for d in [count, rows, cols] {
                    out.extend_from_slice(&(*d as u32).to_be_bytes());
                }
                out.extend_from_slice(pixels);
            }
            IdxFile::Labels(labels) => {
                out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
                out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
                out.extend_from_slice(labels);
            }
        }
        out
    }

    /// Pixels scaled to `[0, 1]`, one flattened image after another.
    pub fn scaled_pixels(&self) -> Option<Vec<f64>> {
        match self {
            IdxFile::Images { pixels, .. } => {
                Some(pixels.iter().map(|&p| f64::from(p) / 255.0).collect())
            }
            IdxFile::Labels(_) => None,
        }
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format {
            offset: bytes.len(),
            message: format!("header truncated: need 4 bytes at offset {offset}"),
        })
}

pub fn read_idx(path: impl AsRef<Path>) -> Result<IdxFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    IdxFile::parse(&bytes)
}

pub fn write_idx(path: impl AsRef<Path>, file: &IdxFile) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, file.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Joins an image file and a label file into a flattened dataset.
pub fn load_idx_dataset(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    classes: usize,
) -> Result<LabeledDataset> {
    let img = read_idx(images)?;
    let (count, rows, cols) = match &img {
        IdxFile::Images {
            count, rows, cols, ..
        } => (*count, *rows, *cols),
        IdxFile::Labels(_) => return Err(Error::invalid("image path holds a label file")),
    };
    let lab = match read_idx(labels)? {
        IdxFile::Labels(l) => l,
        IdxFile::Images { .. } => return Err(Error::invalid("label path holds an image file")),
    };
    if lab.len() != count {
        return Err(Error::invalid(format!(
            "{count} images but {} labels",
            lab.len()
        )));
    }
    LabeledDataset::new(
        rows * cols,
        classes,
        img.scaled_pixels().unwrap(),
        lab.into_iter().map(usize::from).collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthProfile {
    pub values: Vec<f64>,
    pub mean: f64,
    pub sigma_n: f64,
}

impl BandwidthProfile {
    pub fn uniform(m: usize, b: f64) -> Self {
        Self {
            values: vec![b; m],
            mean: b,
            sigma_n: 0.0,
        }
    }
}

/// Draws `b_i ~ U((1−σ_N)·b_M, (1+σ_N)·b_M)`, one value per device.
pub fn assign_bandwidths(m: usize, mean: f64, sigma_n: f64, seed: u64) -> Result<BandwidthProfile> {
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::invalid("mean bandwidth must be positive"));
    }
    if !(0.0..1.0).contains(&sigma_n) {
        return Err(Error::invalid(format!(
            "normalized std {sigma_n} outside [0, 1); bandwidths must stay positive"
        )));
    }
    let (lo, hi) = ((1.0 - sigma_n) * mean, (1.0 + sigma_n) * mean);
    let mut rng = rng::stream(seed, streams::BANDWIDTH, 0);
    let values = (0..m)
        .map(|_| {
            if sigma_n == 0.0 {
                mean
            } else {
                rand_distr::Uniform::new(lo, hi).unwrap().sample(&mut rng)
            }
        })
        .collect();
    Ok(BandwidthProfile {
        values,
        mean,
        sigma_n,
    })
}
