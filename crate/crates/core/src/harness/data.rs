use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Labelled inputs with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Tensor,
    labels: Vec<usize>,
    num_classes: usize,
    split: Split,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, num_classes: usize, split: Split) -> Result<Self> {
        if inputs.shape().len() < 2 || inputs.shape()[0] != labels.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![labels.len()],
                found: inputs.shape().to_vec(),
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange { label, classes: num_classes });
        }
        Ok(Self { inputs, labels, num_classes, split })
    }

    pub fn inputs(&self) -> &Tensor {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Per-sample input shape.
    pub fn sample_shape(&self) -> &[usize] {
        &self.inputs.shape()[1..]
    }

    pub fn sample_numel(&self) -> usize {
        self.sample_shape().iter().product()
    }

    /// Gathers the given samples into a batch tensor.
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let d = self.sample_numel();
        let src = self.inputs.data();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(&src[i * d..(i + 1) * d]);
        }
        let mut shape = vec![indices.len()];
        shape.extend_from_slice(self.sample_shape());
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (Tensor::from_parts_unchecked(shape, data), labels)
    }

    /// Contiguous batches in storage order; the last one may be short.
    pub fn batches(&self, batch_size: usize) -> Vec<(Tensor, Vec<usize>)> {
        let bs = batch_size.max(1);
        let idx: Vec<usize> = (0..self.len()).collect();
        idx.chunks(bs).map(|c| self.gather(c)).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let (inputs, labels) = self.gather(indices);
        Dataset { inputs, labels, num_classes: self.num_classes, split: self.split }
    }

    /// Same labels and split with replaced inputs.
    pub fn with_inputs(&self, inputs: Tensor) -> Result<Dataset> {
        self.inputs.check_same_shape(&inputs)?;
        Ok(Dataset { inputs, ..self.clone() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Blobs2d,
    Rings2d,
    Shapes8x8,
}

impl SyntheticKind {
    pub fn num_classes(self) -> usize {
        match self {
            SyntheticKind::Blobs2d | SyntheticKind::Rings2d => 2,
            SyntheticKind::Shapes8x8 => 4,
        }
    }

    pub fn sample_shape(self) -> Vec<usize> {
        match self {
            SyntheticKind::Blobs2d | SyntheticKind::Rings2d => vec![2],
            SyntheticKind::Shapes8x8 => vec![1, 8, 8],
        }
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs2d" => Ok(Self::Blobs2d),
            "rings2d" => Ok(Self::Rings2d),
            "shapes8x8" => Ok(Self::Shapes8x8),
            other => Err(Error::InvalidConfig(format!("unknown dataset kind `{other}`"))),
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SyntheticKind::Blobs2d => "blobs2d",
            SyntheticKind::Rings2d => "rings2d",
            SyntheticKind::Shapes8x8 => "shapes8x8",
        })
    }
}

/// Generates a synthetic dataset. Labels cycle through the classes so class
/// counts differ by at most one.
pub fn gen_synthetic(kind: SyntheticKind, n: usize, seed: u64, split: Split) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = Rng::new(seed);
    let classes = kind.num_classes();
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let mut data = Vec::with_capacity(n * kind.sample_shape().iter().product::<usize>());
    for &y in &labels {
        match kind {
            SyntheticKind::Blobs2d => data.extend(blob_point(&mut rng, y)),
            SyntheticKind::Rings2d => data.extend(ring_point(&mut rng, y)),
            SyntheticKind::Shapes8x8 => data.extend(shape_image(&mut rng, y)),
        }
    }
    let mut shape = vec![n];
    shape.extend(kind.sample_shape());
    let inputs = Tensor::new(shape, data)?;
    Dataset::new(inputs, labels, classes, split)
}

/// Two anisotropic Gaussians. Along x the classes are separated by less than
/// a typical `l_inf` budget but with very little spread, a highly predictive
/// yet brittle feature; along y they are further apart but overlap.
fn blob_point(rng: &mut Rng, y: usize) -> [f64; 2] {
    let s = if y == 1 { 1.0 } else { -1.0 };
    let x0 = 0.5 + s * 0.02 + 0.005 * rng.normal();
    let x1 = 0.5 + s * 0.15 + 0.1 * rng.normal();
    [x0.clamp(0.0, 1.0), x1.clamp(0.0, 1.0)]
}

fn ring_point(rng: &mut Rng, y: usize) -> [f64; 2] {
    let radius = if y == 0 { 0.15 } else { 0.35 } + 0.03 * rng.normal();
    let angle = rng.uniform_range(0.0, std::f64::consts::TAU);
    [
        (0.5 + radius * angle.cos()).clamp(0.0, 1.0),
        (0.5 + radius * angle.sin()).clamp(0.0, 1.0),
    ]
}

const SHAPE_ON: f64 = 0.7;
const SHAPE_OFF: f64 = 0.3;
const SHAPE_JITTER: f64 = 0.12;

/// 8x8 grayscale glyph: 0 filled square, 1 hollow square, 2 cross,
/// 3 diagonal stripes; random placement plus per-pixel noise.
fn shape_image(rng: &mut Rng, y: usize) -> Vec<f64> {
    let mut mask = [[false; 8]; 8];
    match y {
        0 | 1 => {
            let size = 3 + rng.below(3);
            let r0 = rng.below(8 - size + 1);
            let c0 = rng.below(8 - size + 1);
            for (r, row) in mask.iter_mut().enumerate().skip(r0).take(size) {
                for (c, cell) in row.iter_mut().enumerate().skip(c0).take(size) {
                    let border = r == r0 || r == r0 + size - 1 || c == c0 || c == c0 + size - 1;
                    *cell = y == 0 || border;
                }
            }
        }
        2 => {
            let r = 2 + rng.below(4);
            let c = 2 + rng.below(4);
            let arm = 2 + rng.below(2);
            for row in &mut mask[r.saturating_sub(arm)..(r + arm + 1).min(8)] {
                row[c] = true;
            }
            mask[r][c.saturating_sub(arm)..(c + arm + 1).min(8)].fill(true);
        }
        _ => {
            let period = 3 + rng.below(2);
            let phase = rng.below(period);
            for (r, row) in mask.iter_mut().enumerate() {
                for (c, cell) in row.iter_mut().enumerate() {
                    *cell = (r + c + phase).is_multiple_of(period);
                }
            }
        }
    }
    mask.iter()
        .flatten()
        .map(|&on| {
            let base = if on { SHAPE_ON } else { SHAPE_OFF };
            (base + SHAPE_JITTER * rng.normal()).clamp(0.0, 1.0)
        })
        .collect()
}
