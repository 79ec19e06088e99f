use std::fmt;
use std::str::FromStr;

use super::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, Rng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorruptionKind {
    GaussianNoise,
    BoxBlur,
    Brightness,
    Contrast,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 4] = [
        CorruptionKind::GaussianNoise,
        CorruptionKind::BoxBlur,
        CorruptionKind::Brightness,
        CorruptionKind::Contrast,
    ];

    /// Corruption family this kind stands in for.
    pub fn group(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "Noise",
            CorruptionKind::BoxBlur => "Blur",
            CorruptionKind::Brightness => "Weather",
            CorruptionKind::Contrast => "Digital",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::BoxBlur => "box_blur",
            CorruptionKind::Brightness => "brightness",
            CorruptionKind::Contrast => "contrast",
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown corruption `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorruptionSpec {
    kind: CorruptionKind,
    severity: u8,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: u8) -> Result<Self> {
        if !(1..=5).contains(&severity) {
            return Err(Error::InvalidConfig(format!("severity {severity} outside 1..=5")));
        }
        Ok(Self { kind, severity })
    }

    pub fn kind(&self) -> CorruptionKind {
        self.kind
    }

    pub fn severity(&self) -> u8 {
        self.severity
    }

    /// Every kind at every severity (20 specs), kind-major.
    pub fn all() -> Vec<CorruptionSpec> {
        CorruptionKind::ALL
            .into_iter()
            .flat_map(|kind| (1..=5).map(move |severity| CorruptionSpec { kind, severity }))
            .collect()
    }
}

/// Applies a corruption to every input; labels are untouched and values are
/// clamped to `[0, 1]`.
pub fn corrupt(ds: &Dataset, spec: &CorruptionSpec, seed: u64) -> Result<Dataset> {
    let s = spec.severity as f64;
    let mut x = ds.inputs().clone();
    match spec.kind {
        CorruptionKind::GaussianNoise => {
            let sigma = 0.04 * s;
            let mut rng = Rng::new(derive_seed(seed, spec.severity as u64));
            for v in x.data_mut() {
                *v = (*v + sigma * rng.normal()).clamp(0.0, 1.0);
            }
        }
        CorruptionKind::BoxBlur => {
            let width = 2 * spec.severity as usize - 1;
            if width > 1 {
                x = box_blur(&x, width);
            }
        }
        CorruptionKind::Contrast => {
            let factor = 1.0 - 0.15 * s;
            for v in x.data_mut() {
                *v = (0.5 + (*v - 0.5) * factor).clamp(0.0, 1.0);
            }
        }
        CorruptionKind::Brightness => {
            for v in x.data_mut() {
                *v = (*v + 0.1 * s).clamp(0.0, 1.0);
            }
        }
    }
    ds.with_inputs(x)
}

/// Mean over a `width x width` window clipped to the image. Samples of shape
/// `[C, H, W]` are blurred per channel; flat samples along their only axis.
fn box_blur(x: &Tensor, width: usize) -> Tensor {
    let shape = x.shape();
    let (planes, h, w) = match shape.len() {
        4 => (shape[0] * shape[1], shape[2], shape[3]),
        _ => (shape[0], 1, shape[1..].iter().product()),
    };
    let r = (width / 2) as isize;
    let rows = if h == 1 { 0 } else { r };
    let src = x.data();
    let mut out = vec![0.0; src.len()];
    for p in 0..planes {
        let plane = &src[p * h * w..(p + 1) * h * w];
        for i in 0..h as isize {
            for j in 0..w as isize {
                let mut sum = 0.0;
                let mut count = 0usize;
                for di in -rows..=rows {
                    let ii = i + di;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for dj in -r..=r {
                        let jj = j + dj;
                        if jj < 0 || jj >= w as isize {
                            continue;
                        }
                        sum += plane[ii as usize * w + jj as usize];
                        count += 1;
                    }
                }
                out[p * h * w + i as usize * w + j as usize] = (sum / count as f64).clamp(0.0, 1.0);
            }
        }
    }
    Tensor::from_parts_unchecked(shape.to_vec(), out)
}
