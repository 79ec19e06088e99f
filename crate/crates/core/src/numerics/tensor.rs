use crate::error::{Error, Result};

/// Dense row-major array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "shape {shape:?} has a zero dimension"
            )));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::ShapeMismatch {
                expected: shape,
                found: vec![data.len()],
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { shape, data })
    }

    /// Flat vector tensor.
    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        let len = data.len();
        Self::new(vec![len], data)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    pub(crate) fn from_parts_unchecked(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::ShapeMismatch {
                expected: shape.to_vec(),
                found: self.shape.clone(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn l2_norm(&self) -> Result<f64> {
        if self.data.is_empty() {
            return Err(Error::EmptyTensor);
        }
        Ok(self.data.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Projects onto the L2 ball of the given radius centred at zero.
    pub fn project_l2_ball(&self, radius: f64) -> Result<Tensor> {
        if radius < 0.0 || radius.is_nan() {
            return Err(Error::NegativeRadius(radius));
        }
        let norm = self.l2_norm()?;
        if norm <= radius {
            return Ok(self.clone());
        }
        let scale = radius / norm;
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= scale);
        // One rescale can land a few ulps outside the ball; nudge inward.
        let mut n = out.l2_norm()?;
        while n > radius {
            let shrink = 1.0 - f64::EPSILON * 4.0;
            out.data.iter_mut().for_each(|v| *v *= shrink);
            n = out.l2_norm()?;
        }
        Ok(out)
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Result<Tensor> {
        if lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
        Ok(out)
    }

    pub fn scale(&self, a: f64) -> Tensor {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self::from_parts_unchecked(self.shape.clone(), data))
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        axpy(1.0, other, self)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bitwise_eq(&self, other: &Tensor) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub(crate) fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape.clone(),
                found: other.shape.clone(),
            });
        }
        Ok(())
    }
}

/// `a * x + y`, elementwise.
pub fn axpy(a: f64, x: &Tensor, y: &Tensor) -> Result<Tensor> {
    y.check_same_shape(x)?;
    let data = x
        .data
        .iter()
        .zip(&y.data)
        .map(|(xi, yi)| a * xi + yi)
        .collect();
    Ok(Tensor::from_parts_unchecked(y.shape.clone(), data))
}
