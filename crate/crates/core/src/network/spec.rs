use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerKind {
    Linear {
        in_features: usize,
        out_features: usize,
        bias: bool,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    },
    Relu,
    Flatten,
}

impl LayerKind {
    pub fn is_parameterized(&self) -> bool {
        matches!(self, LayerKind::Linear { .. } | LayerKind::Conv2d { .. })
    }

    pub fn has_bias(&self) -> bool {
        match self {
            LayerKind::Linear { bias, .. } | LayerKind::Conv2d { bias, .. } => *bias,
            _ => false,
        }
    }

    /// Weight shape, `None` for parameter-free layers.
    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match *self {
            LayerKind::Linear {
                in_features,
                out_features,
                ..
            } => Some(vec![out_features, in_features]),
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some(vec![out_channels, in_channels, kernel, kernel]),
            _ => None,
        }
    }

    pub fn bias_shape(&self) -> Option<Vec<usize>> {
        match *self {
            LayerKind::Linear {
                out_features,
                bias: true,
                ..
            } => Some(vec![out_features]),
            LayerKind::Conv2d {
                out_channels,
                bias: true,
                ..
            } => Some(vec![out_channels]),
            _ => None,
        }
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            LayerKind::Linear { in_features, .. } => in_features,
            LayerKind::Conv2d {
                in_channels,
                kernel,
                ..
            } => in_channels * kernel * kernel,
            _ => 0,
        }
    }

    fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match *self {
            LayerKind::Linear {
                in_features,
                out_features,
                ..
            } => {
                if input != [in_features] {
                    return Err(format!("linear expects input [{in_features}], got {input:?}"));
                }
                Ok(vec![out_features])
            }
            LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                let &[c, h, w] = input else {
                    return Err(format!("conv2d expects [C, H, W] input, got {input:?}"));
                };
                if c != in_channels {
                    return Err(format!("conv2d expects {in_channels} channels, got {c}"));
                }
                if kernel == 0 || stride == 0 {
                    return Err("conv2d kernel and stride must be positive".into());
                }
                if h + 2 * padding < kernel || w + 2 * padding < kernel {
                    return Err(format!("kernel {kernel} larger than padded input {input:?}"));
                }
                let oh = (h + 2 * padding - kernel) / stride + 1;
                let ow = (w + 2 * padding - kernel) / stride + 1;
                Ok(vec![out_channels, oh, ow])
            }
            LayerKind::Relu => Ok(input.to_vec()),
            LayerKind::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn linear(name: &str, in_features: usize, out_features: usize) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::Linear {
                in_features,
                out_features,
                bias: true,
            },
        }
    }

    pub fn linear_no_bias(name: &str, in_features: usize, out_features: usize) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::Linear {
                in_features,
                out_features,
                bias: false,
            },
        }
    }

    pub fn conv2d(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                bias: true,
            },
        }
    }

    pub fn relu(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::Relu,
        }
    }

    pub fn flatten(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::Flatten,
        }
    }
}

/// A validated feed-forward architecture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
    input_shape: Vec<usize>,
    num_classes: usize,
    /// `shapes[i]` is the per-sample input shape of layer `i`; the last entry
    /// is the output shape.
    shapes: Vec<Vec<usize>>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>, input_shape: Vec<usize>, num_classes: usize) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::InvalidSpec(format!("bad input shape {input_shape:?}")));
        }
        let mut seen = HashSet::new();
        for layer in &layers {
            if layer.name.is_empty() || layer.name.contains(['\t', '\n', ',']) {
                return Err(Error::InvalidSpec(format!("bad layer name {:?}", layer.name)));
            }
            if !seen.insert(layer.name.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate layer name `{}`", layer.name)));
            }
        }
        if !layers.iter().any(|l| l.kind.is_parameterized()) {
            return Err(Error::InvalidSpec("no parameterized layer".into()));
        }
        let mut shapes = vec![input_shape.clone()];
        for layer in &layers {
            let next = layer
                .kind
                .output_shape(shapes.last().unwrap())
                .map_err(|e| Error::InvalidSpec(format!("layer `{}`: {e}", layer.name)))?;
            shapes.push(next);
        }
        if shapes.last().unwrap() != &[num_classes] {
            return Err(Error::InvalidSpec(format!(
                "output shape {:?} does not match {num_classes} classes",
                shapes.last().unwrap()
            )));
        }
        Ok(Self {
            layers,
            input_shape,
            num_classes,
            shapes,
        })
    }

    /// Fully connected ReLU network.
    pub fn mlp(input_dim: usize, hidden: &[usize], num_classes: usize) -> Result<Self> {
        let mut layers = Vec::new();
        let mut width = input_dim;
        for (i, &h) in hidden.iter().enumerate() {
            layers.push(LayerSpec::linear(&format!("fc{}", i + 1), width, h));
            layers.push(LayerSpec::relu(&format!("relu{}", i + 1)));
            width = h;
        }
        layers.push(LayerSpec::linear(&format!("fc{}", hidden.len() + 1), width, num_classes));
        Self::new(layers, vec![input_dim], num_classes)
    }

    /// The reference convolutional net for 1x8x8 inputs: two conv modules and
    /// two linear modules.
    pub fn small_cnn(width: usize, num_classes: usize) -> Result<Self> {
        let c1 = width;
        let c2 = 2 * width;
        Self::new(
            vec![
                LayerSpec::conv2d("conv1", 1, c1, 3, 1, 1),
                LayerSpec::relu("relu1"),
                LayerSpec::conv2d("conv2", c1, c2, 3, 2, 1),
                LayerSpec::relu("relu2"),
                LayerSpec::flatten("flatten"),
                LayerSpec::linear("fc1", c2 * 16, 4 * width),
                LayerSpec::relu("relu3"),
                LayerSpec::linear("fc2", 4 * width, num_classes),
            ],
            vec![1, 8, 8],
            num_classes,
        )
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_numel(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Per-sample shape entering layer `index` (`index == layers.len()` gives
    /// the output shape).
    pub fn shape_at(&self, index: usize) -> &[usize] {
        &self.shapes[index]
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Names of parameterized layers (modules) in network order.
    pub fn module_names(&self) -> Vec<&str> {
        self.layers
            .iter()
            .filter(|l| l.kind.is_parameterized())
            .map(|l| l.name.as_str())
            .collect()
    }

    pub fn module_count(&self) -> usize {
        self.layers.iter().filter(|l| l.kind.is_parameterized()).count()
    }

    /// Layer index of a named module, rejecting unknown or parameter-free names.
    pub fn module_index(&self, name: &str) -> Result<usize> {
        match self.layer_index(name) {
            Some(i) if self.layers[i].kind.is_parameterized() => Ok(i),
            _ => Err(Error::UnknownModule(name.to_string())),
        }
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                l.kind.weight_shape().map_or(0, |s| s.iter().product())
                    + l.kind.bias_shape().map_or(0, |s| s.iter().product())
            })
            .sum()
    }

    /// Canonical text form; the checkpoint digest is computed over it.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "input={:?};classes={}", self.input_shape, self.num_classes);
        for l in &self.layers {
            let _ = match &l.kind {
                LayerKind::Linear {
                    in_features,
                    out_features,
                    bias,
                } => write!(s, ";{}:linear({in_features},{out_features},bias={bias})", l.name),
                LayerKind::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    bias,
                } => write!(
                    s,
                    ";{}:conv2d({in_channels},{out_channels},k={kernel},s={stride},p={padding},bias={bias})",
                    l.name
                ),
                LayerKind::Relu => write!(s, ";{}:relu", l.name),
                LayerKind::Flatten => write!(s, ";{}:flatten", l.name),
            };
        }
        s
    }
}
