use std::collections::BTreeSet;

use super::spec::NetworkSpec;
use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl LayerParams {
    pub fn numel(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, Tensor::len)
    }

    /// Weight followed by bias as one flat vector.
    pub fn flatten(&self) -> Tensor {
        let mut data = self.weight.data().to_vec();
        if let Some(b) = &self.bias {
            data.extend_from_slice(b.data());
        }
        let n = data.len();
        Tensor::from_parts_unchecked(vec![n], data)
    }

    /// Inverse of [`LayerParams::flatten`].
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.numel() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.numel()],
                found: vec![flat.len()],
            });
        }
        let (w, b) = flat.split_at(self.weight.len());
        self.weight.data_mut().copy_from_slice(w);
        if let Some(bias) = &mut self.bias {
            bias.data_mut().copy_from_slice(b);
        }
        Ok(())
    }

    fn zeros_like(&self) -> Self {
        Self {
            weight: Tensor::zeros(self.weight.shape()),
            bias: self.bias.as_ref().map(|b| Tensor::zeros(b.shape())),
        }
    }

    pub fn bitwise_eq(&self, other: &LayerParams) -> bool {
        self.weight.bitwise_eq(&other.weight)
            && match (&self.bias, &other.bias) {
                (Some(a), Some(b)) => a.bitwise_eq(b),
                (None, None) => true,
                _ => false,
            }
    }
}

/// Weights of every parameterized layer, keyed by layer name, in network order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, LayerParams)>,
}

/// Gradients share the keyed layout of the parameters they belong to.
pub type GradSet = ParamSet;

impl ParamSet {
    /// He-uniform initialization `U(-sqrt(6/fan_in), sqrt(6/fan_in))`;
    /// biases start at zero.
    pub fn init(spec: &NetworkSpec, rng: &mut Rng) -> Self {
        let entries = spec
            .layers()
            .iter()
            .filter(|l| l.kind.is_parameterized())
            .map(|l| {
                let shape = l.kind.weight_shape().unwrap();
                let bound = (6.0 / l.kind.fan_in() as f64).sqrt();
                let n = shape.iter().product();
                let data = (0..n).map(|_| rng.uniform_range(-bound, bound)).collect();
                let weight = Tensor::from_parts_unchecked(shape, data);
                let bias = l.kind.bias_shape().map(|s| Tensor::zeros(&s));
                (l.name.clone(), LayerParams { weight, bias })
            })
            .collect();
        Self { entries }
    }

    /// Builds a set from explicit entries, validating it against `spec`.
    pub fn from_entries(spec: &NetworkSpec, entries: Vec<(String, LayerParams)>) -> Result<Self> {
        let set = Self { entries };
        set.validate(spec)?;
        Ok(set)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(n, p)| (n.clone(), p.zeros_like()))
                .collect(),
        }
    }

    /// Checks that keys and shapes exactly match the parameterized layers.
    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        let modules: Vec<_> = spec
            .layers()
            .iter()
            .filter(|l| l.kind.is_parameterized())
            .collect();
        if modules.len() != self.entries.len() {
            return Err(Error::InvalidSpec(format!(
                "parameter set has {} entries, network has {} modules",
                self.entries.len(),
                modules.len()
            )));
        }
        for (layer, (name, p)) in modules.iter().zip(&self.entries) {
            if &layer.name != name {
                return Err(Error::UnknownModule(name.clone()));
            }
            let ws = layer.kind.weight_shape().unwrap();
            if p.weight.shape() != ws.as_slice() {
                return Err(Error::ShapeMismatch {
                    expected: ws,
                    found: p.weight.shape().to_vec(),
                });
            }
            match (layer.kind.bias_shape(), &p.bias) {
                (Some(s), Some(b)) if b.shape() == s.as_slice() => {}
                (None, None) => {}
                (expected, found) => {
                    return Err(Error::ShapeMismatch {
                        expected: expected.unwrap_or_default(),
                        found: found.as_ref().map(|b| b.shape().to_vec()).unwrap_or_default(),
                    })
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&LayerParams> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut LayerParams> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
    }

    pub fn module(&self, name: &str) -> Result<&LayerParams> {
        self.get(name).ok_or_else(|| Error::UnknownModule(name.into()))
    }

    pub fn module_mut(&mut self, name: &str) -> Result<&mut LayerParams> {
        self.get_mut(name).ok_or_else(|| Error::UnknownModule(name.into()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LayerParams)> {
        self.entries.iter().map(|(n, p)| (n.as_str(), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut LayerParams)> {
        self.entries.iter_mut().map(|(n, p)| (n.as_str(), p))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_params(&self) -> usize {
        self.entries.iter().map(|(_, p)| p.numel()).sum()
    }

    pub fn bitwise_eq(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((na, a), (nb, b))| na == nb && a.bitwise_eq(b))
    }

    /// All parameters as one flat vector in network order.
    pub fn flatten(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|(_, p)| p.flatten().into_data())
            .collect()
    }

    /// Elementwise `f(self, other)` over congruent sets.
    pub fn zip_map(&self, other: &ParamSet, mut f: impl FnMut(f64, f64) -> f64) -> Result<ParamSet> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::InvalidArgument("parameter sets are not congruent".into()));
        }
        let mut out = self.clone();
        for ((na, a), (nb, b)) in out.entries.iter_mut().zip(&other.entries) {
            if na != nb {
                return Err(Error::UnknownModule(nb.clone()));
            }
            a.weight.check_same_shape(&b.weight)?;
            for (x, y) in a.weight.data_mut().iter_mut().zip(b.weight.data()) {
                *x = f(*x, *y);
            }
            match (&mut a.bias, &b.bias) {
                (Some(ab), Some(bb)) => {
                    ab.check_same_shape(bb)?;
                    for (x, y) in ab.data_mut().iter_mut().zip(bb.data()) {
                        *x = f(*x, *y);
                    }
                }
                (None, None) => {}
                _ => return Err(Error::InvalidArgument("bias presence differs".into())),
            }
        }
        Ok(out)
    }
}

/// Names of layers whose parameters must not change during optimization.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FreezeMask {
    frozen: BTreeSet<String>,
}

impl FreezeMask {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new<I, S>(spec: &NetworkSpec, frozen: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let frozen: BTreeSet<String> = frozen.into_iter().map(Into::into).collect();
        for name in &frozen {
            spec.module_index(name)?;
        }
        Ok(Self { frozen })
    }

    /// Freezes every module except the listed ones.
    pub fn all_except(spec: &NetworkSpec, trainable: &[String]) -> Result<Self> {
        for name in trainable {
            spec.module_index(name)?;
        }
        let frozen = spec
            .module_names()
            .into_iter()
            .filter(|n| !trainable.iter().any(|t| t == n))
            .map(String::from)
            .collect();
        Ok(Self { frozen })
    }

    pub fn is_frozen(&self, name: &str) -> bool {
        self.frozen.contains(name)
    }

    pub fn frozen(&self) -> impl Iterator<Item = &str> {
        self.frozen.iter().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let spec = NetworkSpec::small_cnn(4, 4).unwrap();
        let a = ParamSet::init(&spec, &mut Rng::new(1));
        let b = ParamSet::init(&spec, &mut Rng::new(1));
        assert!(a.bitwise_eq(&b));
        let c = ParamSet::init(&spec, &mut Rng::new(2));
        assert!(!a.bitwise_eq(&c));
        a.validate(&spec).unwrap();
    }

    #[test]
    fn linear_shapes() {
        let spec = NetworkSpec::mlp(4, &[], 3).unwrap();
        let p = ParamSet::init(&spec, &mut Rng::new(0));
        let fc = p.get("fc1").unwrap();
        assert_eq!(fc.weight.shape(), &[3, 4]);
        assert_eq!(fc.bias.as_ref().unwrap().shape(), &[3]);
        assert!(fc.bias.as_ref().unwrap().data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn init_variance_matches_uniform_moment() {
        // U(-a, a) has variance a^2 / 3 = 2 / fan_in.
        let spec = NetworkSpec::mlp(256, &[], 40).unwrap();
        let p = ParamSet::init(&spec, &mut Rng::new(17));
        let w = p.get("fc1").unwrap().weight.data();
        assert!(w.len() >= 10_000);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / w.len() as f64;
        let expected = 2.0 / 256.0;
        assert!((var - expected).abs() / expected < 0.2, "var {var} vs {expected}");
    }

    #[test]
    fn flat_round_trip() {
        let spec = NetworkSpec::mlp(3, &[2], 2).unwrap();
        let mut p = ParamSet::init(&spec, &mut Rng::new(4));
        let flat = p.get("fc1").unwrap().flatten();
        assert_eq!(flat.len(), 8);
        let doubled: Vec<f64> = flat.data().iter().map(|v| v * 2.0).collect();
        p.get_mut("fc1").unwrap().assign_flat(&doubled).unwrap();
        assert_eq!(p.get("fc1").unwrap().flatten().data(), doubled.as_slice());
    }

    #[test]
    fn freeze_mask_validates() {
        let spec = NetworkSpec::mlp(2, &[4], 2).unwrap();
        assert!(FreezeMask::new(&spec, ["fc1"]).is_ok());
        assert!(FreezeMask::new(&spec, ["relu1"]).is_err());
        let m = FreezeMask::all_except(&spec, &["fc2".to_string()]).unwrap();
        assert!(m.is_frozen("fc1") && !m.is_frozen("fc2"));
    }
}
