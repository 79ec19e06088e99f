use super::params::{GradSet, LayerParams, ParamSet};
use super::spec::{LayerKind, NetworkSpec};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Output of a reverse-mode pass.
#[derive(Debug, Clone)]
pub struct Backward {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    pub sample_losses: Vec<f64>,
    pub logits: Tensor,
    /// Gradients of the mean loss. Modules before the start layer of a
    /// partial pass carry zeros.
    pub grads: GradSet,
    /// Gradient of the mean loss with respect to the pass's input activation.
    pub input_grad: Tensor,
}

/// Mean cross-entropy and its gradient with respect to the logits.
pub fn loss_ce(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (losses, dlogits) = ce_forward_backward(logits, labels)?;
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    Ok((mean, dlogits))
}

/// Per-sample cross-entropy of a `[batch, classes]` logit tensor.
pub fn cross_entropy_per_sample(logits: &Tensor, labels: &[usize]) -> Result<Vec<f64>> {
    let (batch, classes) = logit_dims(logits, labels)?;
    let z = logits.data();
    (0..batch)
        .map(|b| {
            let row = &z[b * classes..(b + 1) * classes];
            Ok(log_sum_exp(row) - row[labels[b]])
        })
        .collect()
}

/// Index of the largest logit per row; ties go to the lower class index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let classes = *logits.shape().last().unwrap();
    logits
        .data()
        .chunks(classes)
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

fn logit_dims(logits: &Tensor, labels: &[usize]) -> Result<(usize, usize)> {
    let &[batch, classes] = logits.shape() else {
        return Err(Error::ShapeMismatch {
            expected: vec![labels.len(), 0],
            found: logits.shape().to_vec(),
        });
    };
    if batch != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![labels.len(), classes],
            found: logits.shape().to_vec(),
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok((batch, classes))
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn ce_forward_backward(logits: &Tensor, labels: &[usize]) -> Result<(Vec<f64>, Tensor)> {
    let (batch, classes) = logit_dims(logits, labels)?;
    let z = logits.data();
    let mut losses = Vec::with_capacity(batch);
    let mut grad = vec![0.0; z.len()];
    let inv_batch = 1.0 / batch as f64;
    for b in 0..batch {
        let row = &z[b * classes..(b + 1) * classes];
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - m).exp()).collect();
        let sum: f64 = exps.iter().sum();
        losses.push(m + sum.ln() - row[labels[b]]);
        let g = &mut grad[b * classes..(b + 1) * classes];
        for k in 0..classes {
            let onehot = if k == labels[b] { 1.0 } else { 0.0 };
            g[k] = (exps[k] / sum - onehot) * inv_batch;
        }
    }
    Ok((losses, Tensor::from_parts_unchecked(logits.shape().to_vec(), grad)))
}

impl NetworkSpec {
    pub fn forward(&self, params: &ParamSet, batch: &Tensor) -> Result<Tensor> {
        self.forward_from(params, 0, batch)
    }

    /// Runs layers `start..` on an activation shaped like the input of layer
    /// `start` (with a leading batch dimension).
    pub fn forward_from(&self, params: &ParamSet, start: usize, act: &Tensor) -> Result<Tensor> {
        let batch = self.check_activation(start, act)?;
        let mut x = act.data().to_vec();
        for i in start..self.layers().len() {
            x = self.layer_forward(params, i, batch, &x)?;
        }
        Ok(Tensor::from_parts_unchecked(
            vec![batch, self.num_classes()],
            x,
        ))
    }

    /// Activation entering layer `layer` for the given input batch.
    pub fn activation_at(&self, params: &ParamSet, batch: &Tensor, layer: usize) -> Result<Tensor> {
        let n = self.check_activation(0, batch)?;
        let mut x = batch.data().to_vec();
        for i in 0..layer {
            x = self.layer_forward(params, i, n, &x)?;
        }
        let mut shape = vec![n];
        shape.extend_from_slice(self.shape_at(layer));
        Ok(Tensor::from_parts_unchecked(shape, x))
    }

    /// Exact gradients of the mean cross-entropy with respect to every
    /// parameter and the input batch.
    pub fn backward(&self, params: &ParamSet, batch: &Tensor, labels: &[usize]) -> Result<Backward> {
        self.backward_from(params, 0, batch, labels)
    }

    /// Reverse-mode pass over layers `start..`, treating `act` as the input.
    pub fn backward_from(
        &self,
        params: &ParamSet,
        start: usize,
        act: &Tensor,
        labels: &[usize],
    ) -> Result<Backward> {
        let batch = self.check_activation(start, act)?;
        if labels.len() != batch {
            return Err(Error::ShapeMismatch {
                expected: vec![batch],
                found: vec![labels.len()],
            });
        }
        let n_layers = self.layers().len();
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n_layers - start + 1);
        inputs.push(act.data().to_vec());
        for i in start..n_layers {
            let next = self.layer_forward(params, i, batch, inputs.last().unwrap())?;
            inputs.push(next);
        }
        let logits = Tensor::from_parts_unchecked(
            vec![batch, self.num_classes()],
            inputs.pop().unwrap(),
        );
        let (sample_losses, dlogits) = ce_forward_backward(&logits, labels)?;
        let loss = sample_losses.iter().sum::<f64>() / batch as f64;

        let mut grads = params.zeros_like();
        let mut dy = dlogits.into_data();
        for i in (start..n_layers).rev() {
            let x = &inputs[i - start];
            dy = self.layer_backward(params, &mut grads, i, batch, x, &dy)?;
        }
        let input_grad = Tensor::from_parts_unchecked(act.shape().to_vec(), dy);
        Ok(Backward {
            loss,
            sample_losses,
            logits,
            grads,
            input_grad,
        })
    }

    fn check_activation(&self, layer: usize, act: &Tensor) -> Result<usize> {
        let shape = act.shape();
        let expected = self.shape_at(layer);
        if shape.len() != expected.len() + 1 || &shape[1..] != expected {
            let mut exp = vec![shape.first().copied().unwrap_or(0)];
            exp.extend_from_slice(expected);
            return Err(Error::ShapeMismatch {
                expected: exp,
                found: shape.to_vec(),
            });
        }
        Ok(shape[0])
    }

    fn layer_params<'a>(&self, params: &'a ParamSet, i: usize) -> Result<&'a LayerParams> {
        params.module(&self.layers()[i].name)
    }

    fn layer_forward(&self, params: &ParamSet, i: usize, batch: usize, x: &[f64]) -> Result<Vec<f64>> {
        let in_shape = self.shape_at(i);
        match self.layers()[i].kind {
            LayerKind::Linear {
                in_features,
                out_features,
                ..
            } => {
                let p = self.layer_params(params, i)?;
                Ok(linear_forward(p, batch, in_features, out_features, x))
            }
            LayerKind::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                let p = self.layer_params(params, i)?;
                let geom = ConvGeom::new(in_shape, out_channels, kernel, stride, padding);
                Ok(conv_forward(p, batch, &geom, x))
            }
            LayerKind::Relu => Ok(x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()),
            LayerKind::Flatten => Ok(x.to_vec()),
        }
    }

    /// Accumulates parameter gradients for layer `i` and returns the gradient
    /// with respect to its input.
    fn layer_backward(
        &self,
        params: &ParamSet,
        grads: &mut GradSet,
        i: usize,
        batch: usize,
        x: &[f64],
        dy: &[f64],
    ) -> Result<Vec<f64>> {
        let layer = &self.layers()[i];
        let in_shape = self.shape_at(i);
        match layer.kind {
            LayerKind::Linear {
                in_features,
                out_features,
                ..
            } => {
                let p = self.layer_params(params, i)?;
                let g = grads.module_mut(&layer.name)?;
                Ok(linear_backward(p, g, batch, in_features, out_features, x, dy))
            }
            LayerKind::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
                ..
            } => {
                let p = self.layer_params(params, i)?;
                let g = grads.module_mut(&layer.name)?;
                let geom = ConvGeom::new(in_shape, out_channels, kernel, stride, padding);
                Ok(conv_backward(p, g, batch, &geom, x, dy))
            }
            LayerKind::Relu => Ok(x
                .iter()
                .zip(dy)
                .map(|(&v, &d)| if v > 0.0 { d } else { 0.0 })
                .collect()),
            LayerKind::Flatten => Ok(dy.to_vec()),
        }
    }
}

fn linear_forward(p: &LayerParams, batch: usize, nin: usize, nout: usize, x: &[f64]) -> Vec<f64> {
    let w = p.weight.data();
    let mut out = vec![0.0; batch * nout];
    for b in 0..batch {
        let xb = &x[b * nin..(b + 1) * nin];
        for o in 0..nout {
            let row = &w[o * nin..(o + 1) * nin];
            let mut acc = p.bias.as_ref().map_or(0.0, |bias| bias.data()[o]);
            for (wi, xi) in row.iter().zip(xb) {
                acc += wi * xi;
            }
            out[b * nout + o] = acc;
        }
    }
    out
}

fn linear_backward(
    p: &LayerParams,
    g: &mut LayerParams,
    batch: usize,
    nin: usize,
    nout: usize,
    x: &[f64],
    dy: &[f64],
) -> Vec<f64> {
    let w = p.weight.data();
    let mut dx = vec![0.0; batch * nin];
    for b in 0..batch {
        let xb = &x[b * nin..(b + 1) * nin];
        let dyb = &dy[b * nout..(b + 1) * nout];
        let dxb = &mut dx[b * nin..(b + 1) * nin];
        for o in 0..nout {
            let d = dyb[o];
            if d == 0.0 {
                continue;
            }
            let gw = &mut g.weight.data_mut()[o * nin..(o + 1) * nin];
            for (gwi, xi) in gw.iter_mut().zip(xb) {
                *gwi += d * xi;
            }
            let row = &w[o * nin..(o + 1) * nin];
            for (dxi, wi) in dxb.iter_mut().zip(row) {
                *dxi += d * wi;
            }
        }
        if let Some(gb) = &mut g.bias {
            for (gbo, d) in gb.data_mut().iter_mut().zip(dyb) {
                *gbo += d;
            }
        }
    }
    dx
}

struct ConvGeom {
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn new(in_shape: &[usize], cout: usize, k: usize, stride: usize, pad: usize) -> Self {
        let (cin, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
        Self {
            cin,
            h,
            w,
            cout,
            k,
            stride,
            pad,
            oh: (h + 2 * pad - k) / stride + 1,
            ow: (w + 2 * pad - k) / stride + 1,
        }
    }

    /// Input coordinate for output position `o` and kernel offset `kk`, if
    /// it falls inside the unpadded image.
    #[inline]
    fn src(&self, o: usize, kk: usize, limit: usize) -> Option<usize> {
        let pos = (o * self.stride + kk) as isize - self.pad as isize;
        (pos >= 0 && (pos as usize) < limit).then_some(pos as usize)
    }
}

fn conv_forward(p: &LayerParams, batch: usize, g: &ConvGeom, x: &[f64]) -> Vec<f64> {
    let w = p.weight.data();
    let in_len = g.cin * g.h * g.w;
    let out_len = g.cout * g.oh * g.ow;
    let mut out = vec![0.0; batch * out_len];
    for b in 0..batch {
        let xb = &x[b * in_len..(b + 1) * in_len];
        let ob = &mut out[b * out_len..(b + 1) * out_len];
        for co in 0..g.cout {
            let bias = p.bias.as_ref().map_or(0.0, |bias| bias.data()[co]);
            for oi in 0..g.oh {
                for oj in 0..g.ow {
                    let mut acc = bias;
                    for ci in 0..g.cin {
                        for ki in 0..g.k {
                            let Some(ii) = g.src(oi, ki, g.h) else { continue };
                            for kj in 0..g.k {
                                let Some(jj) = g.src(oj, kj, g.w) else { continue };
                                acc += w[((co * g.cin + ci) * g.k + ki) * g.k + kj]
                                    * xb[(ci * g.h + ii) * g.w + jj];
                            }
                        }
                    }
                    ob[(co * g.oh + oi) * g.ow + oj] = acc;
                }
            }
        }
    }
    out
}

fn conv_backward(
    p: &LayerParams,
    grads: &mut LayerParams,
    batch: usize,
    g: &ConvGeom,
    x: &[f64],
    dy: &[f64],
) -> Vec<f64> {
    let w = p.weight.data();
    let in_len = g.cin * g.h * g.w;
    let out_len = g.cout * g.oh * g.ow;
    let mut dx = vec![0.0; batch * in_len];
    for b in 0..batch {
        let xb = &x[b * in_len..(b + 1) * in_len];
        let dyb = &dy[b * out_len..(b + 1) * out_len];
        let dxb = &mut dx[b * in_len..(b + 1) * in_len];
        for co in 0..g.cout {
            for oi in 0..g.oh {
                for oj in 0..g.ow {
                    let d = dyb[(co * g.oh + oi) * g.ow + oj];
                    if let Some(gb) = &mut grads.bias {
                        gb.data_mut()[co] += d;
                    }
                    if d == 0.0 {
                        continue;
                    }
                    let gw = grads.weight.data_mut();
                    for ci in 0..g.cin {
                        for ki in 0..g.k {
                            let Some(ii) = g.src(oi, ki, g.h) else { continue };
                            for kj in 0..g.k {
                                let Some(jj) = g.src(oj, kj, g.w) else { continue };
                                let widx = ((co * g.cin + ci) * g.k + ki) * g.k + kj;
                                let xidx = (ci * g.h + ii) * g.w + jj;
                                gw[widx] += d * xb[xidx];
                                dxb[xidx] += d * w[widx];
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}
