//! Dense layers, activations, dropout and the weighted BCE loss.

use rand::Rng;

use super::param::{Module, Parameter};
use super::tensor::Tensor2D;
use crate::error::{Error, Result};

pub const PROB_CLAMP: f64 = 1e-7;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu(x: &Tensor2D) -> Tensor2D {
    x.map(|v| v.max(0.0))
}

/// `x·W + bias`, bias broadcast over rows.
pub fn affine(x: &Tensor2D, weight: &Parameter, bias: &Parameter) -> Result<Tensor2D> {
    let w = &weight.value;
    if x.cols() != w.rows() {
        return Err(Error::shape("affine", x.shape(), w.shape()));
    }
    if bias.shape() != (1, w.cols()) {
        return Err(Error::shape("affine bias", w.shape(), bias.shape()));
    }
    let mut out = x.mm(w);
    let b = bias.value.row(0);
    for r in 0..out.rows() {
        out.row_mut(r).iter_mut().zip(b).for_each(|(o, b)| *o += b);
    }
    Ok(out)
}

/// Backward of [`affine`]: accumulates into `weight.grad` / `bias.grad` and
/// returns the gradient with respect to `x`.
pub fn affine_backward(
    x: &Tensor2D,
    dy: &Tensor2D,
    weight: &mut Parameter,
    bias: &mut Parameter,
) -> Tensor2D {
    weight.grad.add_assign(&x.tmm(dy));
    let bg = bias.grad.row_mut(0);
    for r in 0..dy.rows() {
        bg.iter_mut().zip(dy.row(r)).for_each(|(g, d)| *g += d);
    }
    dy.mmt(&weight.value)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Linear {
    /// Weights and bias uniform in `±1/√fan_in`.
    pub fn new<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Self {
            weight: Parameter::new(Tensor2D::uniform(fan_in, fan_out, bound, rng)),
            bias: Parameter::new(Tensor2D::uniform(1, fan_out, bound, rng)),
        }
    }

    pub fn from_parts(weight: Tensor2D, bias: Tensor2D) -> Result<Self> {
        if bias.shape() != (1, weight.cols()) {
            return Err(Error::shape("linear bias", weight.shape(), bias.shape()));
        }
        Ok(Self {
            weight: Parameter::new(weight),
            bias: Parameter::new(bias),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn forward(&self, x: &Tensor2D) -> Result<Tensor2D> {
        affine(x, &self.weight, &self.bias)
    }

    pub fn backward(&mut self, x: &Tensor2D, dy: &Tensor2D) -> Tensor2D {
        affine_backward(x, dy, &mut self.weight, &mut self.bias)
    }
}

impl Module for Linear {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Chain of affine layers with ReLU between them; the last layer is linear.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Inputs seen by every layer during a forward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    inputs: Vec<Tensor2D>,
    pre_acts: Vec<Tensor2D>,
}

impl Mlp {
    /// `sizes = [in, hidden.., out]`; needs at least two entries.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config(format!(
                "mlp needs at least input and output sizes, got {sizes:?}"
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config(format!("mlp sizes must be positive: {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|w| Linear::new(w[0], w[1], rng))
            .collect();
        Ok(Self { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn forward(&self, x: &Tensor2D) -> Result<(Tensor2D, MlpCache)> {
        let mut cache = MlpCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre_acts: Vec::with_capacity(self.layers.len()),
        };
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let pre = layer.forward(&h)?;
            let next = if i == last { pre.clone() } else { relu(&pre) };
            cache.inputs.push(h);
            cache.pre_acts.push(pre);
            h = next;
        }
        Ok((h, cache))
    }

    pub fn backward(&mut self, cache: &MlpCache, dy: &Tensor2D) -> Tensor2D {
        let last = self.layers.len() - 1;
        let mut grad = dy.clone();
        for i in (0..self.layers.len()).rev() {
            if i != last {
                let pre = &cache.pre_acts[i];
                grad.data_mut()
                    .iter_mut()
                    .zip(pre.data())
                    .for_each(|(g, &p)| {
                        if p <= 0.0 {
                            *g = 0.0
                        }
                    });
            }
            grad = self.layers[i].backward(&cache.inputs[i], &grad);
        }
        grad
    }
}

impl Module for Mlp {
    fn params(&self) -> Vec<&Parameter> {
        self.layers.iter().flat_map(Module::params).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers.iter_mut().flat_map(Module::params_mut).collect()
    }
}

/// Row-wise softmax restricted to columns whose `col_mask` entry is true.
/// Masked columns receive exactly zero weight.
pub fn softmax_rows(scores: &Tensor2D, col_mask: &[bool]) -> Result<Tensor2D> {
    if col_mask.len() != scores.cols() {
        return Err(Error::shape(
            "softmax_rows mask",
            scores.shape(),
            (1, col_mask.len()),
        ));
    }
    if !col_mask.iter().any(|&m| m) {
        return Err(Error::Contract("softmax over a fully masked row".into()));
    }
    let mut out = Tensor2D::zeros(scores.rows(), scores.cols());
    for r in 0..scores.rows() {
        let row = scores.row(r);
        let max = row
            .iter()
            .zip(col_mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        let o = out.row_mut(r);
        let mut total = 0.0;
        for ((o, &s), &m) in o.iter_mut().zip(row).zip(col_mask) {
            if m {
                *o = (s - max).exp();
                total += *o;
            }
        }
        o.iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}

/// Inverted dropout. Returns the output and, when training with `p > 0`,
/// the per-entry scale applied (0 or `1/(1-p)`) for use in the backward pass.
pub fn dropout<R: Rng + ?Sized>(
    x: &Tensor2D,
    p: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Tensor2D, Option<Tensor2D>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("dropout probability {p} not in [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 / (1.0 - p);
    let scale = Tensor2D::from_vec(
        x.rows(),
        x.cols(),
        (0..x.rows() * x.cols())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect(),
    )?;
    Ok((x.hadamard(&scale), Some(scale)))
}

/// Binary cross-entropy with a weight on the positive class.
pub fn weighted_bce(p: f64, label: u8, pos_weight: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    if label == 1 {
        -pos_weight * p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// d(weighted_bce(sigmoid(logit)))/d(logit).
pub fn weighted_bce_logit_grad(logit: f64, label: u8, pos_weight: f64) -> f64 {
    let p = sigmoid(logit);
    if label == 1 {
        pos_weight * (p - 1.0)
    } else {
        p
    }
}
