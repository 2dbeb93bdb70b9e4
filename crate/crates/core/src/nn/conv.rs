//! Same-length 1-D convolutions (stride 1) with ReLU.

use rand::Rng;

use super::param::{Module, Parameter};
use super::tensor::Tensor2D;
use crate::error::{Error, Result};

/// One convolution layer. The kernel is stored as `(width·in) × out`, row
/// `k·in + c` holding the weights for tap `k` (offset `k - (width-1)/2`)
/// and input channel `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub kernel: Parameter,
    pub bias: Parameter,
    pub width: usize,
    pub in_channels: usize,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        width: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_width(width)?;
        let fan_in = (width * in_channels).max(1);
        let bound = 1.0 / (fan_in as f64).sqrt();
        Ok(Self {
            kernel: Parameter::new(Tensor2D::uniform(width * in_channels, out_channels, bound, rng)),
            bias: Parameter::new(Tensor2D::uniform(1, out_channels, bound, rng)),
            width,
            in_channels,
        })
    }

    pub fn from_parts(kernel: Tensor2D, bias: Tensor2D, width: usize) -> Result<Self> {
        check_width(width)?;
        if kernel.rows() % width != 0 || bias.shape() != (1, kernel.cols()) {
            return Err(Error::shape("conv1d parts", kernel.shape(), bias.shape()));
        }
        Ok(Self {
            in_channels: kernel.rows() / width,
            kernel: Parameter::new(kernel),
            bias: Parameter::new(bias),
            width,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.value.cols()
    }

    fn pad(&self) -> isize {
        ((self.width - 1) / 2) as isize
    }

    /// Pre-activation output; rows whose mask is false are forced to zero.
    fn pre_activation(&self, x: &Tensor2D, mask: &[bool]) -> Tensor2D {
        let t_len = x.rows();
        let out_c = self.out_channels();
        let mut out = Tensor2D::zeros(t_len, out_c);
        let pad = self.pad();
        for t in 0..t_len {
            if !mask[t] {
                continue;
            }
            let o = out.row_mut(t);
            o.copy_from_slice(self.bias.value.row(0));
            for k in 0..self.width {
                let src = t as isize + k as isize - pad;
                if src < 0 || src >= t_len as isize || !mask[src as usize] {
                    continue;
                }
                let xr = x.row(src as usize);
                for (c, &xv) in xr.iter().enumerate() {
                    if xv == 0.0 {
                        continue;
                    }
                    let kr = self.kernel.value.row(k * self.in_channels + c);
                    o.iter_mut().zip(kr).for_each(|(o, w)| *o += xv * w);
                }
            }
        }
        out
    }

    fn backward_pre(&mut self, x: &Tensor2D, mask: &[bool], dpre: &Tensor2D) -> Tensor2D {
        let t_len = x.rows();
        let pad = self.pad();
        let mut dx = Tensor2D::zeros(t_len, self.in_channels);
        for t in 0..t_len {
            if !mask[t] {
                continue;
            }
            let d = dpre.row(t);
            self.bias
                .grad
                .row_mut(0)
                .iter_mut()
                .zip(d)
                .for_each(|(g, v)| *g += v);
            for k in 0..self.width {
                let src = t as isize + k as isize - pad;
                if src < 0 || src >= t_len as isize || !mask[src as usize] {
                    continue;
                }
                let src = src as usize;
                for c in 0..self.in_channels {
                    let row = k * self.in_channels + c;
                    let xv = x.get(src, c);
                    let kr = self.kernel.value.row(row);
                    let acc: f64 = kr.iter().zip(d).map(|(w, g)| w * g).sum();
                    dx.set(src, c, dx.get(src, c) + acc);
                    if xv != 0.0 {
                        self.kernel
                            .grad
                            .row_mut(row)
                            .iter_mut()
                            .zip(d)
                            .for_each(|(g, v)| *g += xv * v);
                    }
                }
            }
        }
        dx
    }
}

impl Module for Conv1d {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.kernel, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.kernel, &mut self.bias]
    }
}

fn check_width(width: usize) -> Result<()> {
    if width == 0 || width % 2 == 0 {
        return Err(Error::Config(format!(
            "convolution width must be odd, got {width}"
        )));
    }
    Ok(())
}

/// Stack of convolution + ReLU layers. Masked positions act like the
/// zero padding at the sequence ends, so padding never leaks into real steps.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvStack {
    pub layers: Vec<Conv1d>,
}

#[derive(Clone, Debug)]
pub struct ConvCache {
    inputs: Vec<Tensor2D>,
    pre_acts: Vec<Tensor2D>,
    mask: Vec<bool>,
}

impl ConvStack {
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        channels: usize,
        layers: usize,
        width: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if layers == 0 {
            return Err(Error::Config("convolution stack needs at least one layer".into()));
        }
        let layers = (0..layers)
            .map(|l| Conv1d::new(if l == 0 { input } else { channels }, channels, width, rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_channels
    }

    pub fn forward(&self, x: &Tensor2D, mask: &[bool]) -> Result<(Tensor2D, ConvCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                "conv1d input",
                x.shape(),
                self.layers[0].kernel.shape(),
            ));
        }
        if mask.len() != x.rows() {
            return Err(Error::shape("conv1d mask", x.shape(), (mask.len(), 1)));
        }
        let mut cache = ConvCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre_acts: Vec::with_capacity(self.layers.len()),
            mask: mask.to_vec(),
        };
        let mut h = x.clone();
        for layer in &self.layers {
            let pre = layer.pre_activation(&h, mask);
            let next = pre.map(|v| v.max(0.0));
            cache.inputs.push(h);
            cache.pre_acts.push(pre);
            h = next;
        }
        Ok((h, cache))
    }

    pub fn backward(&mut self, cache: &ConvCache, dy: &Tensor2D) -> Tensor2D {
        let mut grad = dy.clone();
        for i in (0..self.layers.len()).rev() {
            let pre = &cache.pre_acts[i];
            grad.data_mut()
                .iter_mut()
                .zip(pre.data())
                .for_each(|(g, &p)| {
                    if p <= 0.0 {
                        *g = 0.0
                    }
                });
            grad = self.layers[i].backward_pre(&cache.inputs[i], &cache.mask, &grad);
        }
        grad
    }
}

impl Module for ConvStack {
    fn params(&self) -> Vec<&Parameter> {
        self.layers.iter().flat_map(Module::params).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers.iter_mut().flat_map(Module::params_mut).collect()
    }
}

/// Builds a randomly initialised stack and applies it to all rows of `x`.
pub fn conv1d_stack<R: Rng + ?Sized>(
    x: &Tensor2D,
    layers: usize,
    width: usize,
    channels: usize,
    rng: &mut R,
) -> Result<Tensor2D> {
    let stack = ConvStack::new(x.cols(), channels, layers, width, rng)?;
    Ok(stack.forward(x, &vec![true; x.rows()])?.0)
}
