//! LSTM cell and the (multi-layer) bidirectional LSTM encoder.
//!
//! Gate pre-activations are laid out as `[input | forget | candidate | output]`,
//! each `hidden` wide.

use rand::Rng;

use super::layers::sigmoid;
use super::param::{Module, Parameter};
use super::tensor::{active_rows, Tensor2D};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmWeights {
    /// `d × 4k`
    pub w_x: Parameter,
    /// `k × 4k`
    pub w_h: Parameter,
    /// `1 × 4k`
    pub bias: Parameter,
}

impl LstmWeights {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound_x = 1.0 / (input.max(1) as f64).sqrt();
        let bound_h = 1.0 / (hidden.max(1) as f64).sqrt();
        Self {
            w_x: Parameter::new(Tensor2D::uniform(input, 4 * hidden, bound_x, rng)),
            w_h: Parameter::new(Tensor2D::uniform(hidden, 4 * hidden, bound_h, rng)),
            bias: Parameter::new(Tensor2D::uniform(1, 4 * hidden, bound_h, rng)),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Parameter::new(Tensor2D::zeros(input, 4 * hidden)),
            w_h: Parameter::new(Tensor2D::zeros(hidden, 4 * hidden)),
            bias: Parameter::new(Tensor2D::zeros(1, 4 * hidden)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.value.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.value.rows()
    }
}

impl Module for LstmWeights {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.w_x, &self.w_h, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.bias]
    }
}

/// Activations of one cell step needed by the backward pass.
#[derive(Clone, Debug)]
pub struct LstmStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// post-nonlinearity gates `[i | f | g | o]`
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// One LSTM step. Returns `(h, c)` and the step cache.
pub fn lstm_cell(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    w: &LstmWeights,
) -> Result<(Vec<f64>, Vec<f64>, LstmStep)> {
    let k = w.hidden_dim();
    if x.len() != w.input_dim() {
        return Err(Error::shape("lstm_cell input", (1, x.len()), w.w_x.shape()));
    }
    if h_prev.len() != k || c_prev.len() != k {
        return Err(Error::shape("lstm_cell state", (1, h_prev.len()), w.w_h.shape()));
    }
    let mut a = w.bias.value.row(0).to_vec();
    accumulate_vec_mat(&mut a, x, &w.w_x.value);
    accumulate_vec_mat(&mut a, h_prev, &w.w_h.value);
    for j in 0..k {
        a[j] = sigmoid(a[j]);
        a[k + j] = sigmoid(a[k + j]);
        a[2 * k + j] = a[2 * k + j].tanh();
        a[3 * k + j] = sigmoid(a[3 * k + j]);
    }
    let mut c = vec![0.0; k];
    let mut h = vec![0.0; k];
    let mut tanh_c = vec![0.0; k];
    for j in 0..k {
        c[j] = a[k + j] * c_prev[j] + a[j] * a[2 * k + j];
        tanh_c[j] = c[j].tanh();
        h[j] = a[3 * k + j] * tanh_c[j];
    }
    let step = LstmStep {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates: a,
        tanh_c,
    };
    Ok((h, c, step))
}

/// Backward through one step. `dh`/`dc` are the total upstream gradients of
/// this step's outputs. Returns `(dx, dh_prev, dc_prev)`.
pub fn lstm_cell_backward(
    step: &LstmStep,
    dh: &[f64],
    dc: &[f64],
    w: &mut LstmWeights,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k = w.hidden_dim();
    let g = &step.gates;
    let mut da = vec![0.0; 4 * k];
    let mut dc_prev = vec![0.0; k];
    for j in 0..k {
        let (i, f, cand, o) = (g[j], g[k + j], g[2 * k + j], g[3 * k + j]);
        let tc = step.tanh_c[j];
        let d_o = dh[j] * tc;
        let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
        let d_i = dct * cand;
        let d_g = dct * i;
        let d_f = dct * step.c_prev[j];
        dc_prev[j] = dct * f;
        da[j] = d_i * i * (1.0 - i);
        da[k + j] = d_f * f * (1.0 - f);
        da[2 * k + j] = d_g * (1.0 - cand * cand);
        da[3 * k + j] = d_o * o * (1.0 - o);
    }
    outer_accumulate(&mut w.w_x.grad, &step.x, &da);
    outer_accumulate(&mut w.w_h.grad, &step.h_prev, &da);
    w.bias
        .grad
        .row_mut(0)
        .iter_mut()
        .zip(&da)
        .for_each(|(b, d)| *b += d);
    let dx = mat_vec_t(&w.w_x.value, &da);
    let dh_prev = mat_vec_t(&w.w_h.value, &da);
    (dx, dh_prev, dc_prev)
}

fn accumulate_vec_mat(out: &mut [f64], v: &[f64], m: &Tensor2D) {
    for (r, &s) in v.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        out.iter_mut().zip(m.row(r)).for_each(|(o, w)| *o += s * w);
    }
}

fn outer_accumulate(grad: &mut Tensor2D, left: &[f64], right: &[f64]) {
    for (r, &l) in left.iter().enumerate() {
        if l == 0.0 {
            continue;
        }
        grad.row_mut(r)
            .iter_mut()
            .zip(right)
            .for_each(|(g, &d)| *g += l * d);
    }
}

/// `m · v` where `m` is `rows × len(v)`.
fn mat_vec_t(m: &Tensor2D, v: &[f64]) -> Vec<f64> {
    (0..m.rows())
        .map(|r| m.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Runs one direction over the rows of `x` (in order). Zero initial state.
fn run_direction(x: &Tensor2D, w: &LstmWeights) -> Result<(Tensor2D, Vec<LstmStep>)> {
    let k = w.hidden_dim();
    let mut h = vec![0.0; k];
    let mut c = vec![0.0; k];
    let mut out = Tensor2D::zeros(x.rows(), k);
    let mut steps = Vec::with_capacity(x.rows());
    for t in 0..x.rows() {
        let (h2, c2, step) = lstm_cell(x.row(t), &h, &c, w)?;
        out.row_mut(t).copy_from_slice(&h2);
        h = h2;
        c = c2;
        steps.push(step);
    }
    Ok((out, steps))
}

fn backward_direction(steps: &[LstmStep], dout: &Tensor2D, w: &mut LstmWeights) -> Tensor2D {
    let k = w.hidden_dim();
    let d = w.input_dim();
    let mut dx = Tensor2D::zeros(steps.len(), d);
    let mut dh_next = vec![0.0; k];
    let mut dc_next = vec![0.0; k];
    for t in (0..steps.len()).rev() {
        let dh: Vec<f64> = dout
            .row(t)
            .iter()
            .zip(&dh_next)
            .map(|(a, b)| a + b)
            .collect();
        let (dxt, dhp, dcp) = lstm_cell_backward(&steps[t], &dh, &dc_next, w);
        dx.row_mut(t).copy_from_slice(&dxt);
        dh_next = dhp;
        dc_next = dcp;
    }
    dx
}

fn reversed(x: &Tensor2D) -> Tensor2D {
    let idx: Vec<usize> = (0..x.rows()).rev().collect();
    x.gather_rows(&idx)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiLstmLayer {
    pub forward: LstmWeights,
    pub backward: LstmWeights,
}

/// Stacked bidirectional LSTM. Each direction has `hidden / 2` units so the
/// output is `T × hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm {
    pub layers: Vec<BiLstmLayer>,
}

#[derive(Clone, Debug)]
pub struct BiLstmCache {
    active: Vec<usize>,
    total_rows: usize,
    layers: Vec<(Vec<LstmStep>, Vec<LstmStep>)>,
}

impl BiLstm {
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        hidden: usize,
        layers: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if hidden == 0 || hidden % 2 != 0 {
            return Err(Error::Config(format!(
                "bidirectional LSTM hidden size must be even and positive, got {hidden}"
            )));
        }
        if !(1..=2).contains(&layers) {
            return Err(Error::Config(format!(
                "bidirectional LSTM supports 1 or 2 layers, got {layers}"
            )));
        }
        let half = hidden / 2;
        let layers = (0..layers)
            .map(|l| {
                let d = if l == 0 { input } else { hidden };
                BiLstmLayer {
                    forward: LstmWeights::new(d, half, rng),
                    backward: LstmWeights::new(d, half, rng),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].forward.input_dim()
    }

    pub fn hidden(&self) -> usize {
        2 * self.layers[0].forward.hidden_dim()
    }

    /// Encodes the unmasked rows of `x` in order; masked rows of the output are zero.
    pub fn forward(&self, x: &Tensor2D, mask: &[bool]) -> Result<(Tensor2D, BiLstmCache)> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                "bilstm input",
                x.shape(),
                self.layers[0].forward.w_x.shape(),
            ));
        }
        if mask.len() != x.rows() {
            return Err(Error::shape("bilstm mask", x.shape(), (mask.len(), 1)));
        }
        let active = active_rows(mask);
        let half = self.hidden() / 2;
        let mut cur = x.gather_rows(&active);
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (hf, sf) = run_direction(&cur, &layer.forward)?;
            let (hb_rev, sb) = run_direction(&reversed(&cur), &layer.backward)?;
            let hb = reversed(&hb_rev);
            let mut out = Tensor2D::zeros(cur.rows(), 2 * half);
            for t in 0..cur.rows() {
                let row = out.row_mut(t);
                row[..half].copy_from_slice(hf.row(t));
                row[half..].copy_from_slice(hb.row(t));
            }
            caches.push((sf, sb));
            cur = out;
        }
        let h = cur.scatter_rows(&active, x.rows());
        Ok((
            h,
            BiLstmCache {
                active,
                total_rows: x.rows(),
                layers: caches,
            },
        ))
    }

    pub fn backward(&mut self, cache: &BiLstmCache, dh: &Tensor2D) -> Tensor2D {
        let half = self.hidden() / 2;
        let mut grad = dh.gather_rows(&cache.active);
        for (layer, (sf, sb)) in self.layers.iter_mut().zip(&cache.layers).rev() {
            let n = grad.rows();
            let mut dfwd = Tensor2D::zeros(n, half);
            let mut dbwd = Tensor2D::zeros(n, half);
            for t in 0..n {
                dfwd.row_mut(t).copy_from_slice(&grad.row(t)[..half]);
                dbwd.row_mut(t).copy_from_slice(&grad.row(t)[half..]);
            }
            let mut dx = backward_direction(sf, &dfwd, &mut layer.forward);
            let dx_b = reversed(&backward_direction(sb, &reversed(&dbwd), &mut layer.backward));
            dx.add_assign(&dx_b);
            grad = dx;
        }
        grad.scatter_rows(&cache.active, cache.total_rows)
    }
}

impl Module for BiLstm {
    fn params(&self) -> Vec<&Parameter> {
        self.layers
            .iter()
            .flat_map(|l| l.forward.params().into_iter().chain(l.backward.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                l.forward
                    .params_mut()
                    .into_iter()
                    .chain(l.backward.params_mut())
            })
            .collect()
    }
}

/// Free-function form of [`BiLstm::new`] + [`BiLstm::forward`] for one-off use.
pub fn bilstm_encode<R: Rng + ?Sized>(
    x: &Tensor2D,
    mask: &[bool],
    layers: usize,
    hidden: usize,
    rng: &mut R,
) -> Result<Tensor2D> {
    let net = BiLstm::new(x.cols(), hidden, layers, rng)?;
    Ok(net.forward(x, mask)?.0)
}
