use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{active_rows, softmax_rows, Module, Parameter, Tensor2D};

/// Single-head scaled dot-product self-attention over the unmasked steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Attention {
    pub w_q: Parameter,
    pub w_k: Parameter,
    pub w_v: Parameter,
}

#[derive(Clone, Debug)]
pub struct AttentionCache {
    active: Vec<usize>,
    total: usize,
    h: Tensor2D,
    q: Tensor2D,
    k: Tensor2D,
    v: Tensor2D,
    weights: Tensor2D,
}

impl AttentionCache {
    /// Attention weights between real steps (rows sum to one).
    pub fn weights(&self) -> &Tensor2D {
        &self.weights
    }

    /// Positions in the padded sequence that the weight rows refer to.
    pub fn positions(&self) -> &[usize] {
        &self.active
    }
}

impl Attention {
    pub fn new<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut proj = || Parameter::new(Tensor2D::uniform(hidden, hidden, bound, rng));
        Self {
            w_q: proj(),
            w_k: proj(),
            w_v: proj(),
        }
    }

    pub fn from_parts(w_q: Tensor2D, w_k: Tensor2D, w_v: Tensor2D) -> Result<Self> {
        let h = w_q.rows();
        for (name, w) in [("query", &w_q), ("key", &w_k), ("value", &w_v)] {
            if w.shape() != (h, h) {
                return Err(Error::shape(name, w.shape(), (h, h)));
            }
        }
        Ok(Self {
            w_q: Parameter::new(w_q),
            w_k: Parameter::new(w_k),
            w_v: Parameter::new(w_v),
        })
    }

    pub fn hidden(&self) -> usize {
        self.w_q.value.rows()
    }

    pub fn forward(&self, h: &Tensor2D, mask: &[bool]) -> Result<(Tensor2D, AttentionCache)> {
        let dim = self.hidden();
        if h.cols() != dim {
            return Err(Error::shape("attention input", h.shape(), self.w_q.shape()));
        }
        if mask.len() != h.rows() {
            return Err(Error::shape("attention mask", h.shape(), (mask.len(), 1)));
        }
        let active = active_rows(mask);
        if active.is_empty() {
            return Err(Error::Contract("attention over a fully masked sequence".into()));
        }
        let ha = h.gather_rows(&active);
        let q = ha.mm(&self.w_q.value);
        let k = ha.mm(&self.w_k.value);
        let v = ha.mm(&self.w_v.value);
        let mut scores = q.mmt(&k);
        scores.scale(1.0 / (dim as f64).sqrt());
        let weights = softmax_rows(&scores, &vec![true; active.len()])?;
        let z = weights.mm(&v).scatter_rows(&active, h.rows());
        Ok((
            z,
            AttentionCache {
                active,
                total: h.rows(),
                h: ha,
                q,
                k,
                v,
                weights,
            },
        ))
    }

    /// Accumulates weight gradients and returns d(loss)/d(H).
    pub fn backward(&mut self, cache: &AttentionCache, dz: &Tensor2D) -> Tensor2D {
        let scale = 1.0 / (self.hidden() as f64).sqrt();
        let dz = dz.gather_rows(&cache.active);
        let a = &cache.weights;
        let da = dz.mmt(&cache.v);
        let dv = a.tmm(&dz);
        let mut ds = Tensor2D::zeros(a.rows(), a.cols());
        for r in 0..a.rows() {
            let ar = a.row(r);
            let dar = da.row(r);
            let dot: f64 = ar.iter().zip(dar).map(|(x, y)| x * y).sum();
            for ((o, &x), &y) in ds.row_mut(r).iter_mut().zip(ar).zip(dar) {
                *o = x * (y - dot) * scale;
            }
        }
        let dq = ds.mm(&cache.k);
        let dk = ds.tmm(&cache.q);
        self.w_q.grad.add_assign(&cache.h.tmm(&dq));
        self.w_k.grad.add_assign(&cache.h.tmm(&dk));
        self.w_v.grad.add_assign(&cache.h.tmm(&dv));
        let mut dh = dq.mmt(&self.w_q.value);
        dh.add_assign(&dk.mmt(&self.w_k.value));
        dh.add_assign(&dv.mmt(&self.w_v.value));
        dh.scatter_rows(&cache.active, cache.total)
    }
}

impl Module for Attention {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.w_q, &self.w_k, &self.w_v]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.w_q, &mut self.w_k, &mut self.w_v]
    }
}
