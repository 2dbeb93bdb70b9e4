use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{adam_step, sigmoid, AdamConfig, Parameter, Tensor2D};

pub const HYBRID_MAX_ITERS: usize = 10_000;
pub const HYBRID_GRAD_TOL: f64 = 1e-6;
const HYBRID_LR: f64 = 0.05;

/// Two-feature logistic regression over a TIES score and a baseline score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridFit {
    /// weights on the standardised features
    pub w_ties: f64,
    pub w_baseline: f64,
    pub bias: f64,
    pub mean: [f64; 2],
    pub std: [f64; 2],
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

impl HybridFit {
    pub fn logit(&self, ties: f64, baseline: f64) -> f64 {
        let a = (ties - self.mean[0]) / self.std[0];
        let b = (baseline - self.mean[1]) / self.std[1];
        self.w_ties * a + self.w_baseline * b + self.bias
    }

    pub fn score(&self, ties: f64, baseline: f64) -> f64 {
        sigmoid(self.logit(ties, baseline))
    }

    /// `(w1, w2, b)` on the raw, unstandardised features.
    pub fn raw_weights(&self) -> (f64, f64, f64) {
        let w1 = self.w_ties / self.std[0];
        let w2 = self.w_baseline / self.std[1];
        (w1, w2, self.bias - w1 * self.mean[0] - w2 * self.mean[1])
    }
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

/// Fits the hybrid by full-batch Adam on the mean log loss until the
/// gradient norm drops below [`HYBRID_GRAD_TOL`] or [`HYBRID_MAX_ITERS`]
/// iterations pass. Non-convergence is reported in the result.
pub fn train_hybrid(ties: &[f64], baseline: &[f64], labels: &[u8]) -> Result<HybridFit> {
    if ties.len() != baseline.len() || ties.len() != labels.len() {
        return Err(Error::Data(format!(
            "hybrid inputs differ in length: {} / {} / {}",
            ties.len(),
            baseline.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::Data("hybrid fit needs both classes".into()));
    }
    if ties.iter().chain(baseline).any(|v| !v.is_finite()) {
        return Err(Error::Data("hybrid inputs must be finite".into()));
    }
    let (m0, s0) = moments(ties);
    let (m1, s1) = moments(baseline);
    let feats: Vec<[f64; 2]> = ties
        .iter()
        .zip(baseline)
        .map(|(a, b)| [(a - m0) / s0, (b - m1) / s1])
        .collect();
    let n = feats.len() as f64;
    let mut w = Parameter::new(Tensor2D::zeros(1, 3));
    let adam = AdamConfig::with_lr(HYBRID_LR);
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < HYBRID_MAX_ITERS {
        let v = w.value.data();
        let mut g = [0.0; 3];
        for (x, &l) in feats.iter().zip(labels) {
            let err = sigmoid(v[0] * x[0] + v[1] * x[1] + v[2]) - f64::from(l);
            g[0] += err * x[0] / n;
            g[1] += err * x[1] / n;
            g[2] += err / n;
        }
        grad_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if grad_norm < HYBRID_GRAD_TOL {
            break;
        }
        w.grad.data_mut().copy_from_slice(&g);
        adam_step(&mut w, &adam);
        iterations += 1;
    }
    let v = w.value.data();
    Ok(HybridFit {
        w_ties: v[0],
        w_baseline: v[1],
        bias: v[2],
        mean: [m0, m1],
        std: [s0, s1],
        iterations,
        grad_norm,
        converged: grad_norm < HYBRID_GRAD_TOL,
    })
}
