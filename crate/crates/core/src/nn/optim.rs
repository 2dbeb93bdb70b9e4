//! Gradient clipping and the Adam update.

use super::param::Parameter;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.0005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

/// Global L2 norm over every gradient entry.
pub fn global_grad_norm<'a>(params: impl IntoIterator<Item = &'a Parameter>) -> f64 {
    params
        .into_iter()
        .map(|p| p.grad.sum_squares())
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients so their global norm is at most `max_norm`.
/// Returns the norm measured before clipping.
pub fn clip_gradients(params: &mut [&mut Parameter], max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = global_grad_norm(params.iter().map(|p| &**p));
    if norm > max_norm {
        let k = max_norm / norm;
        for p in params.iter_mut() {
            p.grad.scale(k);
        }
    }
    norm
}

/// One bias-corrected Adam update; clears the gradient afterwards.
///
/// A parameter whose gradient is identically zero is left untouched
/// (value, moments and step count), so parameters that did not take part in
/// a batch keep their state.
pub fn adam_step(param: &mut Parameter, cfg: &AdamConfig) {
    if param.grad.data().iter().all(|&g| g == 0.0) {
        return;
    }
    param.step_count += 1;
    let t = param.step_count as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let Parameter {
        value,
        grad,
        adam_m,
        adam_v,
        ..
    } = param;
    let it = value
        .data_mut()
        .iter_mut()
        .zip(grad.data_mut().iter_mut())
        .zip(adam_m.data_mut().iter_mut().zip(adam_v.data_mut().iter_mut()));
    for ((w, g), (m, v)) in it {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * *g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * *g * *g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        *g = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor2D;

    fn param_with_grad(value: &[f64], grad: &[f64]) -> Parameter {
        let mut p = Parameter::new(Tensor2D::row_vector(value));
        p.grad = Tensor2D::row_vector(grad);
        p
    }

    #[test]
    fn clip_scales_down_and_returns_pre_norm() {
        let mut p = param_with_grad(&[0.0, 0.0], &[2.0, 0.0]);
        let n = clip_gradients(&mut [&mut p], 1.0);
        assert_eq!(n, 2.0);
        assert_eq!(p.grad.data(), &[1.0, 0.0]);
    }

    #[test]
    fn clip_leaves_small_norm_alone() {
        let mut p = param_with_grad(&[0.0, 0.0], &[0.3, 0.4]);
        let n = clip_gradients(&mut [&mut p], 1.0);
        assert!((n - 0.5).abs() < 1e-15);
        assert_eq!(p.grad.data(), &[0.3, 0.4]);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let cfg = AdamConfig::with_lr(0.0005);
        for g in [1e-3, -0.02, 3.0, -250.0] {
            let mut p = param_with_grad(&[1.0], &[g]);
            adam_step(&mut p, &cfg);
            let update = 1.0 - p.value.data()[0];
            // closed form: lr * g / (|g| + eps)
            let expected = cfg.lr * g / (g.abs() + cfg.eps);
            assert!((update - expected).abs() < 1e-15);
            assert!((update.abs() - cfg.lr).abs() <= 1e-3 * cfg.lr);
            assert_eq!(p.grad.data(), &[0.0]);
            assert_eq!(p.step_count, 1);
        }
    }

    #[test]
    fn adam_zero_grad_is_noop_even_with_momentum() {
        let cfg = AdamConfig::default();
        let mut p = param_with_grad(&[0.5, -0.5], &[1.0, 2.0]);
        adam_step(&mut p, &cfg);
        let before = p.clone();
        adam_step(&mut p, &cfg);
        assert_eq!(p, before);
    }

    #[test]
    fn adam_is_deterministic() {
        let cfg = AdamConfig::default();
        let mut a = param_with_grad(&[0.1, 0.2, 0.3], &[0.7, -1.1, 0.01]);
        let mut b = a.clone();
        for _ in 0..3 {
            a.grad = Tensor2D::row_vector(&[0.7, -1.1, 0.01]);
            b.grad = Tensor2D::row_vector(&[0.7, -1.1, 0.01]);
            adam_step(&mut a, &cfg);
            adam_step(&mut b, &cfg);
        }
        assert_eq!(a, b);
    }
}
