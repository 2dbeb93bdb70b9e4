use super::tensor::Tensor2D;

/// A trainable tensor together with its gradient accumulator and Adam state.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub value: Tensor2D,
    pub grad: Tensor2D,
    pub adam_m: Tensor2D,
    pub adam_v: Tensor2D,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(value: Tensor2D) -> Self {
        let (r, c) = value.shape();
        Self {
            value,
            grad: Tensor2D::zeros(r, c),
            adam_m: Tensor2D::zeros(r, c),
            adam_v: Tensor2D::zeros(r, c),
            step_count: 0,
        }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything that owns trainable parameters.
///
/// The order of the returned parameters is stable for a given configuration;
/// checkpoints rely on it.
pub trait Module {
    fn params(&self) -> Vec<&Parameter>;
    fn params_mut(&mut self) -> Vec<&mut Parameter>;

    fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(Parameter::zero_grad);
    }

    fn num_weights(&self) -> usize {
        self.params().iter().map(|p| p.value.data().len()).sum()
    }
}
