//! Finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::param::Module;

/// A scalar function of a module's parameters with an analytic gradient.
pub trait Objective: Module {
    /// Loss at the current parameter values.
    fn loss(&self) -> f64;

    /// Loss at the current values; adds d(loss)/d(param) into every `grad`.
    fn loss_and_grad(&mut self) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    /// central-difference step
    pub step: f64,
    pub rel_tol: f64,
    /// entries probed per parameter (all entries when the parameter is smaller)
    pub samples: usize,
    /// lower bound on the relative-error denominator, so entries with a
    /// vanishing gradient are judged on absolute error
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            rel_tol: 1e-4,
            samples: 8,
            abs_floor: 1e-3,
            seed: 0,
        }
    }
}

impl GradCheckConfig {
    pub fn new(step: f64, rel_tol: f64) -> Self {
        assert!(step > 0.0 && rel_tol > 0.0);
        Self {
            step,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn passes(&self, max_rel_error: f64) -> bool {
        max_rel_error < self.rel_tol
    }
}

/// Worst disagreement found by [`grad_check_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub worst_entry: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub probes: usize,
}

/// Returns the maximum relative error between analytic and central-difference
/// gradients over the sampled entries.
pub fn grad_check<O: Objective + ?Sized>(fragment: &mut O, cfg: &GradCheckConfig) -> f64 {
    grad_check_report(fragment, cfg).max_rel_error
}

pub fn grad_check_report<O: Objective + ?Sized>(
    fragment: &mut O,
    cfg: &GradCheckConfig,
) -> GradCheckReport {
    fragment.zero_grad();
    fragment.loss_and_grad();
    let analytic: Vec<Vec<f64>> = fragment
        .params()
        .iter()
        .map(|p| p.grad.data().to_vec())
        .collect();
    fragment.zero_grad();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: 0,
        worst_entry: 0,
        analytic: 0.0,
        numeric: 0.0,
        probes: 0,
    };
    for (pi, grads) in analytic.iter().enumerate() {
        let n = grads.len();
        let entries: Vec<usize> = if n <= cfg.samples {
            (0..n).collect()
        } else {
            sample(&mut rng, n, cfg.samples).into_vec()
        };
        for j in entries {
            let original = fragment.params()[pi].value.data()[j];
            fragment.params_mut()[pi].value.data_mut()[j] = original + cfg.step;
            let plus = fragment.loss();
            fragment.params_mut()[pi].value.data_mut()[j] = original - cfg.step;
            let minus = fragment.loss();
            fragment.params_mut()[pi].value.data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = grads[j];
            let denom = a.abs().max(numeric.abs()).max(cfg.abs_floor);
            let err = (a - numeric).abs() / denom;
            report.probes += 1;
            if err > report.max_rel_error || !err.is_finite() {
                report = GradCheckReport {
                    max_rel_error: if err.is_finite() { err } else { f64::INFINITY },
                    worst_param: pi,
                    worst_entry: j,
                    analytic: a,
                    numeric,
                    probes: report.probes,
                };
            }
        }
    }
    report
}
