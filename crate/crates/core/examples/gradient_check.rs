//! Compare analytic and finite-difference gradients of the full classifier.

use std::error::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ties::model::{model_init, ActionVocab, EncoderKind, EntityTables, FeatureSpec, ModelConfig, SequenceExample, TiesModel};
use ties::nn::{grad_check_report, sigmoid, weighted_bce, weighted_bce_logit_grad, GradCheckConfig, Module, Objective, Parameter, Tensor2D};

struct Loss {
    model: TiesModel,
    example: SequenceExample,
}

impl Module for Loss {
    fn params(&self) -> Vec<&Parameter> {
        self.model.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.model.params_mut()
    }
}

impl Objective for Loss {
    fn loss(&self) -> f64 {
        weighted_bce(self.model.score(&self.example).unwrap().score, 1, 1.0)
    }
    fn loss_and_grad(&mut self) -> f64 {
        let (out, cache) = self.model.forward(&self.example, false, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        self.model.backward(&self.example, &cache, weighted_bce_logit_grad(out.logit, 1, 1.0));
        weighted_bce(sigmoid(out.logit), 1, 1.0)
    }
}

/// Worst relative error per encoder.
pub fn run_example() -> Result<Vec<(EncoderKind, f64)>, Box<dyn Error>> {
    let spec = FeatureSpec::new(3, 3, 2);
    let vocab = ActionVocab::from_actions(["view", "like", "report"]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let steps = 5;
    let mut features = Tensor2D::uniform(steps, spec.input_dim(), 1.0, &mut rng);
    for r in 0..steps {
        features.row_mut(r)[spec.action_offset()..spec.delta_offset()].fill(0.0);
    }
    features.row_mut(0).fill(0.0);
    let example = SequenceExample {
        features,
        actions: (0..steps).map(|r| if r == 0 { 0 } else { rng.random_range(1..4) }).collect(),
        mask: (0..steps).map(|r| r > 0).collect(),
        label: Some(1),
        source_id: "demo".into(),
    };

    let mut out = Vec::new();
    for kind in EncoderKind::ALL {
        let mut config = ModelConfig::new(kind, spec.clone());
        config.hidden = 4;
        config.head_hidden = 4;
        config.deepset_hidden = 4;
        config.cnn_width = 3;
        let model = model_init(config, vocab.clone(), EntityTables::empty(3, 3), 1)?;
        let mut loss = Loss { model, example: example.clone() };
        let cfg = GradCheckConfig { samples: 32, ..GradCheckConfig::default() };
        let report = grad_check_report(&mut loss, &cfg);
        println!(
            "{:<8} max relative error {:.2e} over {} entries ({})",
            kind.display_name(),
            report.max_rel_error,
            report.probes,
            if cfg.passes(report.max_rel_error) { "ok" } else { "FAILED" }
        );
        out.push((kind, report.max_rel_error));
    }
    Ok(out)
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
