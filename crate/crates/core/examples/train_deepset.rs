//! Train a DeepSet classifier on synthetic data and score a held-out split.

use std::error::Error;

use ties::data::{generate_synthetic, SynthConfig};
use ties::model::{assemble_dataset, model_init, ActionVocab, EncoderKind, EntityTables, FeatureSpec, ModelConfig};
use ties::train::{pr_auc, split, train_with, SplitSpec, TrainConfig};

/// Held-out PR-AUC.
pub fn run_example() -> Result<f64, Box<dyn Error>> {
    let data = generate_synthetic(&SynthConfig {
        n_normal: 400,
        n_bad: 100,
        ..SynthConfig::default()
    })?;
    let vocab = ActionVocab::from_actions(data.action_names.iter().map(String::as_str));
    let entities = EntityTables::new(data.sources.clone(), data.targets.clone());

    let mut config = ModelConfig::new(EncoderKind::DeepSet, FeatureSpec::new(16, 16, 16));
    config.hidden = 32;
    config.max_len = 64;
    let (examples, warnings) = assemble_dataset(&data.dataset, &entities, &vocab, &config.spec, config.max_len)?;
    println!("{} sequences, {} unknown entities", examples.len(), warnings.total());

    let (train_a, train_b, test) = split(&examples, &SplitSpec::new([0.7, 0.1, 0.2], 1))?;
    let train_set = [train_a, train_b].concat();
    let mut model = model_init(config, vocab, entities, 0)?;
    let cfg = TrainConfig::default();
    train_with(&mut model, &train_set, &cfg, |s| {
        println!("epoch {}  loss {:.4}  train PR-AUC {:.4}", s.epoch, s.loss, s.train_pr_auc.unwrap_or(f64::NAN));
    })?;

    let scores: Vec<f64> = model.score_all(&test)?.iter().map(|o| o.score).collect();
    let labels: Vec<u8> = test.iter().map(|e| e.label.unwrap_or(0)).collect();
    let ap = pr_auc(&scores, &labels)?;
    println!("held-out PR-AUC {ap:.4} on {} sequences", test.len());
    Ok(ap)
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
