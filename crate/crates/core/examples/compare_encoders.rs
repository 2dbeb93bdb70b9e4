//! Train the RNN, CNN and DeepSet encoders on one split and compare them.

use std::error::Error;

use ties::data::{generate_synthetic, SynthConfig};
use ties::model::{assemble_dataset, model_init, ActionVocab, EncoderKind, EntityTables, FeatureSpec, ModelConfig};
use ties::train::{pr_auc, split, train, SplitSpec, TrainConfig};

pub fn run_example() -> Result<Vec<(EncoderKind, f64)>, Box<dyn Error>> {
    let data = generate_synthetic(&SynthConfig {
        n_normal: 300,
        n_bad: 100,
        mean_seq_len: 20,
        embedding_overlap: 0.8,
        seed: 3,
        ..SynthConfig::default()
    })?;
    let vocab = ActionVocab::from_actions(data.action_names.iter().map(String::as_str));
    let entities = EntityTables::new(data.sources.clone(), data.targets.clone());
    let spec = FeatureSpec::new(16, 16, 8);
    let (examples, _) = assemble_dataset(&data.dataset, &entities, &vocab, &spec, 32)?;
    let (a, b, test) = split(&examples, &SplitSpec::new([0.6, 0.2, 0.2], 0))?;
    let train_set = [a, b].concat();
    let labels: Vec<u8> = test.iter().map(|e| e.label.unwrap_or(0)).collect();

    let mut results = Vec::new();
    for kind in EncoderKind::ALL {
        let mut config = ModelConfig::new(kind, spec.clone());
        config.hidden = 16;
        config.max_len = 32;
        config.head_hidden = 16;
        config.deepset_hidden = 16;
        let mut model = model_init(config, vocab.clone(), entities.clone(), 0)?;
        let cfg = TrainConfig {
            epochs: 5,
            track_pr_auc: false,
            ..TrainConfig::default()
        };
        let report = train(&mut model, &train_set, &cfg)?;
        let scores: Vec<f64> = model.score_all(&test)?.iter().map(|o| o.score).collect();
        let ap = pr_auc(&scores, &labels)?;
        println!(
            "{:<8} final loss {:.4}  test PR-AUC {ap:.4}",
            kind.display_name(),
            report.loss_curve().last().copied().unwrap_or(f64::NAN)
        );
        results.push((kind, ap));
    }
    Ok(results)
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
