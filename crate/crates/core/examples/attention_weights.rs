//! Inspect which steps of a suspicious sequence the attention layer focuses on.

use std::error::Error;

use ties::data::{generate_synthetic, SynthConfig};
use ties::model::{assemble_dataset, model_init, ActionVocab, EncoderKind, EntityTables, FeatureSpec, ModelConfig};
use ties::train::{train, TrainConfig};

/// Attention matrix of the highest-scoring sequence: `(source, positions, weights)`.
pub fn run_example() -> Result<(String, Vec<usize>, Vec<Vec<f64>>), Box<dyn Error>> {
    let data = generate_synthetic(&SynthConfig {
        n_normal: 150,
        n_bad: 50,
        mean_seq_len: 8,
        seed: 5,
        ..SynthConfig::default()
    })?;
    let vocab = ActionVocab::from_actions(data.action_names.iter().map(String::as_str));
    let entities = EntityTables::new(data.sources.clone(), data.targets.clone());
    let mut config = ModelConfig::new(EncoderKind::Rnn, FeatureSpec::new(16, 16, 8));
    config.hidden = 16;
    config.max_len = 12;
    config.head_hidden = 16;
    let (examples, _) = assemble_dataset(&data.dataset, &entities, &vocab, &config.spec, config.max_len)?;
    let mut model = model_init(config, vocab, entities, 0)?;
    train(&mut model, &examples, &TrainConfig { epochs: 15, lr: 0.005, track_pr_auc: false, ..TrainConfig::default() })?;

    let scores = model.score_all(&examples)?;
    let top = (0..examples.len())
        .max_by(|&a, &b| scores[a].score.total_cmp(&scores[b].score))
        .expect("non-empty");
    let ex = &examples[top];
    let (positions, weights) = model.attention_weights(ex)?.expect("the RNN model has attention");
    println!("{} (score {:.3}, label {:?})", ex.source_id, scores[top].score, ex.label);
    let records = &data.dataset.sequences[&ex.source_id];
    let first = records.len().saturating_sub(ex.active_len());
    for (row, &pos) in positions.iter().enumerate() {
        let attended: f64 = (0..weights.rows()).map(|q| weights.get(q, row)).sum::<f64>() / weights.rows() as f64;
        let r = &records[first + row];
        println!("  step {pos:>2}  {:<10} mean attention {attended:.3}", r.action);
    }
    let rows = (0..weights.rows()).map(|r| weights.row(r).to_vec()).collect();
    Ok((ex.source_id.clone(), positions, rows))
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
