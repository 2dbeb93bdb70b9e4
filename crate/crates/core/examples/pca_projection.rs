//! Project learned sequence embeddings to 2-D and measure class separation.

use std::error::Error;

use ties::data::{centroid_separation, export_pca_projection, generate_synthetic, SynthConfig};
use ties::graph::EmbeddingTable;
use ties::model::{assemble_dataset, model_init, ActionVocab, EncoderKind, EntityTables, FeatureSpec, ModelConfig};
use ties::nn::Tensor2D;
use ties::train::{train, TrainConfig};

/// Centroid separation of the projected embeddings.
pub fn run_example() -> Result<f64, Box<dyn Error>> {
    let data = generate_synthetic(&SynthConfig {
        n_normal: 400,
        n_bad: 100,
        ..SynthConfig::default()
    })?;
    let vocab = ActionVocab::from_actions(data.action_names.iter().map(String::as_str));
    let entities = EntityTables::new(data.sources.clone(), data.targets.clone());
    let mut config = ModelConfig::new(EncoderKind::DeepSet, FeatureSpec::new(16, 16, 32));
    config.hidden = 32;
    config.max_len = 64;
    let (examples, _) = assemble_dataset(&data.dataset, &entities, &vocab, &config.spec, config.max_len)?;
    let mut model = model_init(config, vocab, entities, 0)?;
    train(&mut model, &examples, &TrainConfig { track_pr_auc: false, ..TrainConfig::default() })?;

    let outputs = model.score_all(&examples)?;
    let rows: Vec<Vec<f64>> = outputs.into_iter().map(|o| o.embedding).collect();
    let ids = examples.iter().map(|e| e.source_id.clone()).collect();
    let table = EmbeddingTable::from_parts(ids, Tensor2D::from_rows(&rows)?)?;
    let path = std::env::temp_dir().join("ties-projection.tsv");
    let proj = export_pca_projection(&table, &data.dataset.labels, &path)?;
    let labels: Vec<u8> = examples.iter().map(|e| e.label.unwrap_or(0)).collect();
    let sep = centroid_separation(&proj, &labels);
    println!("projection of {} sequences written to {}", labels.len(), path.display());
    println!("centroid separation {sep:.2}");
    Ok(sep)
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
