//! Save a trained checkpoint and use it to warm-start training on new data.

use std::error::Error;

use ties::data::{generate_synthetic, SynthConfig};
use ties::model::{assemble_dataset, model_init, save_model, ActionVocab, EncoderKind, EntityTables, FeatureSpec, ModelConfig};
use ties::train::{train, TrainConfig};

/// First-epoch loss on the new data: `(cold, warm)`.
pub fn run_example() -> Result<(f64, f64), Box<dyn Error>> {
    let synth = |seed| SynthConfig {
        n_normal: 200,
        n_bad: 60,
        mean_seq_len: 16,
        seed,
        ..SynthConfig::default()
    };
    let old = generate_synthetic(&synth(1))?;
    // fresh sources; same actions and entity embedding width
    let new = generate_synthetic(&synth(2))?;

    let vocab = ActionVocab::from_actions(old.action_names.iter().map(String::as_str));
    let mut config = ModelConfig::new(EncoderKind::DeepSet, FeatureSpec::new(16, 16, 8));
    config.hidden = 16;
    config.max_len = 24;
    let examples = |data: &ties::data::SyntheticData| {
        let entities = EntityTables::new(data.sources.clone(), data.targets.clone());
        assemble_dataset(&data.dataset, &entities, &vocab, &config.spec, config.max_len).map(|(e, _)| (e, entities))
    };
    let (old_examples, old_entities) = examples(&old)?;
    let (new_examples, new_entities) = examples(&new)?;

    let mut pretrained = model_init(config.clone(), vocab.clone(), old_entities, 0)?;
    train(&mut pretrained, &old_examples, &TrainConfig { track_pr_auc: false, ..TrainConfig::default() })?;
    let dir = std::env::temp_dir().join("ties-warm-start-example");
    save_model(&pretrained, &dir)?;
    println!("checkpoint written to {}", dir.display());

    let first_loss = |warm: bool| -> Result<f64, Box<dyn Error>> {
        let mut model = model_init(config.clone(), vocab.clone(), new_entities.clone(), 7)?;
        let cfg = TrainConfig {
            epochs: 1,
            track_pr_auc: false,
            warm_start: warm.then(|| dir.clone()),
            ..TrainConfig::default()
        };
        Ok(train(&mut model, &new_examples, &cfg)?.epochs[0].loss)
    };
    let cold = first_loss(false)?;
    let warm = first_loss(true)?;
    println!("first-epoch loss: cold {cold:.4}, warm {warm:.4}");
    Ok((cold, warm))
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
