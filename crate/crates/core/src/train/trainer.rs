use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{load_model, ModelConfig, SequenceExample, TiesModel};
use crate::nn::{
    adam_step, clip_gradients, sigmoid, weighted_bce, weighted_bce_logit_grad, AdamConfig, Module,
};

use super::metrics::pr_auc;

/// How the positive class is weighted in the loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PosWeight {
    /// negatives / positives on the training set
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub clip: f64,
    pub dropout_p: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub warm_start: Option<PathBuf>,
    pub pos_weight: PosWeight,
    /// score the training set after every epoch
    pub track_pr_auc: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.0005,
            clip: 1.0,
            dropout_p: 0.1,
            epochs: 10,
            batch_size: 32,
            seed: 0,
            warm_start: None,
            pos_weight: PosWeight::Auto,
            track_pr_auc: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return Err(Error::Config(format!("clip must be positive, got {}", self.clip)));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout_p)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if let PosWeight::Fixed(w) = self.pos_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("pos_weight must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// mean weighted loss over the epoch's batches, measured before each update
    pub loss: f64,
    pub train_pr_auc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub pos_weight: f64,
    pub epochs: Vec<EpochStats>,
    pub warm_started: bool,
}

impl TrainReport {
    pub fn loss_curve(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }
}

fn labels_of(examples: &[SequenceExample]) -> Result<Vec<u8>> {
    examples
        .iter()
        .map(|ex| {
            ex.label
                .ok_or_else(|| Error::Data(format!("training example {:?} has no label", ex.source_id)))
        })
        .collect()
}

/// Resolves the positive-class weight for a labelled training set.
pub fn resolve_pos_weight(labels: &[u8], setting: PosWeight) -> Result<f64> {
    match setting {
        PosWeight::Fixed(w) => Ok(w),
        PosWeight::Auto => {
            let pos = labels.iter().filter(|&&l| l == 1).count();
            let neg = labels.len() - pos;
            if pos == 0 || neg == 0 {
                return Err(Error::Config(
                    "automatic class weighting needs both classes in the training set".into(),
                ));
            }
            Ok(neg as f64 / pos as f64)
        }
    }
}

/// Checks that `other` has the same architecture, features and vocabulary as
/// `model`, so its parameters can be copied over.
pub fn check_compatible(model: &TiesModel, other: &TiesModel) -> Result<()> {
    if model.kind() != other.kind() {
        return Err(Error::KindMismatch {
            expected: model.kind().to_string(),
            found: other.kind().to_string(),
        });
    }
    let strip = |c: &ModelConfig| ModelConfig {
        dropout: 0.0,
        max_len: 0,
        ..c.clone()
    };
    if strip(&model.config) != strip(&other.config) {
        return Err(Error::Config(
            "warm-start checkpoint has a different architecture or feature layout".into(),
        ));
    }
    if model.vocab != other.vocab {
        return Err(Error::Config("warm-start checkpoint has a different action vocabulary".into()));
    }
    Ok(())
}

/// Copies every trainable parameter of `from` into `model`, resetting
/// optimizer state.
pub fn warm_start_from(model: &mut TiesModel, from: &TiesModel) -> Result<()> {
    check_compatible(model, from)?;
    for (dst, src) in model.params_mut().into_iter().zip(from.params()) {
        *dst = crate::nn::Parameter::new(src.value.clone());
    }
    Ok(())
}

pub fn train(model: &mut TiesModel, examples: &[SequenceExample], cfg: &TrainConfig) -> Result<TrainReport> {
    train_with(model, examples, cfg, |_| {})
}

/// Mini-batch training with Adam and global-norm clipping; `on_epoch` sees
/// each epoch's statistics as they are produced.
pub fn train_with(
    model: &mut TiesModel,
    examples: &[SequenceExample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainReport> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    let labels = labels_of(examples)?;
    let pos_weight = resolve_pos_weight(&labels, cfg.pos_weight)?;
    let mut report = TrainReport {
        pos_weight,
        ..Default::default()
    };
    if let Some(path) = &cfg.warm_start {
        let init = load_model(path)?;
        warm_start_from(model, &init)?;
        report.warm_started = true;
    }
    model.config.dropout = cfg.dropout_p;
    model.zero_grad();
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let ex = &examples[i];
                let (out, cache) = model.forward(ex, true, &mut rng)?;
                total += weighted_bce(sigmoid(out.logit), labels[i], pos_weight);
                let dlogit = weighted_bce_logit_grad(out.logit, labels[i], pos_weight) * scale;
                model.backward(ex, &cache, dlogit);
            }
            model.actions.grad.row_mut(0).fill(0.0);
            let mut params = model.params_mut();
            clip_gradients(&mut params, cfg.clip);
            for p in params {
                adam_step(p, &adam);
            }
            model.freeze_padding();
        }
        let train_pr_auc = if cfg.track_pr_auc {
            let scores: Vec<f64> = model.score_all(examples)?.into_iter().map(|o| o.score).collect();
            Some(pr_auc(&scores, &labels)?)
        } else {
            None
        };
        let stats = EpochStats {
            epoch,
            loss: total / examples.len() as f64,
            train_pr_auc,
        };
        on_epoch(&stats);
        report.epochs.push(stats);
    }
    Ok(report)
}

/// Mean weighted loss of `model` on `examples` without dropout.
pub fn evaluate_loss(model: &TiesModel, examples: &[SequenceExample], pos_weight: f64) -> Result<f64> {
    let labels = labels_of(examples)?;
    let outs = model.score_all(examples)?;
    Ok(outs
        .iter()
        .zip(&labels)
        .map(|(o, &l)| weighted_bce(o.score, l, pos_weight))
        .sum::<f64>()
        / examples.len().max(1) as f64)
}
