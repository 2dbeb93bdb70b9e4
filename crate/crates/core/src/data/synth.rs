//! Synthetic interaction logs with a controllable bad-actor signature.
//!
//! Normal sources draw actions from a smooth categorical distribution, pick
//! targets uniformly from a large pool and space interactions with
//! exponential gaps (mean one hour). Bad sources favour three abuse actions,
//! hit a small farm of shared targets and act in bursts (gap mean divided by
//! `bad_burst_factor`). A `stealth_fraction` of bad sources behave exactly
//! like normal ones; only the simulated external baseline score sees them.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Exp, Normal};

use super::dataset::{write_labels, write_scores, LabeledDataset};
use super::records::{write_interactions, InteractionRecord};
use crate::error::{Error, Result};
use crate::graph::EmbeddingTable;

pub const NORMAL_MEAN_GAP_SECS: f64 = 3600.0;
pub const ABUSE_ACTIONS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_normal: usize,
    pub n_bad: usize,
    pub action_count: usize,
    pub mean_seq_len: usize,
    pub bad_burst_factor: f64,
    pub bad_target_pool: usize,
    pub normal_target_pool: usize,
    pub embedding_dim: usize,
    /// 0 → well separated entity-embedding clusters, 1 → identical clusters
    pub embedding_overlap: f64,
    /// share of bad sources whose behaviour and embedding look normal
    pub stealth_fraction: f64,
    pub start_ts: u64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_normal: 1000,
            n_bad: 250,
            action_count: 12,
            mean_seq_len: 40,
            bad_burst_factor: 10.0,
            bad_target_pool: 20,
            normal_target_pool: 2000,
            embedding_dim: 16,
            embedding_overlap: 0.3,
            stealth_fraction: 0.0,
            start_ts: 1_600_000_000,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_normal == 0 || self.n_bad == 0 {
            return bad("synthetic data needs at least one normal and one bad source".into());
        }
        if self.action_count <= ABUSE_ACTIONS {
            return bad(format!("action_count must exceed {ABUSE_ACTIONS}"));
        }
        if self.mean_seq_len == 0 || self.bad_target_pool == 0 || self.normal_target_pool == 0 {
            return bad("sequence length and target pools must be positive".into());
        }
        if self.bad_burst_factor <= 1.0 || !self.bad_burst_factor.is_finite() {
            return bad(format!("bad_burst_factor must be > 1, got {}", self.bad_burst_factor));
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.embedding_overlap) || !(0.0..=1.0).contains(&self.stealth_fraction) {
            return bad("embedding_overlap and stealth_fraction must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Everything the generator produces.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub dataset: LabeledDataset,
    pub sources: EmbeddingTable,
    pub targets: EmbeddingTable,
    /// simulated external model score per source
    pub baseline: BTreeMap<String, f64>,
    pub action_names: Vec<String>,
    /// bad sources generated with normal behaviour
    pub stealth: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Normal,
    Bad,
    Stealth,
}

pub fn action_name(i: usize) -> String {
    format!("action_{i:02}")
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = cfg.embedding_dim;
    let actions: Vec<String> = (0..cfg.action_count).map(action_name).collect();
    let n_regular = cfg.action_count - ABUSE_ACTIONS;

    // regular actions with geometrically decaying weight, abuse actions rare
    let mut normal_w: Vec<f64> = (0..n_regular)
        .map(|i| (-(i as f64) / (n_regular as f64 / 3.0)).exp())
        .collect();
    normal_w.extend(std::iter::repeat_n(0.02, ABUSE_ACTIONS));
    let mut bad_w: Vec<f64> = normal_w.iter().map(|w| 0.2 * w).collect();
    for w in &mut bad_w[n_regular..] {
        *w = 1.0;
    }
    let normal_actions = WeightedIndex::new(&normal_w).expect("positive weights");
    let bad_actions = WeightedIndex::new(&bad_w).expect("positive weights");

    // two Gaussian clusters along a random direction
    let noise_std = 1.0 / (dim as f64).sqrt();
    let noise = Normal::new(0.0, noise_std).expect("finite std");
    let mut direction: Vec<f64> = (0..dim).map(|_| noise.sample(&mut rng)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    direction.iter_mut().for_each(|v| *v /= norm);
    let offset = 2.0 * noise_std * (1.0 - cfg.embedding_overlap);
    let draw_embedding = |bad: bool, rng: &mut ChaCha8Rng| -> Vec<f64> {
        let sign = if bad { 1.0 } else { -1.0 };
        direction
            .iter()
            .map(|d| sign * offset * d + noise.sample(rng))
            .collect()
    };

    let normal_targets: Vec<String> = (0..cfg.normal_target_pool).map(|i| format!("t{i:05}")).collect();
    let farm_targets: Vec<String> = (0..cfg.bad_target_pool).map(|i| format!("farm{i:03}")).collect();
    let mut targets = EmbeddingTable::new(dim);
    for t in &normal_targets {
        let v = draw_embedding(false, &mut rng);
        targets.insert(t.clone(), &v)?;
    }
    for t in &farm_targets {
        let v = draw_embedding(true, &mut rng);
        targets.insert(t.clone(), &v)?;
    }

    let n_stealth = (cfg.stealth_fraction * cfg.n_bad as f64).round() as usize;
    let mut kinds: Vec<Kind> = std::iter::repeat_n(Kind::Normal, cfg.n_normal)
        .chain(std::iter::repeat_n(Kind::Stealth, n_stealth))
        .chain(std::iter::repeat_n(Kind::Bad, cfg.n_bad - n_stealth))
        .collect();
    kinds.shuffle(&mut rng);

    let normal_gap = Exp::new(1.0 / NORMAL_MEAN_GAP_SECS).expect("positive rate");
    let bad_gap = Exp::new(cfg.bad_burst_factor / NORMAL_MEAN_GAP_SECS).expect("positive rate");
    let base_normal = Normal::new(0.3, 0.1).expect("finite");
    let base_bad = Normal::new(0.5, 0.1).expect("finite");
    let base_stealth = Normal::new(0.8, 0.08).expect("finite");

    let mut dataset = LabeledDataset::default();
    let mut sources = EmbeddingTable::new(dim);
    let mut baseline = BTreeMap::new();
    let mut stealth = Vec::new();
    let lo = (cfg.mean_seq_len / 2).max(1);
    let hi = (cfg.mean_seq_len * 3 / 2).max(lo);
    for (i, &kind) in kinds.iter().enumerate() {
        let id = format!("s{i:05}");
        let behaves_bad = kind == Kind::Bad;
        let v = draw_embedding(behaves_bad, &mut rng);
        sources.insert(id.clone(), &v)?;
        let len = rng.random_range(lo..=hi);
        let mut ts = cfg.start_ts + rng.random_range(0..30 * 86_400);
        let mut seq = Vec::with_capacity(len);
        for step in 0..len {
            if step > 0 {
                let gap = if behaves_bad {
                    bad_gap.sample(&mut rng)
                } else {
                    normal_gap.sample(&mut rng)
                };
                ts += gap.round() as u64;
            }
            let action = if behaves_bad {
                bad_actions.sample(&mut rng)
            } else {
                normal_actions.sample(&mut rng)
            };
            let target = if behaves_bad && rng.random::<f64>() < 0.8 {
                farm_targets.choose(&mut rng).expect("non-empty pool")
            } else {
                normal_targets.choose(&mut rng).expect("non-empty pool")
            };
            seq.push(InteractionRecord::new(&id, Some(target), &actions[action], ts));
        }
        let score: f64 = match kind {
            Kind::Normal => base_normal.sample(&mut rng),
            Kind::Bad => base_bad.sample(&mut rng),
            Kind::Stealth => base_stealth.sample(&mut rng),
        };
        baseline.insert(id.clone(), score.clamp(0.0, 1.0));
        if kind == Kind::Stealth {
            stealth.push(id.clone());
        }
        dataset
            .labels
            .insert(id.clone(), u8::from(kind != Kind::Normal));
        dataset.sequences.insert(id, seq);
    }

    Ok(SyntheticData {
        dataset,
        sources,
        targets,
        baseline,
        action_names: actions,
        stealth,
    })
}

/// File names written by [`write_synthetic`].
pub mod files {
    pub const INTERACTIONS: &str = "interactions.tsv";
    pub const LABELS: &str = "labels.tsv";
    pub const SOURCES: &str = "sources.emb.tsv";
    pub const TARGETS: &str = "targets.emb.tsv";
    pub const BASELINE: &str = "baseline_scores.tsv";
}

pub fn write_synthetic(data: &SyntheticData, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_interactions(&dir.join(files::INTERACTIONS), data.dataset.all_records())?;
    write_labels(&dir.join(files::LABELS), &data.dataset.labels)?;
    data.sources.write_tsv(&dir.join(files::SOURCES))?;
    data.targets.write_tsv(&dir.join(files::TARGETS))?;
    write_scores(
        &dir.join(files::BASELINE),
        data.baseline.iter().map(|(k, &v)| (k.as_str(), v)),
    )
}

/// Per-sequence gaps between consecutive interactions, in seconds.
pub fn gaps(seq: &[InteractionRecord]) -> impl Iterator<Item = f64> + '_ {
    seq.windows(2).map(|w| (w[1].ts - w[0].ts) as f64)
}

/// Mean gap of a sequence (0 for single-event sequences).
pub fn mean_gap(seq: &[InteractionRecord]) -> f64 {
    if seq.len() < 2 {
        return 0.0;
    }
    gaps(seq).sum::<f64>() / (seq.len() - 1) as f64
}
