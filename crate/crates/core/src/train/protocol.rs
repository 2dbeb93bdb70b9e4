use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{
    assemble_dataset, model_init, ActionVocab, EncoderKind, EntityTables, ModelConfig,
    SequenceExample,
};

use super::hybrid::train_hybrid;
use super::metrics::pr_auc;
use super::report::{median_gap_report, EvalReport};
use super::split::{split_indices, SplitSpec};
use super::trainer::{train, TrainConfig};

pub const THREADS_ENV: &str = "TIES_THREADS";
pub const REFERENCE_NAME: &str = "Baseline";

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub encoders: Vec<EncoderKind>,
    pub n_splits: usize,
    pub fractions: [f64; 3],
    pub seed: u64,
    /// architecture shared by all variants; the encoder kind is overridden
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// worker cap; `None` reads the environment
    pub threads: Option<usize>,
}

impl ProtocolConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            encoders: EncoderKind::ALL.to_vec(),
            n_splits: 5,
            fractions: [0.8, 0.1, 0.1],
            seed: 0,
            model,
            train: TrainConfig {
                track_pr_auc: false,
                ..TrainConfig::default()
            },
            threads: None,
        }
    }
}

pub fn solo_row_name(kind: EncoderKind) -> String {
    format!("TIES-{}", kind.display_name())
}

pub fn hybrid_row_name(kind: EncoderKind) -> String {
    format!("Hybrid+{}", kind.display_name())
}

/// Worker cap from `TIES_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

struct JobResult {
    solo: f64,
    hybrid: f64,
}

fn pick(examples: &[SequenceExample], idx: &[usize]) -> Vec<SequenceExample> {
    idx.iter().map(|&i| examples[i].clone()).collect()
}

fn labels(examples: &[SequenceExample]) -> Vec<u8> {
    examples.iter().map(|e| e.label.unwrap_or(0)).collect()
}

fn baseline_of(examples: &[SequenceExample], baseline: &BTreeMap<String, f64>) -> Vec<f64> {
    examples.iter().map(|e| baseline[&e.source_id]).collect()
}

struct Prepared<'a> {
    examples: Vec<SequenceExample>,
    baseline: &'a BTreeMap<String, f64>,
    vocab: ActionVocab,
    entities: &'a EntityTables,
    cfg: &'a ProtocolConfig,
}

impl Prepared<'_> {
    fn split(&self, run: usize) -> Result<[Vec<usize>; 3]> {
        let spec = SplitSpec::new(self.cfg.fractions, self.cfg.seed + run as u64);
        split_indices(self.examples.len(), &spec)
    }

    fn reference(&self, run: usize) -> Result<f64> {
        let [_, _, test] = self.split(run)?;
        let test = pick(&self.examples, &test);
        pr_auc(&baseline_of(&test, self.baseline), &labels(&test))
    }

    fn job(&self, run: usize, kind: EncoderKind) -> Result<JobResult> {
        let seed = self.cfg.seed + run as u64;
        let [a, b, c] = self.split(run)?;
        let (train1, train2, test) = (pick(&self.examples, &a), pick(&self.examples, &b), pick(&self.examples, &c));
        let mut config = self.cfg.model.clone();
        config.encoder = kind;
        let mut model = model_init(config, self.vocab.clone(), self.entities.clone(), seed)?;
        let tcfg = TrainConfig { seed, ..self.cfg.train.clone() };
        train(&mut model, &train1, &tcfg)?;
        let score = |xs: &[SequenceExample]| -> Result<Vec<f64>> {
            Ok(model.score_all(xs)?.into_iter().map(|o| o.score).collect())
        };
        let fit = train_hybrid(&score(&train2)?, &baseline_of(&train2, self.baseline), &labels(&train2))?;
        let test_ties = score(&test)?;
        let test_labels = labels(&test);
        let hybrid: Vec<f64> = test_ties
            .iter()
            .zip(baseline_of(&test, self.baseline))
            .map(|(&t, b)| fit.score(t, b))
            .collect();
        Ok(JobResult {
            solo: pr_auc(&test_ties, &test_labels)?,
            hybrid: pr_auc(&hybrid, &test_labels)?,
        })
    }
}

/// Trains every encoder on the first training part of each split, fits the
/// hybrid on the second and evaluates both against the baseline scores on
/// the test part. Splits use seeds `seed + run`.
pub fn run_protocol(
    dataset: &LabeledDataset,
    entities: &EntityTables,
    baseline: &BTreeMap<String, f64>,
    cfg: &ProtocolConfig,
) -> Result<EvalReport> {
    if cfg.encoders.is_empty() {
        return Err(Error::Config("protocol needs at least one encoder".into()));
    }
    if cfg.n_splits < 3 {
        return Err(Error::Config(format!("protocol needs at least 3 splits, got {}", cfg.n_splits)));
    }
    if let Some(id) = dataset.labels.keys().find(|id| !baseline.contains_key(*id)) {
        return Err(Error::Data(format!("no baseline score for source {id:?}")));
    }
    let vocab = ActionVocab::from_actions(dataset.all_records().map(|r| r.action.as_str()));
    let (examples, _) = assemble_dataset(dataset, entities, &vocab, &cfg.model.spec, cfg.model.max_len)?;
    let prepared = Prepared {
        examples,
        baseline,
        vocab,
        entities,
        cfg,
    };

    let mut encoders = cfg.encoders.clone();
    encoders.sort_by_key(|k| EncoderKind::ALL.iter().position(|x| x == k));
    encoders.dedup();
    let jobs: Vec<(usize, EncoderKind)> = (0..cfg.n_splits)
        .flat_map(|run| encoders.iter().map(move |&k| (run, k)))
        .collect();
    let threads = match cfg.threads {
        Some(n) => Some(n),
        None => threads_from_env()?,
    };
    let run_all = || -> Result<(Vec<JobResult>, Vec<f64>)> {
        let results = jobs
            .par_iter()
            .map(|&(run, kind)| prepared.job(run, kind))
            .collect::<Result<Vec<_>>>()?;
        let reference = (0..cfg.n_splits)
            .map(|run| prepared.reference(run))
            .collect::<Result<Vec<_>>>()?;
        Ok((results, reference))
    };
    let (results, reference) = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };

    let per_kind = |kind: EncoderKind, hybrid: bool| -> Vec<(f64, f64)> {
        jobs.iter()
            .zip(&results)
            .filter(|((_, k), _)| *k == kind)
            .map(|((run, _), r)| (if hybrid { r.hybrid } else { r.solo }, reference[*run]))
            .collect()
    };
    let mut rows = Vec::new();
    for &k in &encoders {
        rows.push(median_gap_report(&solo_row_name(k), &per_kind(k, false))?);
    }
    for &k in &encoders {
        rows.push(median_gap_report(&hybrid_row_name(k), &per_kind(k, true))?);
    }
    Ok(EvalReport {
        reference: REFERENCE_NAME.to_string(),
        reference_pr_auc: reference,
        seed: cfg.seed,
        rows,
    })
}
