use crate::data::{InteractionRecord, LabeledDataset};
use crate::error::{Error, Result};
use crate::graph::EmbeddingTable;
use crate::nn::Tensor2D;

use super::config::FeatureSpec;
use super::vocab::ActionVocab;

/// Frozen source and target entity vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EntityTables {
    pub sources: EmbeddingTable,
    pub targets: EmbeddingTable,
}

impl EntityTables {
    pub fn new(sources: EmbeddingTable, targets: EmbeddingTable) -> Self {
        Self { sources, targets }
    }

    /// Empty tables of the given widths; every lookup falls back to zero.
    pub fn empty(d_src: usize, d_tgt: usize) -> Self {
        Self::new(EmbeddingTable::new(d_src), EmbeddingTable::new(d_tgt))
    }
}

/// One cropped, left-padded sequence ready for the encoder.
///
/// `features` holds every column except the action block, which stays zero
/// here and is filled from the trainable action table at encode time using
/// `actions`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceExample {
    pub features: Tensor2D,
    /// vocabulary index per step, 0 on padding rows
    pub actions: Vec<usize>,
    pub mask: Vec<bool>,
    pub label: Option<u8>,
    pub source_id: String,
}

impl SequenceExample {
    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn active_len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Same example with `extra` padding rows prepended.
    pub fn with_extra_padding(&self, extra: usize) -> Self {
        let cols = self.features.cols();
        let mut data = vec![0.0; extra * cols];
        data.extend_from_slice(self.features.data());
        let mut actions = vec![0; extra];
        actions.extend_from_slice(&self.actions);
        let mut mask = vec![false; extra];
        mask.extend_from_slice(&self.mask);
        Self {
            features: Tensor2D::from_vec(self.len() + extra, cols, data).expect("sized"),
            actions,
            mask,
            label: self.label,
            source_id: self.source_id.clone(),
        }
    }

    /// Reorders the real steps by `order` (a permutation of `0..active_len`).
    pub fn permute_active(&self, order: &[usize]) -> Self {
        let active: Vec<usize> = (0..self.len()).filter(|&t| self.mask[t]).collect();
        assert_eq!(order.len(), active.len(), "permutation covers the real steps");
        let mut out = self.clone();
        for (slot, &src) in active.iter().zip(order) {
            let from = active[src];
            out.features.row_mut(*slot).copy_from_slice(self.features.row(from));
            out.actions[*slot] = self.actions[from];
        }
        out
    }
}

/// Counts of lookups that fell back to a zero vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AssemblyWarnings {
    pub unknown_sources: usize,
    pub unknown_targets: usize,
}

impl AssemblyWarnings {
    pub fn total(&self) -> usize {
        self.unknown_sources + self.unknown_targets
    }

    pub fn absorb(&mut self, other: AssemblyWarnings) {
        self.unknown_sources += other.unknown_sources;
        self.unknown_targets += other.unknown_targets;
    }
}

/// Log-scaled gap in seconds between two consecutive interactions.
pub fn delta_t(ts_curr: u64, ts_prev: u64) -> Result<f64> {
    if ts_curr < ts_prev {
        return Err(Error::Data(format!(
            "interaction at {ts_curr} precedes the previous one at {ts_prev}"
        )));
    }
    Ok(((ts_curr - ts_prev) as f64).ln_1p())
}

/// Builds the per-step feature rows for one source's interactions.
///
/// Gaps are measured on the full sequence; only the last `max_len` steps are
/// kept and shorter sequences are padded at the front.
pub fn assemble_features(
    records: &[InteractionRecord],
    tables: &EntityTables,
    vocab: &ActionVocab,
    spec: &FeatureSpec,
    max_len: usize,
    label: Option<u8>,
) -> Result<(SequenceExample, AssemblyWarnings)> {
    let Some(first) = records.first() else {
        return Err(Error::Data("cannot assemble an empty interaction sequence".into()));
    };
    if max_len == 0 {
        return Err(Error::Config("max_len must be positive".into()));
    }
    if tables.sources.dim() != spec.d_src || tables.targets.dim() != spec.d_tgt {
        return Err(Error::Config(format!(
            "entity tables are {}/{} wide but the feature spec expects {}/{}",
            tables.sources.dim(),
            tables.targets.dim(),
            spec.d_src,
            spec.d_tgt
        )));
    }
    let mut warnings = AssemblyWarnings::default();
    let source = tables.sources.lookup(&first.source_id);
    if source.is_none() {
        warnings.unknown_sources += 1;
    }

    let d = spec.input_dim();
    let keep = records.len().min(max_len);
    let skip = records.len() - keep;
    let pad = max_len - keep;
    let mut features = Tensor2D::zeros(max_len, d);
    let mut actions = vec![0usize; max_len];
    let mut mask = vec![false; max_len];
    let tgt_off = spec.d_src;
    let dt_off = spec.delta_offset();

    for (i, rec) in records.iter().enumerate() {
        if rec.source_id != first.source_id {
            return Err(Error::Data(format!(
                "sequence for {:?} contains a record of {:?}",
                first.source_id, rec.source_id
            )));
        }
        let dt = if i == 0 { 0.0 } else { delta_t(rec.ts, records[i - 1].ts)? };
        let action = vocab.index_of(&rec.action)?;
        if i < skip {
            continue;
        }
        let t = pad + i - skip;
        let row = features.row_mut(t);
        if let Some(v) = source {
            row[..spec.d_src].copy_from_slice(v);
        }
        if let Some(target) = &rec.target_id {
            match tables.targets.lookup(target) {
                Some(v) => row[tgt_off..tgt_off + spec.d_tgt].copy_from_slice(v),
                None => warnings.unknown_targets += 1,
            }
        }
        row[dt_off] = dt;
        for (k, key) in spec.misc_keys.iter().enumerate() {
            row[dt_off + 1 + k] = rec.misc.get(key).copied().unwrap_or(0.0);
        }
        actions[t] = action;
        mask[t] = true;
    }

    Ok((
        SequenceExample {
            features,
            actions,
            mask,
            label,
            source_id: first.source_id.clone(),
        },
        warnings,
    ))
}

/// Assembles every labelled sequence of `dataset`, in id order.
pub fn assemble_dataset(
    dataset: &LabeledDataset,
    tables: &EntityTables,
    vocab: &ActionVocab,
    spec: &FeatureSpec,
    max_len: usize,
) -> Result<(Vec<SequenceExample>, AssemblyWarnings)> {
    let mut warnings = AssemblyWarnings::default();
    let mut out = Vec::with_capacity(dataset.len());
    for (_, records, label) in dataset.iter() {
        let (ex, w) = assemble_features(records, tables, vocab, spec, max_len, Some(label))?;
        warnings.absorb(w);
        out.push(ex);
    }
    Ok((out, warnings))
}
