use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::records::InteractionRecord;
use crate::error::{Error, Result};

/// Time-ordered interaction sequences keyed by source id, with their labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledDataset {
    pub sequences: BTreeMap<String, Vec<InteractionRecord>>,
    pub labels: BTreeMap<String, u8>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_positive(&self) -> usize {
        self.labels.values().filter(|&&l| l == 1).count()
    }

    /// Iterates `(source_id, records, label)` in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[InteractionRecord], u8)> {
        self.labels.iter().map(|(id, &l)| {
            let seq = self.sequences.get(id).map_or(&[][..], Vec::as_slice);
            (id.as_str(), seq, l)
        })
    }

    pub fn all_records(&self) -> impl Iterator<Item = &InteractionRecord> {
        self.sequences.values().flatten()
    }
}

/// What [`build_dataset`] kept and dropped.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub retained_records: usize,
    /// records whose source has no label
    pub unlabeled_records: usize,
    pub unlabeled_sources: usize,
    /// labeled ids without a single record
    pub labeled_without_records: usize,
}

/// Groups records by source (each group stably sorted by timestamp) and
/// attaches labels. Unlabeled sources and labels without records are dropped
/// and counted.
pub fn build_dataset(
    records: Vec<InteractionRecord>,
    labels: &BTreeMap<String, u8>,
) -> (LabeledDataset, BuildStats) {
    let mut stats = BuildStats::default();
    let mut unlabeled = BTreeSet::new();
    let (kept_records, dropped): (Vec<_>, Vec<_>) = records
        .into_iter()
        .partition(|r| labels.contains_key(&r.source_id));
    stats.retained_records = kept_records.len();
    stats.unlabeled_records = dropped.len();
    for r in dropped {
        unlabeled.insert(r.source_id);
    }
    stats.unlabeled_sources = unlabeled.len();
    let groups = group_by_source(kept_records);
    let mut kept = BTreeMap::new();
    for (id, &l) in labels {
        if groups.contains_key(id) {
            kept.insert(id.clone(), l);
        } else {
            stats.labeled_without_records += 1;
        }
    }
    (
        LabeledDataset {
            sequences: groups,
            labels: kept,
        },
        stats,
    )
}

/// Groups records by source id, each group stably sorted by timestamp.
pub fn group_by_source(
    records: impl IntoIterator<Item = InteractionRecord>,
) -> BTreeMap<String, Vec<InteractionRecord>> {
    let mut groups: BTreeMap<String, Vec<InteractionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.source_id.clone()).or_default().push(r);
    }
    for seq in groups.values_mut() {
        seq.sort_by_key(|r| r.ts);
    }
    groups
}

/// Reads `source_id<TAB>label` with labels in {0, 1}. Repeated identical
/// labels are accepted; conflicting ones are an error.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, u8>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, path)
}

pub fn parse_labels(text: &str, path: &Path) -> Result<BTreeMap<String, u8>> {
    let mut out = BTreeMap::new();
    for (id, value, line) in two_column_rows(text, path)? {
        let label = match value {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("label must be 0 or 1, got {other:?}"),
                })
            }
        };
        if let Some(prev) = out.insert(id.to_string(), label) {
            if prev != label {
                return Err(Error::Data(format!(
                    "conflicting labels for {id:?} ({}:{line})",
                    path.display()
                )));
            }
        }
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &BTreeMap<String, u8>) -> Result<()> {
    write_two_column(path, labels.iter().map(|(k, v)| (k.as_str(), v.to_string())))
}

/// Reads an external score file `source_id<TAB>score`, score in [0, 1].
pub fn read_scores(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (id, value, line) in two_column_rows(&text, path)? {
        let score: f64 = value.parse().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("bad score {value:?}: {e}"),
        })?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("score {score} outside [0, 1]"),
            });
        }
        out.insert(id.to_string(), score);
    }
    Ok(out)
}

pub fn write_scores<'a>(path: &Path, scores: impl IntoIterator<Item = (&'a str, f64)>) -> Result<()> {
    write_two_column(path, scores.into_iter().map(|(k, v)| (k, format!("{v}"))))
}

fn two_column_rows<'t>(text: &'t str, path: &Path) -> Result<Vec<(&'t str, &'t str, usize)>> {
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut it = line.split('\t');
        match (it.next(), it.next(), it.next()) {
            (Some(id), Some(v), None) if !id.trim().is_empty() => {
                rows.push((id.trim(), v.trim(), n + 1))
            }
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg: format!("expected id<TAB>value, got {line:?}"),
                })
            }
        }
    }
    Ok(rows)
}

fn write_two_column<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = (&'a str, String)>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (k, v) in rows {
        writeln!(w, "{k}\t{v}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
