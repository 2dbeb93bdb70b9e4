//! Directory checkpoints: `manifest.toml` plus one little-endian f64 blob per
//! tensor and one newline-separated list per entity id set.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::EmbeddingTable;
use crate::nn::{Module, Tensor2D};

use super::config::{EncoderKind, ModelConfig};
use super::features::EntityTables;
use super::ties::{model_init, TiesModel};
use super::vocab::ActionVocab;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    actions: Vec<String>,
    config: ModelConfig,
    tensors: Vec<BlobEntry>,
    id_lists: Vec<BlobEntry>,
    /// hash over every blob entry, in order
    checksum: String,
}

#[derive(Clone, Serialize, Deserialize)]
struct BlobEntry {
    name: String,
    file: String,
    shape: [usize; 2],
    bytes: u64,
    sha256: String,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn manifest_checksum(entries: &[BlobEntry]) -> String {
    let mut h = Sha256::new();
    for e in entries {
        h.update(format!("{}\t{}\t{}x{}\t{}\n", e.name, e.file, e.shape[0], e.shape[1], e.sha256));
    }
    hex::encode(h.finalize())
}

fn tensor_bytes(t: &Tensor2D) -> Vec<u8> {
    t.data().iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn ids_bytes(ids: &[String]) -> Vec<u8> {
    let mut s = String::new();
    for id in ids {
        s.push_str(id);
        s.push('\n');
    }
    s.into_bytes()
}

fn blob_file(name: &str, ext: &str) -> String {
    format!("{}.{ext}", name.replace('.', "_"))
}

fn write_blob(dir: &Path, name: &str, file: String, shape: [usize; 2], bytes: &[u8]) -> Result<BlobEntry> {
    let path = dir.join(&file);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(BlobEntry {
        name: name.to_string(),
        file,
        shape,
        bytes: bytes.len() as u64,
        sha256: digest(bytes),
    })
}

/// Writes `model` into directory `dir` (created if needed).
pub fn save_model(model: &TiesModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tensors = Vec::new();
    let frozen = [
        ("entities.sources", model.entities.sources.values()),
        ("entities.targets", model.entities.targets.values()),
    ];
    let named = model.named_params();
    let all = named
        .iter()
        .map(|(n, p)| (n.as_str(), &p.value))
        .chain(frozen.iter().map(|(n, t)| (*n, *t)));
    for (name, value) in all {
        let (r, c) = value.shape();
        tensors.push(write_blob(dir, name, blob_file(name, "f64"), [r, c], &tensor_bytes(value))?);
    }
    let mut id_lists = Vec::new();
    for (name, table) in [
        ("entities.sources", &model.entities.sources),
        ("entities.targets", &model.entities.targets),
    ] {
        id_lists.push(write_blob(
            dir,
            name,
            blob_file(name, "ids"),
            [table.len(), 1],
            &ids_bytes(table.ids()),
        )?);
    }
    let entries: Vec<BlobEntry> = tensors.iter().chain(&id_lists).cloned().collect();
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        actions: model.vocab.names().to_vec(),
        config: model.config.clone(),
        checksum: manifest_checksum(&entries),
        tensors,
        id_lists,
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| Error::Integrity(format!("cannot serialise manifest: {e}")))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn read_blob(dir: &Path, entry: &BlobEntry) -> Result<Vec<u8>> {
    let path = dir.join(&entry.file);
    let bytes = fs::read(&path)
        .map_err(|e| Error::Integrity(format!("cannot read {}: {e}", path.display())))?;
    if bytes.len() as u64 != entry.bytes {
        return Err(Error::Integrity(format!(
            "{} holds {} bytes, manifest records {}",
            entry.file,
            bytes.len(),
            entry.bytes
        )));
    }
    if digest(&bytes) != entry.sha256 {
        return Err(Error::Integrity(format!("checksum mismatch in {}", entry.file)));
    }
    Ok(bytes)
}

fn read_tensor(dir: &Path, entry: &BlobEntry) -> Result<Tensor2D> {
    let [r, c] = entry.shape;
    if entry.bytes != (r * c * 8) as u64 {
        return Err(Error::Integrity(format!("{} size disagrees with its shape", entry.name)));
    }
    let bytes = read_blob(dir, entry)?;
    let data = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    Tensor2D::from_vec(r, c, data)
}

fn read_ids(dir: &Path, entry: &BlobEntry) -> Result<Vec<String>> {
    let bytes = read_blob(dir, entry)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Integrity(format!("{} is not UTF-8", entry.file)))?;
    let ids: Vec<String> = text.lines().map(str::to_string).collect();
    if ids.len() != entry.shape[0] {
        return Err(Error::Integrity(format!("{} lists {} ids, expected {}", entry.file, ids.len(), entry.shape[0])));
    }
    Ok(ids)
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let raw: toml::Table = toml::from_str(&text)
        .map_err(|e| Error::Integrity(format!("unreadable manifest: {e}")))?;
    let version = raw
        .get("format_version")
        .and_then(toml::Value::as_integer)
        .ok_or_else(|| Error::Integrity("manifest has no format_version".into()))?;
    if version != FORMAT_VERSION as i64 {
        return Err(Error::Version {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    let manifest: Manifest = toml::from_str(&text)
        .map_err(|e| Error::Integrity(format!("malformed manifest: {e}")))?;
    let entries: Vec<BlobEntry> = manifest.tensors.iter().chain(&manifest.id_lists).cloned().collect();
    if manifest_checksum(&entries) != manifest.checksum {
        return Err(Error::Integrity("manifest checksum mismatch".into()));
    }
    Ok(manifest)
}

/// Reads a checkpoint directory written by [`save_model`].
pub fn load_model(dir: &Path) -> Result<TiesModel> {
    let manifest = read_manifest(dir)?;
    let find = |list: &[BlobEntry], name: &str| -> Result<BlobEntry> {
        list.iter()
            .find(|e| e.name == name)
            .cloned()
            .ok_or_else(|| Error::Integrity(format!("checkpoint lacks {name}")))
    };
    let mut tables = Vec::new();
    for name in ["entities.sources", "entities.targets"] {
        let ids = read_ids(dir, &find(&manifest.id_lists, name)?)?;
        let values = read_tensor(dir, &find(&manifest.tensors, name)?)?;
        tables.push(
            EmbeddingTable::from_parts(ids, values)
                .map_err(|e| Error::Integrity(format!("{name}: {e}")))?,
        );
    }
    let targets = tables.pop().expect("two tables");
    let sources = tables.pop().expect("two tables");
    let vocab = ActionVocab::from_names(manifest.actions)?;
    let mut model = model_init(manifest.config, vocab, EntityTables::new(sources, targets), 0)?;

    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    let expected_tensors = names.len() + 2;
    if manifest.tensors.len() != expected_tensors {
        return Err(Error::Integrity(format!(
            "checkpoint has {} tensors, model needs {expected_tensors}",
            manifest.tensors.len()
        )));
    }
    for (name, param) in names.iter().zip(model.params_mut()) {
        let value = read_tensor(dir, &find(&manifest.tensors, name)?)?;
        if value.shape() != param.shape() {
            return Err(Error::Integrity(format!(
                "{name} is {:?} in the checkpoint but {:?} in the model",
                value.shape(),
                param.shape()
            )));
        }
        param.value = value;
    }
    Ok(model)
}

/// Like [`load_model`] but rejects checkpoints of another encoder kind.
pub fn load_model_as(dir: &Path, expected: EncoderKind) -> Result<TiesModel> {
    let manifest = read_manifest(dir)?;
    if manifest.config.encoder != expected {
        return Err(Error::KindMismatch {
            expected: expected.to_string(),
            found: manifest.config.encoder.to_string(),
        });
    }
    load_model(dir)
}
