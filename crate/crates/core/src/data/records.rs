use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// One `(source, target, action, timestamp, misc)` event.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionRecord {
    pub source_id: String,
    /// `None` when the interaction has no target entity.
    pub target_id: Option<String>,
    pub action: String,
    /// unix seconds
    pub ts: u64,
    pub misc: BTreeMap<String, f64>,
}

impl InteractionRecord {
    pub fn new(source: &str, target: Option<&str>, action: &str, ts: u64) -> Self {
        Self {
            source_id: source.to_string(),
            target_id: target.map(str::to_string),
            action: action.to_string(),
            ts,
            misc: BTreeMap::new(),
        }
    }

    /// Parses `source<TAB>target_or_-<TAB>action<TAB>ts[<TAB>key=value]*`.
    pub fn parse_line(line: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 {
            return Err(format!("expected at least 4 fields, found {}", fields.len()));
        }
        let source = fields[0].trim();
        if source.is_empty() {
            return Err("empty source id".into());
        }
        let target = match fields[1].trim() {
            "" | "-" => None,
            t => Some(t.to_string()),
        };
        let action = fields[2].trim();
        if action.is_empty() {
            return Err("empty action".into());
        }
        let ts = fields[3]
            .trim()
            .parse::<u64>()
            .map_err(|e| format!("bad timestamp {:?}: {e}", fields[3]))?;
        let mut misc = BTreeMap::new();
        for kv in &fields[4..] {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| format!("misc field {kv:?} is not key=value"))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| format!("bad misc value {v:?}: {e}"))?;
            if !v.is_finite() {
                return Err(format!("non-finite misc value for {k:?}"));
            }
            misc.insert(k.trim().to_string(), v);
        }
        Ok(Self {
            source_id: source.to_string(),
            target_id: target,
            action: action.to_string(),
            ts,
            misc,
        })
    }

    pub fn to_line(&self) -> String {
        let mut s = format!(
            "{}\t{}\t{}\t{}",
            self.source_id,
            self.target_id.as_deref().unwrap_or("-"),
            self.action,
            self.ts
        );
        for (k, v) in &self.misc {
            let _ = write!(s, "\t{k}={v}");
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MalformedLine {
    pub line: usize,
    pub reason: String,
}

/// Records that parsed plus the lines that did not.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedLog {
    pub records: Vec<InteractionRecord>,
    pub malformed: Vec<MalformedLine>,
}

/// Share of malformed lines above which parsing fails outright.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

pub fn parse_interactions(path: &Path) -> Result<ParsedLog> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_interactions_str(&text, path)
}

pub fn parse_interactions_str(text: &str, path: &Path) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    let mut data_lines = 0usize;
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        data_lines += 1;
        match InteractionRecord::parse_line(line) {
            Ok(r) => out.records.push(r),
            Err(reason) => out.malformed.push(MalformedLine {
                line: n + 1,
                reason,
            }),
        }
    }
    if data_lines > 0 && out.malformed.len() as f64 > MAX_MALFORMED_FRACTION * data_lines as f64 {
        let first = &out.malformed[0];
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: first.line,
            msg: format!(
                "{} of {} lines malformed (first: {})",
                out.malformed.len(),
                data_lines,
                first.reason
            ),
        });
    }
    Ok(out)
}

pub fn write_interactions<'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a InteractionRecord>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        writeln!(w, "{}", r.to_line()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
