use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor2D;

/// Dense id → vector map with a stable row order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    values: Tensor2D,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            ids: Vec::new(),
            index: HashMap::new(),
            values: Tensor2D::zeros(0, dim),
        }
    }

    /// Builds a table from ids and a matching `len(ids) × D` matrix.
    pub fn from_parts(ids: Vec<String>, values: Tensor2D) -> Result<Self> {
        if ids.len() != values.rows() {
            return Err(Error::shape(
                "embedding table",
                (ids.len(), 1),
                values.shape(),
            ));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate embedding id {id:?}")));
            }
        }
        Ok(Self { ids, index, values })
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &Tensor2D {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Tensor2D {
        &mut self.values
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn lookup(&self, id: &str) -> Option<&[f64]> {
        self.index_of(id).map(|i| self.values.row(i))
    }

    pub fn get(&self, id: &str) -> Result<&[f64]> {
        self.lookup(id).ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    /// Appends a new id; fails on duplicates or wrong width.
    pub fn insert(&mut self, id: impl Into<String>, vector: &[f64]) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim() {
            return Err(Error::shape(
                "embedding insert",
                (1, vector.len()),
                (1, self.dim()),
            ));
        }
        if self.index.contains_key(&id) {
            return Err(Error::Data(format!("duplicate embedding id {id:?}")));
        }
        let mut data = std::mem::replace(&mut self.values, Tensor2D::zeros(0, 0)).into_vec();
        data.extend_from_slice(vector);
        self.values = Tensor2D::from_vec(self.ids.len() + 1, vector.len(), data)?;
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        Ok(())
    }

    /// Writes `#dim D` followed by `id<TAB>v1..vD`, 17 significant digits.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "#dim {}", self.dim())?;
        for (i, id) in self.ids.iter().enumerate() {
            write!(w, "{id}")?;
            for v in self.values.row(i) {
                write!(w, "\t{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut dim: Option<usize> = None;
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(d) = rest.trim().strip_prefix("dim") {
                    let d = d
                        .trim()
                        .parse::<usize>()
                        .map_err(|e| parse_err(line_no, format!("bad #dim header: {e}")))?;
                    dim = Some(d);
                }
                continue;
            }
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default();
            if id.is_empty() {
                return Err(parse_err(line_no, "empty id".into()));
            }
            let row: Vec<f64> = fields
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(line_no, format!("bad value {f:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            let d = *dim.get_or_insert(row.len());
            if row.len() != d {
                return Err(parse_err(
                    line_no,
                    format!("expected {} columns, found {}", d + 1, row.len() + 1),
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(parse_err(line_no, "non-finite value".into()));
            }
            ids.push(id.to_string());
            data.extend(row);
        }
        let dim = dim.unwrap_or(0);
        let values = Tensor2D::from_vec(ids.len(), dim, data)?;
        Self::from_parts(ids, values).map_err(|e| parse_err(0, e.to_string()))
    }
}
