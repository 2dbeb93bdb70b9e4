use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Rnn,
    Cnn,
    #[serde(rename = "deepset")]
    DeepSet,
}

impl EncoderKind {
    pub const ALL: [EncoderKind; 3] = [EncoderKind::Cnn, EncoderKind::Rnn, EncoderKind::DeepSet];

    pub fn as_str(self) -> &'static str {
        match self {
            EncoderKind::Rnn => "rnn",
            EncoderKind::Cnn => "cnn",
            EncoderKind::DeepSet => "deepset",
        }
    }

    /// Row label used in evaluation tables.
    pub fn display_name(self) -> &'static str {
        match self {
            EncoderKind::Rnn => "RNN",
            EncoderKind::Cnn => "CNN",
            EncoderKind::DeepSet => "Deepset",
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rnn" => Ok(EncoderKind::Rnn),
            "cnn" => Ok(EncoderKind::Cnn),
            "deepset" => Ok(EncoderKind::DeepSet),
            _ => Err(Error::Config(format!(
                "unknown encoder {s:?}; valid kinds are rnn, cnn, deepset"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolingKind {
    Mean,
    Max,
    Sum,
}

impl FromStr for PoolingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(PoolingKind::Mean),
            "max" => Ok(PoolingKind::Max),
            "sum" => Ok(PoolingKind::Sum),
            _ => Err(Error::Config(format!(
                "unknown pooling {s:?}; valid kinds are mean, max, sum"
            ))),
        }
    }
}

/// Column layout of one assembled step:
/// `[source | target | action | Δt | misc keys...]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub d_src: usize,
    pub d_tgt: usize,
    pub d_act: usize,
    /// extra per-interaction scalars read from the record's misc map
    #[serde(default)]
    pub misc_keys: Vec<String>,
}

impl FeatureSpec {
    pub fn new(d_src: usize, d_tgt: usize, d_act: usize) -> Self {
        Self {
            d_src,
            d_tgt,
            d_act,
            misc_keys: Vec::new(),
        }
    }

    /// Δt plus one column per misc key.
    pub fn misc_dims(&self) -> usize {
        1 + self.misc_keys.len()
    }

    pub fn input_dim(&self) -> usize {
        self.d_src + self.d_tgt + self.d_act + self.misc_dims()
    }

    pub fn action_offset(&self) -> usize {
        self.d_src + self.d_tgt
    }

    pub fn delta_offset(&self) -> usize {
        self.d_src + self.d_tgt + self.d_act
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderKind,
    pub hidden: usize,
    pub pooling: PoolingKind,
    pub spec: FeatureSpec,
    pub max_len: usize,
    pub rnn_layers: usize,
    pub cnn_layers: usize,
    pub cnn_width: usize,
    pub deepset_hidden: usize,
    pub head_hidden: usize,
    pub dropout: f64,
}

impl ModelConfig {
    pub fn new(encoder: EncoderKind, spec: FeatureSpec) -> Self {
        Self {
            encoder,
            hidden: 64,
            pooling: PoolingKind::Mean,
            spec,
            max_len: 512,
            rnn_layers: 1,
            cnn_layers: 2,
            cnn_width: 5,
            deepset_hidden: 64,
            head_hidden: 64,
            dropout: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.hidden == 0 || self.head_hidden == 0 || self.deepset_hidden == 0 {
            return fail("hidden sizes must be positive".into());
        }
        if self.max_len == 0 {
            return fail("max_len must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} not in [0, 1)", self.dropout));
        }
        if self.encoder == EncoderKind::Rnn && self.hidden % 2 != 0 {
            return fail(format!("rnn encoder needs an even hidden size, got {}", self.hidden));
        }
        if self.encoder == EncoderKind::Cnn && (self.cnn_width % 2 == 0 || self.cnn_layers == 0) {
            return fail(format!(
                "cnn encoder needs an odd width and at least one layer, got width {} layers {}",
                self.cnn_width, self.cnn_layers
            ));
        }
        Ok(())
    }
}
