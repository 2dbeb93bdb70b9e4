use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{
    active_rows, dropout, sigmoid, BiLstm, BiLstmCache, ConvCache, ConvStack, Mlp, MlpCache,
    Module, Parameter, Tensor2D,
};

use super::attention::{Attention, AttentionCache};
use super::config::{EncoderKind, ModelConfig};
use super::features::{EntityTables, SequenceExample};
use super::pool::{pool, pool_backward, PoolCache};
use super::vocab::ActionVocab;

pub const ACTION_INIT_BOUND: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub enum Encoder {
    Rnn(BiLstm),
    Cnn(ConvStack),
    /// `ρ(Σ_t φ(x_t))`
    DeepSet { phi: Mlp, rho: Mlp },
}

impl Encoder {
    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::Rnn(_) => EncoderKind::Rnn,
            Encoder::Cnn(_) => EncoderKind::Cnn,
            Encoder::DeepSet { .. } => EncoderKind::DeepSet,
        }
    }
}

impl Module for Encoder {
    fn params(&self) -> Vec<&Parameter> {
        match self {
            Encoder::Rnn(m) => m.params(),
            Encoder::Cnn(m) => m.params(),
            Encoder::DeepSet { phi, rho } => {
                let mut p = phi.params();
                p.extend(rho.params());
                p
            }
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        match self {
            Encoder::Rnn(m) => m.params_mut(),
            Encoder::Cnn(m) => m.params_mut(),
            Encoder::DeepSet { phi, rho } => {
                let mut p = phi.params_mut();
                p.extend(rho.params_mut());
                p
            }
        }
    }
}

/// Sequence classifier: feature rows → encoder → (attention → pooling) →
/// MLP head → probability.
#[derive(Clone, Debug, PartialEq)]
pub struct TiesModel {
    pub config: ModelConfig,
    pub vocab: ActionVocab,
    pub entities: EntityTables,
    /// `|vocab| × d_act`; row 0 (padding) stays zero
    pub actions: Parameter,
    pub encoder: Encoder,
    /// absent for the DeepSet encoder
    pub attention: Option<Attention>,
    pub head: Mlp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TiesOutput {
    pub score: f64,
    pub logit: f64,
    /// pooled sequence embedding `z`
    pub embedding: Vec<f64>,
}

#[derive(Clone, Debug)]
enum SeqCache {
    Rnn(BiLstmCache),
    Cnn(ConvCache),
}

#[derive(Clone, Debug)]
enum EncoderCache {
    Sequence {
        seq: SeqCache,
        attention: AttentionCache,
        z_scale: Option<Tensor2D>,
        pool: PoolCache,
    },
    DeepSet {
        active: Vec<usize>,
        phi: MlpCache,
        rho: MlpCache,
    },
}

/// Intermediate values needed by [`TiesModel::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    rows: usize,
    x_scale: Option<Tensor2D>,
    encoder: EncoderCache,
    head: MlpCache,
}

pub fn model_init(
    config: ModelConfig,
    vocab: ActionVocab,
    entities: EntityTables,
    seed: u64,
) -> Result<TiesModel> {
    config.validate()?;
    let spec = &config.spec;
    if entities.sources.dim() != spec.d_src || entities.targets.dim() != spec.d_tgt {
        return Err(Error::Config(format!(
            "entity tables are {}/{} wide but the feature spec expects {}/{}",
            entities.sources.dim(),
            entities.targets.dim(),
            spec.d_src,
            spec.d_tgt
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.input_dim();
    let h = config.hidden;
    let mut actions = Tensor2D::uniform(vocab.len(), spec.d_act, ACTION_INIT_BOUND, &mut rng);
    actions.row_mut(0).fill(0.0);
    let encoder = match config.encoder {
        EncoderKind::Rnn => Encoder::Rnn(BiLstm::new(d, h, config.rnn_layers, &mut rng)?),
        EncoderKind::Cnn => Encoder::Cnn(ConvStack::new(
            d,
            h,
            config.cnn_layers,
            config.cnn_width,
            &mut rng,
        )?),
        EncoderKind::DeepSet => Encoder::DeepSet {
            phi: Mlp::new(&[d, config.deepset_hidden, h], &mut rng)?,
            rho: Mlp::new(&[h, config.deepset_hidden, h], &mut rng)?,
        },
    };
    let attention = match config.encoder {
        EncoderKind::DeepSet => None,
        _ => Some(Attention::new(h, &mut rng)),
    };
    let head = Mlp::new(&[h, config.head_hidden, 1], &mut rng)?;
    Ok(TiesModel {
        config,
        vocab,
        entities,
        actions: Parameter::new(actions),
        encoder,
        attention,
        head,
    })
}

impl TiesModel {
    pub fn kind(&self) -> EncoderKind {
        self.config.encoder
    }

    /// Parameters with stable names, in [`Module::params`] order.
    pub fn named_params(&self) -> Vec<(String, &Parameter)> {
        let mut out = vec![("actions".to_string(), &self.actions)];
        for (i, p) in self.encoder.params().into_iter().enumerate() {
            out.push((format!("encoder.{i}"), p));
        }
        if let Some(a) = &self.attention {
            for (n, p) in ["query", "key", "value"].iter().zip(a.params()) {
                out.push((format!("attention.{n}"), p));
            }
        }
        for (i, p) in self.head.params().into_iter().enumerate() {
            out.push((format!("head.{i}"), p));
        }
        out
    }

    /// Resets the padding action row to zero.
    pub fn freeze_padding(&mut self) {
        self.actions.value.row_mut(0).fill(0.0);
        self.actions.grad.row_mut(0).fill(0.0);
    }

    /// Full feature matrix with the action block filled in.
    pub fn input_matrix(&self, ex: &SequenceExample) -> Result<Tensor2D> {
        let spec = &self.config.spec;
        let d = spec.input_dim();
        if ex.features.cols() != d {
            return Err(Error::shape("example features", ex.features.shape(), (ex.len(), d)));
        }
        if ex.mask.len() != ex.features.rows() || ex.actions.len() != ex.features.rows() {
            return Err(Error::shape(
                "example mask",
                ex.features.shape(),
                (ex.mask.len(), ex.actions.len()),
            ));
        }
        let off = spec.action_offset();
        let mut x = ex.features.clone();
        for t in 0..x.rows() {
            let a = ex.actions[t];
            if !ex.mask[t] || a == 0 {
                continue;
            }
            if a >= self.vocab.len() {
                return Err(Error::Vocabulary(format!("action index {a}")));
            }
            x.row_mut(t)[off..off + spec.d_act].copy_from_slice(self.actions.value.row(a));
        }
        Ok(x)
    }

    /// Forward pass. With `training` set, dropout is drawn from `rng`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        ex: &SequenceExample,
        training: bool,
        rng: &mut R,
    ) -> Result<(TiesOutput, ForwardCache)> {
        if !ex.mask.iter().any(|&m| m) {
            return Err(Error::Contract(format!("example {:?} has no real steps", ex.source_id)));
        }
        let p = self.config.dropout;
        let (x, x_scale) = dropout(&self.input_matrix(ex)?, p, training, rng)?;
        let (z, encoder) = match &self.encoder {
            Encoder::DeepSet { phi, rho } => {
                let active = active_rows(&ex.mask);
                let (per_step, phi_cache) = phi.forward(&x.gather_rows(&active))?;
                let mut summed = vec![0.0; per_step.cols()];
                for r in 0..per_step.rows() {
                    summed.iter_mut().zip(per_step.row(r)).for_each(|(s, v)| *s += v);
                }
                let (z, rho_cache) = rho.forward(&Tensor2D::row_vector(&summed))?;
                (
                    z,
                    EncoderCache::DeepSet {
                        active,
                        phi: phi_cache,
                        rho: rho_cache,
                    },
                )
            }
            seq_encoder => {
                let (h, seq) = match seq_encoder {
                    Encoder::Rnn(m) => {
                        let (h, c) = m.forward(&x, &ex.mask)?;
                        (h, SeqCache::Rnn(c))
                    }
                    Encoder::Cnn(m) => {
                        let (h, c) = m.forward(&x, &ex.mask)?;
                        (h, SeqCache::Cnn(c))
                    }
                    Encoder::DeepSet { .. } => unreachable!(),
                };
                let attn = self.attention.as_ref().expect("sequence encoders carry attention");
                let (zs, attention) = attn.forward(&h, &ex.mask)?;
                let (zs, z_scale) = dropout(&zs, p, training, rng)?;
                let (z, pool) = pool(&zs, &ex.mask, self.config.pooling)?;
                (
                    z,
                    EncoderCache::Sequence {
                        seq,
                        attention,
                        z_scale,
                        pool,
                    },
                )
            }
        };
        let (logit, head) = self.head.forward(&z)?;
        let logit = logit.get(0, 0);
        Ok((
            TiesOutput {
                score: sigmoid(logit),
                logit,
                embedding: z.into_vec(),
            },
            ForwardCache {
                rows: ex.len(),
                x_scale,
                encoder,
                head,
            },
        ))
    }

    /// Accumulates parameter gradients given d(loss)/d(logit).
    pub fn backward(&mut self, ex: &SequenceExample, cache: &ForwardCache, dlogit: f64) {
        let dz = self.head.backward(&cache.head, &Tensor2D::row_vector(&[dlogit]));
        let mut dx = match (&mut self.encoder, &cache.encoder) {
            (Encoder::DeepSet { phi, rho }, EncoderCache::DeepSet { active, phi: pc, rho: rc }) => {
                let dsum = rho.backward(rc, &dz);
                let mut dsteps = Tensor2D::zeros(active.len(), dsum.cols());
                for r in 0..active.len() {
                    dsteps.row_mut(r).copy_from_slice(dsum.row(0));
                }
                phi.backward(pc, &dsteps).scatter_rows(active, cache.rows)
            }
            (
                encoder,
                EncoderCache::Sequence {
                    seq,
                    attention,
                    z_scale,
                    pool,
                },
            ) => {
                let mut dzs = pool_backward(pool, &dz);
                if let Some(s) = z_scale {
                    dzs = dzs.hadamard(s);
                }
                let attn = self.attention.as_mut().expect("sequence encoders carry attention");
                let dh = attn.backward(attention, &dzs);
                match (encoder, seq) {
                    (Encoder::Rnn(m), SeqCache::Rnn(c)) => m.backward(c, &dh),
                    (Encoder::Cnn(m), SeqCache::Cnn(c)) => m.backward(c, &dh),
                    _ => unreachable!("cache built by this encoder"),
                }
            }
            _ => unreachable!("cache built by this encoder"),
        };
        if let Some(s) = &cache.x_scale {
            dx = dx.hadamard(s);
        }
        let spec = &self.config.spec;
        let off = spec.action_offset();
        for t in 0..ex.len() {
            let a = ex.actions[t];
            if !ex.mask[t] || a == 0 {
                continue;
            }
            let src = &dx.row(t)[off..off + spec.d_act];
            self.actions
                .grad
                .row_mut(a)
                .iter_mut()
                .zip(src)
                .for_each(|(g, v)| *g += v);
        }
    }

    /// Forward pass with dropout drawn from `rng` when `training`.
    pub fn encode(&self, ex: &SequenceExample, training: bool, rng: &mut dyn RngCore) -> Result<TiesOutput> {
        self.forward(ex, training, rng).map(|(out, _)| out)
    }

    /// Deterministic inference.
    pub fn score(&self, ex: &SequenceExample) -> Result<TiesOutput> {
        self.forward(ex, false, &mut NoRandomness).map(|(out, _)| out)
    }

    /// Scores many examples in parallel; output order follows the input.
    pub fn score_all(&self, examples: &[SequenceExample]) -> Result<Vec<TiesOutput>> {
        examples.par_iter().map(|ex| self.score(ex)).collect()
    }

    /// Attention weights between the real steps of `ex` and the positions
    /// they refer to; `None` for the DeepSet encoder.
    pub fn attention_weights(&self, ex: &SequenceExample) -> Result<Option<(Vec<usize>, Tensor2D)>> {
        let Some(attn) = &self.attention else {
            return Ok(None);
        };
        let x = self.input_matrix(ex)?;
        let h = match &self.encoder {
            Encoder::Rnn(m) => m.forward(&x, &ex.mask)?.0,
            Encoder::Cnn(m) => m.forward(&x, &ex.mask)?.0,
            Encoder::DeepSet { .. } => return Ok(None),
        };
        let (_, cache) = attn.forward(&h, &ex.mask)?;
        Ok(Some((cache.positions().to_vec(), cache.weights().clone())))
    }
}

impl Module for TiesModel {
    fn params(&self) -> Vec<&Parameter> {
        let mut p = vec![&self.actions];
        p.extend(self.encoder.params());
        if let Some(a) = &self.attention {
            p.extend(a.params());
        }
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = vec![&mut self.actions];
        p.extend(self.encoder.params_mut());
        if let Some(a) = &mut self.attention {
            p.extend(a.params_mut());
        }
        p.extend(self.head.params_mut());
        p
    }
}

/// Rng for inference paths that never draw.
struct NoRandomness;

impl RngCore for NoRandomness {
    fn next_u32(&mut self) -> u32 {
        unreachable!("inference does not sample")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("inference does not sample")
    }

    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("inference does not sample")
    }
}
