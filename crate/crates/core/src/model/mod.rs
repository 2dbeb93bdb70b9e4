//! The sequence classifier: feature assembly, encoders, attention, pooling,
//! scoring head and checkpoints.

mod attention;
mod checkpoint;
mod config;
mod features;
mod pool;
mod ties;
mod vocab;

pub use attention::{Attention, AttentionCache};
pub use checkpoint::{load_model, load_model_as, save_model, FORMAT_VERSION, MANIFEST_FILE};
pub use config::{EncoderKind, FeatureSpec, ModelConfig, PoolingKind};
pub use features::{
    assemble_dataset, assemble_features, delta_t, AssemblyWarnings, EntityTables, SequenceExample,
};
pub use pool::{pool, pool_backward, PoolCache};
pub use ties::{model_init, Encoder, ForwardCache, TiesModel, TiesOutput, ACTION_INIT_BOUND};
pub use vocab::{ActionVocab, PAD_ACTION};
