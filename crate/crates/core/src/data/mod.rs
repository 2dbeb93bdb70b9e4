//! Interaction logs, labels, score files, the synthetic generator and the
//! 2-D projection export.

mod dataset;
mod pca;
mod records;
mod synth;

pub use dataset::{
    build_dataset, group_by_source, parse_labels, read_labels, read_scores, write_labels, write_scores,
    BuildStats, LabeledDataset,
};
pub use pca::{centroid_separation, export_pca_projection, pca_2d};
pub use records::{
    parse_interactions, parse_interactions_str, write_interactions, InteractionRecord,
    MalformedLine, ParsedLog, MAX_MALFORMED_FRACTION,
};
pub use synth::{
    action_name, files, gaps, generate_synthetic, mean_gap, write_synthetic, SynthConfig,
    SyntheticData, ABUSE_ACTIONS, NORMAL_MEAN_GAP_SECS,
};
