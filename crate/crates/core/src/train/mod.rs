//! Training loop, evaluation metric, data splits, score fusion and the
//! multi-split comparison protocol.

mod hybrid;
mod metrics;
mod protocol;
mod report;
mod split;
mod trainer;

pub use hybrid::{train_hybrid, HybridFit, HYBRID_GRAD_TOL, HYBRID_MAX_ITERS};
pub use metrics::pr_auc;
pub use protocol::{
    hybrid_row_name, run_protocol, solo_row_name, threads_from_env, ProtocolConfig,
    REFERENCE_NAME, THREADS_ENV,
};
pub use report::{mad, median, median_gap_report, EvalReport, ReportRow};
pub use split::{split, split_indices, SplitSpec};
pub use trainer::{
    check_compatible, evaluate_loss, resolve_pos_weight, train, train_with, warm_start_from,
    EpochStats, PosWeight, TrainConfig, TrainReport,
};
