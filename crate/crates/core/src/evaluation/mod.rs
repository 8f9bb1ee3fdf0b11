//! Metrics and the three evaluation protocols.

mod metrics;
mod protocols;
mod report;
mod splits;

pub use metrics::{compute_metrics, ConfusionCounts, Metrics, Rate};
pub use protocols::{
    ablation_curve, leave_one_out, transferability_matrix, AblationPoint, EvalCell, EvalSettings,
    Protocol,
};
pub use report::EvalReport;
pub use splits::{
    group_by_generator, name_label, stratified_split, stratified_subsample, GeneratorPairs,
};

/// Ablation sizes used when none are configured.
pub const DEFAULT_ABLATION_SIZES: [usize; 5] = [10, 30, 100, 300, 1000];
/// Repeats per ablation size.
pub const DEFAULT_ABLATION_REPEATS: usize = 3;
