//! Dataset loading, one-pass evaluation, metrics and reports.

pub mod dataset;
pub mod metrics;
pub mod ope;
pub mod report;

pub use dataset::{discover_sequences, load_frame, load_sequence, SequenceMeta};
pub use metrics::{auc, center_error, dp_at, iou, precision_curve, success_curve, EvalCurves};
pub use ope::{run_benchmark, run_ope, SequenceResult};
pub use report::{emit_plot_data, Report, ResultsFile};
