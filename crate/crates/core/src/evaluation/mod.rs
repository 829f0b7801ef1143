//! Chronological hold-out, expanding windows, k-fold tuning and reports.

pub mod cv;
pub mod report;
pub mod runner;
pub mod split;

pub use cv::{cross_validate, CvResult, DEFAULT_CV_FOLDS};
pub use report::{
    aggregates, aggregates_from_windows_csv, confusion_files, emit_report, mean_std, render_aggregates, windows_csv, write_report,
    Aggregate, ReportFormat, METRICS,
};
pub use runner::{
    plan_splits, run_evaluation, Cell, CellOutcome, EvalConfig, EvalReport, ModelEntry, RoundingFit, Split,
    SplitInfo, TuningRecord, NO_ROUNDING,
};
pub use split::{
    assert_no_leak, chronological_split, date_groups, expanding_windows, kfold_indices, window_group_spans,
    SplitPlan, Window, WindowSet, DEFAULT_MIN_NEW, DEFAULT_TEST_FRACTION,
};
