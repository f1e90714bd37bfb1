//! Metrics, leave-one-clip-out cross-validation and result tables.

mod loocv;
mod metrics;
mod table;

pub use loocv::{
    evaluate_model, predict_clip, run_loocv, score_clip, ClipCurves, EvalReport, FoldEvent, FoldObserver,
    FoldOutcome, FoldResult, LoocvSpec,
};
pub use metrics::{accuracy, accuracy_pm1, mae_mse, pearson, pearson_flagged, Correlation, Metrics};
pub use table::render_table;
