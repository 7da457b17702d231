//! Classification metrics, convolution cost arithmetic, dataset evaluation
//! and timing.

mod bench;
mod conv;
mod eval;
mod metrics;

pub use bench::{bench_detect, BenchReport};
pub use conv::{conv_steps, ConvStepParams, ConvSteps};
pub use eval::{evaluate_dataset, predict_label, EvalFailure, EvalSample, EvalSummary, ImageLabelRule};
pub use metrics::{class_metrics, f1_score, macro_average, metrics_table, ClassMetrics, ConfusionMatrix, MacroAverage};
