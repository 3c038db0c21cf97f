//! Desk-scale benchmark harness: synthetic pools, the surrogate segmenter,
//! and the three-scenario experiment matrix with Fig-style delta reports.

mod config;
mod runner;
mod surrogate;
mod synthetic;

pub use config::{parse_config, ExperimentConfig, SurrogateParams};
pub use runner::{
    emit_report, run_benchmark, CellKey, CellResult, CellSuccess, ExperimentReport, RandomStats,
    SampleMetrics, TrendLine,
};
pub use surrogate::{
    surrogate_predict, surrogate_predict_stack, surrogate_train, SurrogateModel, DESCRIPTOR_DIM,
};
pub use synthetic::{generate_pool, SampleProvenance, SyntheticPool, SyntheticSpec};
