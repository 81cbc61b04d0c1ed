//! Synthetic sparse linear models and the two benchmark harnesses.

mod model;
mod phase;
mod scaling;
mod table;

pub use model::{
    alternating_signal, default_support_size, gen_linear_model, n_for_theta, rescaled_sample_size,
    support_metrics, LinearModel, LinearModelSpec, SupportMetrics,
};
pub use phase::{
    grid, phase_config_id, recovery_rates, run_phase_transition, spearman, PhaseTransitionConfig,
    PHASE_METRICS,
};
pub use scaling::{is_timing_metric, run_scaling_benchmark, ScalingConfig, TIMING_METRICS};
pub use table::{format_value, ExperimentTable, TableRow, CSV_HEADER};
