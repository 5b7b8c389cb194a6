//! Experiment orchestration for `amcbo`: configuration, repeated runs,
//! parameter sweeps, summary tables, reference-front caching and plot data.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod reference;
pub mod sweep;
pub mod table;

pub use config::{ExperimentConfig, Overrides, SweepAxis};
pub use experiment::{
    execute, run_experiment, ExperimentResult, MetricMeans, RunOutcome, SummaryRow, SummaryTable,
};
pub use plot::{emit_plot_data, PlotKind, PlotSource};
pub use sweep::{run_sweep, SweepResult};
