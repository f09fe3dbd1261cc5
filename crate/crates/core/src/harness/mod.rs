//! Metrics, scenario configuration, the reference experiments and artifact
//! output.

pub mod config;
pub mod metrics;
mod reproduce;
mod scenario;

pub use config::ScenarioConfig;
pub use metrics::{error_norms, ideal_rmse, rmse, settle_time, time_weights};
pub use reproduce::{
    reproduce_figures, reproduce_table1, FigureRun, Table1Row, REFERENCE_RMSE_ABRUPT,
    REFERENCE_RMSE_INCIPIENT, REFERENCE_TABLE1,
};
pub use scenario::{
    eigenpairs_for, run_scenario, write_artifacts, DesignParams, GainSource, MetricsReport,
    RunOptions, Scenario, ScenarioOutcome, SettleRecord, SpectrumSetup, SETTLE_TOL, TRANSIENT,
};
