//! Experiment runner behind the `gramsynth` binary.

mod artifact;
mod commands;
mod config;

pub use artifact::{
    read_telemetry_csv, write_telemetry_csv, RunArtifact, RunStatus, RunSummary, SampleTable, SCHEMA,
    TELEMETRY_COLUMNS,
};
pub use commands::{
    cmd_baseline, cmd_reference, cmd_scale, cmd_synthesize, cmd_underactuated_demo, derive_seed,
    feedback_linearization_baseline, reference_control, scale_problem, ScaleRow, ScaleTrial, UnderactuatedReport,
};
pub use config::{ExperimentConfig, OutputConfig, ReferenceConfig, ScaleConfig, TelemetryFormat, UnderactuatedConfig};
