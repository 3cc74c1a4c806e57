//! Built-in scenarios, the run harness and output files.

mod config;
mod harness;
mod output;

pub use config::{
    builtin_scenario, AuditMode, ConvergenceSpec, EntropySpec, GridSpec, ProfileSpec,
    ScenarioConfig, Step, BUILTIN_NAMES,
};
pub use harness::{
    compare_trajectories, frozen_trajectory, run_compare, run_convergence, run_entropy_audit,
    run_godunov, run_particles, AuditEntry, AuditReport, AuditSource, CompareReport, CompareRow,
    ConvergenceRow, ConvergenceTable, ParticleOutcome,
};
pub use output::{
    emit_compare, emit_convergence, emit_entropy_audit, emit_godunov, emit_particles, method_dir,
    metrics_rows, write_density_csv, write_jsonl, write_meta, write_metrics_csv,
    write_trajectory_csv, MetricsRow, FORMAT_VERSION,
};
