//! Deterministic performance harness: per-module runtime breakdown,
//! linear-scaling verification, activation-memory audit, gate statistics,
//! and hyperparameter sensitivity sweeps.

mod gates;
mod report;
mod run;
mod sweep;

pub use gates::gate_stats;
pub use report::{
    BenchReport, BreakdownEntry, GateStats, MemoryReport, MemoryRow, ScalingReport, ScalingRow,
    SweepReport, SweepRow, ThroughputReport,
};
pub use run::{
    audit_memory, bench_breakdown, bench_config, bench_scaling, bench_throughput,
    DEFAULT_REPEATS, DEFAULT_WARMUPS,
};
pub use sweep::{sweep, SweepGrid, SweepSettings};
