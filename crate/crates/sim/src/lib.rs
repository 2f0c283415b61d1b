//! Simulation harness for the search-and-tracking stack: scenario files,
//! closed-loop episodes with metrics, ablation runs, entropy-estimator
//! benchmarks, and the file outputs behind the `sat` command-line tool.

pub mod ablate;
pub mod bench;
pub mod episode;
pub mod report;
pub mod scenario;
