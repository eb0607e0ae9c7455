//! Experiment protocol: configuration, simulated data, initial paths, the
//! exhaustive oracle, parallel sweeps and their reports.

pub mod config;
pub mod data;
pub mod init;
pub mod oracle;
pub mod report;
pub mod sweep;

pub use config::{EmissionSpec, ExperimentConfig, GridEntry, InitSpec, SaSpec, Seeds, SegmenterSpec, TruthSpec};
pub use data::Dataset;
pub use init::{generate_initial_sequences, markov_realization, pointwise_max_path, stationary_distribution, InitialSequences};
pub use oracle::{brute_force_map, compare_paths, MAX_PATHS};
pub use report::{render_dir_text, write_tables, Table};
pub use sweep::{initial_sequences, run_sweep, simulate_datasets, win_loss, ResultRow, WinLoss};
