//! Experiment front end: configuration, data files and result output.

pub mod config;
pub mod experiment;
pub mod idx;
pub mod pgm;
pub mod preprocess;

pub use config::{ExperimentConfig, ExperimentKind, ReferencePolicy, StopRule, PRESETS};
pub use experiment::{build_graph, build_instances, run_experiment, Instance, RunReport};
pub use idx::{load_idx, load_idx_labels, parse_idx_images, parse_idx_labels};
pub use pgm::{encode_pgm, parse_pgm, write_pgm};
pub use preprocess::preprocess_image;
