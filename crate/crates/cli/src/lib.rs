//! Batch pipeline and command-line verbs on top of `varlab`.

pub mod cli;
pub mod config;
pub mod error;
pub mod heldout;
pub mod manifest;
pub mod pipeline;
pub mod plot;
pub mod summary;
pub mod synth;

pub use config::PipelineConfig;
pub use error::RunError;
pub use heldout::HeldOut;
pub use manifest::RunManifest;
pub use pipeline::run_pipeline;
pub use plot::emit_plot_data;
pub use synth::{simulate_var, write_dataset, SyntheticSpec};
