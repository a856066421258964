//! Config-driven experiment runner for `qdbar-core`.
//!
//! One JSON run description per invocation; each run writes one report
//! (CSV or JSON) and a `manifest.json` into the output directory.

// `!(x > 0.0)` is the NaN-rejecting form of the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod run;
pub mod table;

pub use config::{parse_config, Experiment, Format, RunConfig};
pub use error::{CliError, ExitClass};
pub use run::{run_experiment, RunArtifacts};
