//! Model-file handling and machine-readable output for the `transq` binary.

pub mod model;
pub mod output;
