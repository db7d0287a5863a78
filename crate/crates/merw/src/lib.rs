//! Command-line front end for `merw-core`: run configuration, parallel
//! ensembles, CSV/JSON outputs with reproducibility manifests, and the
//! verification suites.

pub mod cli;
pub mod config;
pub mod exec;
pub mod expect;
pub mod output;
pub mod suites;
