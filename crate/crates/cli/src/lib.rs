//! Command-line front end for `qwrg-core`: run configuration, dispatch and
//! result documents.

pub mod commands;
pub mod config;
pub mod document;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QWRG_OUT_DIR";
