//! Command-line front end for the LPP laboratory: flat TOML configs in,
//! deterministic CSV/JSON/SVG artifacts out, plus exhaustive-oracle
//! self-tests and reference-table checks.

pub mod config;
pub mod output;
pub mod plot;
pub mod selftest;

/// Boxed error for CLI plumbing; typed library errors pass through.
pub type BoxError = Box<dyn std::error::Error + Send + Sync>;
pub type CliResult<T> = std::result::Result<T, BoxError>;
