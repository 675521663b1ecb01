//! Command-line driver: configuration, runs and reports.

pub mod config;
pub mod io;
pub mod report;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{parse_config, ConfigError, Mode, RunConfig};
pub use report::{emit_plot_data, extrapolate, CompareReport, SweepRecord};
pub use run::{run, RunSummary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: plateau_core::formats::FormatError },
    #[error(transparent)]
    Plateau(#[from] plateau_core::PlateauError),
    #[error(transparent)]
    Energy(#[from] plateau_core::EnergyError),
    #[error(transparent)]
    Grid(#[from] plateau_sim::GridError),
    #[error(transparent)]
    Minimize(#[from] plateau_sim::MinimizeError),
    #[error(transparent)]
    Boundary(#[from] plateau_sim::BoundaryError),
    #[error(transparent)]
    Extract(plateau_sim::ExtractError),
    #[error(transparent)]
    Diagnostic(plateau_sim::energy::DiagnosticError),
    #[error("no records to plot")]
    EmptyRecords,
    #[error("extrapolation needs at least 3 exponents, got {0}")]
    TooFewExponents(usize),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Everything that reaches `main` as an error is a configuration or
    /// internal failure; infeasible problems come back in [`RunSummary`].
    pub fn exit_code(&self) -> i32 {
        2
    }
}
