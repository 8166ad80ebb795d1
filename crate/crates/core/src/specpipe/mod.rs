//! File formats, the cross-molecule statistics pipeline and the command line.

mod cli;
mod modes_csv;
mod scheme_json;
mod spectrum_csv;
mod stats;

use std::path::PathBuf;

use thiserror::Error;

pub use cli::{cli_dispatch, cli_dispatch_to, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK};
pub use modes_csv::{parse_modes_csv, read_modes, sticks_to_csv, ModeValueKind};
pub use scheme_json::{parse_scheme, read_scheme, scheme_to_json, write_scheme};
pub use spectrum_csv::{format_spectrum, parse_spectrum, read_spectrum, write_spectrum};
pub use stats::{
    match_modes, mode_statistics, plot_rows, read_records, records_from_json, ClusterMember, Flag, ModeCluster, ModeFit,
    ModeGroups, ModeStats, MoleculeRecord, PlotRow, Provenance, StateStats, StatsReport, StatsSummary, DEFAULT_MATCH_WINDOW,
    DEFAULT_PAIR_WINDOW,
};

use crate::fcmodel::FcError;
use crate::fitkit::FitError;
use crate::ratesim::RateError;
use crate::spectrum::SpectrumError;
use crate::units::UnitError;

#[derive(Debug, Error)]
pub enum PipeError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Fc(#[from] FcError),
    #[error(transparent)]
    Unit(#[from] UnitError),
}

pub(crate) fn read_text(path: &std::path::Path) -> Result<String, PipeError> {
    std::fs::read_to_string(path).map_err(|source| PipeError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &std::path::Path, text: &str) -> Result<(), PipeError> {
    std::fs::write(path, text).map_err(|source| PipeError::Io {
        path: path.to_path_buf(),
        source,
    })
}
