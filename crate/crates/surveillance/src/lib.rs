//! Aggregate surveillance over anonymous risk reports: an append-only report
//! store, grid heatmaps, outbreak flags, narrowcast selection and the HTTP
//! service that exposes them alongside case assessment.

pub mod grid;
pub mod http;
pub mod report;
pub mod store;

use ctlab_core::covid::ModelError;
use thiserror::Error;

pub use grid::{
    aggregate_grid, detect_outbreaks, export_heatmap, select_narrowcast, CellId, GridCellAggregate, GridSpec,
    NarrowcastSelection, OutbreakFlag, OutbreakRule, RiskStats, Window,
};
pub use http::{router, serve, AppState, ServiceConfig};
pub use report::{AgeGroup, RejectReason, SurveillanceReport};
pub use store::{IngestOutcome, Snapshot, Store};

#[derive(Debug, Error)]
pub enum SurveillanceError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("report log corrupt at line {line}: {detail}")]
    Corrupt { line: usize, detail: String },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("model: {0}")]
    Model(#[from] ModelError),
}
