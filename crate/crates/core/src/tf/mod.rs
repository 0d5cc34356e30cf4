//! Wave packets, tiles, trees, size and forest selection.

mod forest;
mod split;
mod tile;
mod window;

pub use forest::*;
pub use split::*;
pub use tile::*;
pub use window::*;

use thiserror::Error;

use crate::grid::GridError;
use crate::signal::SignalError;

#[derive(Debug, Error)]
pub enum TfError {
    #[error("tile violates |I|·|ω| = 1 or uses a non-dyadic time interval: {0}")]
    Tile(String),
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("signal: {0}")]
    Signal(#[from] SignalError),
    #[error("coordinate range too wide for exact integer arithmetic")]
    Overflow,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
