//! Defect-tolerant planar surface code toolchain.
//!
//! Pipeline: [`lattice`] chips with faulty devices, [`stabilizers`] merged around
//! them, [`circuits`] compiled and scheduled asynchronously, [`noise`] simulated
//! with Pauli frames, [`nest`] built by propagating every fault, [`decoder`]
//! matching over a sliding window, [`montecarlo`] sweeps and [`metrics`].

pub mod circuits;
pub mod decoder;
pub mod formats;
pub mod lattice;
pub mod metrics;
pub mod montecarlo;
pub mod nest;
pub mod noise;
pub mod pipeline;
pub mod stabilizers;

pub use lattice::{Chip, DeviceId, Kind, Role};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unencodable chip: {0}")]
    Unencodable(String),
    #[error("uncoverable stabilizer: {0}")]
    Uncoverable(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
