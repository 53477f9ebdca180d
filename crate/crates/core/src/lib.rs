//! Scalable RIS beamforming by surface partitioning.
//!
//! The RIS is split into sub-surfaces, each steering one Tx-RIS path onto
//! one RIS-Rx path with a linear phase gradient. In the large-array regime
//! the rate problem reduces to a joint power / surface-share allocation
//! solved in [`solver`], and [`finite`] maps the result back to a concrete
//! reflection vector and transmit covariance.

pub mod asymptotic;
pub mod channel;
pub mod error;
pub mod finite;
pub mod oracle;
pub mod partition;
pub mod solver;

pub use error::{Error, Result};
