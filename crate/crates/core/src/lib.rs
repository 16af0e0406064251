//! Repeated projective measurements on finite quantum systems: unistochastic
//! transition matrices, two-point-measurement heat statistics, and the
//! asymptotic regimes of long measurement sequences.

pub mod asymptotics;
pub mod error;
pub mod heat_stats;
pub mod hilbert;
pub mod io;
pub mod linalg;
pub mod protocol;
pub mod stats;
pub mod tolerance;
pub mod transition;

pub use error::{Error, Result};
