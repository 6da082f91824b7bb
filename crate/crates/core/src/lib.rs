//! Reference devices, Born matrices and morphophoricity analysis for finite-dimensional
//! generalized probabilistic theories, with quantum specializations.

pub mod born;
pub mod device;
pub mod error;
pub mod io;
pub mod linalg;
pub mod morpho;
pub mod quantum;
pub mod space;

pub use error::{Error, Result};
