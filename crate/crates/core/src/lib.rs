//! Quantum simulation pipeline for the time-domain Maxwell equations on a
//! Yee grid: operator assembly, Schrödingerisation, Bell-basis Trotter
//! circuits, statevector simulation and sign-resolved field readout, checked
//! against a classical exponential oracle.

pub mod bell;
pub mod circuit;
pub mod cli;
pub mod config;
pub mod curl;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod measure;
pub mod oracle;
pub mod pipeline;
pub mod schrodinger;
pub mod sparse;

pub use error::{Error, Result};
