//! File formats, experiment runner and command-line front end for
//! [`ris_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod manifest;
pub mod matrix_io;
pub mod render;
pub mod sweep;

pub use error::ImagerError;
