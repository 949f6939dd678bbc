//! Two-scale bulk-surface finite element engine.

pub mod benchmark;
pub mod cell;
pub mod config;
pub mod error;
pub mod fem;
pub mod macroscale;
pub mod mesh;
pub mod micro;
pub mod output;

pub use error::{Error, Result};
