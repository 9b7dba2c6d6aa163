//! Crack-tip linearization numerics for the Mumford–Shah functional.

pub mod annuli;
pub mod cli;
pub mod cylinder;
pub mod error;
pub mod expansion;
pub mod fields;
pub mod identities;
pub mod linearized;
pub mod nonlinear;
pub mod numerics;
pub mod ventsel;

pub use error::{Error, Result};
