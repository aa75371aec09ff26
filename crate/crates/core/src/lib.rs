//! Human-aware speed regulation for collaborative robot cells.

pub mod body;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod perception;
pub mod reference;
pub mod regulator;
pub mod safety;
pub mod sim;

pub use body::BodyPartLabel;
pub use error::{Error, Result};
