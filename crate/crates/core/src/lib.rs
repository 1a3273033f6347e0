//! Quality assessment toolkit for super-resolved compressed video.

pub mod analysis;
pub mod erqa;
pub mod fusion;
pub mod error;
pub mod media;
pub mod metrics;
pub mod neural;
pub mod subjective;

pub use error::{Error, Result};
