//! Two-dimensional point-source super-resolution.

pub mod bounds;
pub mod certificate;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod localize;
pub mod measurement;
pub mod sdp;

pub use error::{Error, Result};
