//! Multipath radar echo simulation and a three-stage pipeline that detects a
//! reflective surface, decides whether the strongest target return arrived
//! directly or via the surface, and localizes the target.

pub mod classify;
pub mod clean;
pub mod echo;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod localize;
pub mod plot;
pub mod ra;
pub mod rng;
pub mod scenario;
pub mod surface;

pub use error::{Error, Result};
