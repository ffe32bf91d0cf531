//! A numerical laboratory for generalized nonexpansive mappings: sampled
//! condition checks, averaged iteration schemes for commuting families, and
//! convergence diagnostics.

pub mod conditions;
pub mod error;
pub mod harness;
pub mod iterate;
pub mod mappings;
pub mod schedules;
pub mod vecspace;

pub use error::{Error, Result};
