//! Shape and contact-force sensing for a continuum rod instrumented with a
//! single helically wrapped FBG fiber.
//!
//! The crate covers the forward simulator ([`fbg`], [`geometry`], [`force`]),
//! a model-based reconstruction ([`model_based`]), synthetic corpora
//! ([`dataset`]), learned estimators ([`nn`]) and evaluation ([`eval`]).

mod binio;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fbg;
pub mod force;
pub mod geometry;
pub mod model_based;
pub mod nn;

pub use error::{Error, ErrorKind, Result};
pub use fbg::{SensorLayout, StrainFrame};
pub use force::{ContactForce, ForceDistribution};
pub use geometry::{RodShape, WorkspaceConfig};
