//! Reconstruction of structured meshes from silhouette masks by fitting the
//! parameters of procedural generators.

pub mod autodiff;
pub mod error;
pub mod generators;
pub mod io;
pub mod loss;
pub mod optim;
pub mod pipeline;
pub mod params;
pub mod render;

pub use error::{Error, Result};
