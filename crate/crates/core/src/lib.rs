pub mod diff;
pub mod emitter;
pub mod error;
pub mod geometry;
pub mod io;
pub mod optimize;
pub mod real;
pub mod render;
pub mod scene;
pub mod sdf;
pub mod synthetic;

pub use error::{Error, Result};
