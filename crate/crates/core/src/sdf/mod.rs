//! Latent-parameterized signed distance fields, sphere tracing and surface
//! extraction.

mod family;
mod grid_io;
mod mc;
mod shape;
mod trace;

pub use family::{BowlParams, FamilyKind, GridSpec};
pub use grid_io::{decode_grid, encode_grid, read_grid, write_grid};
pub use mc::marching_cubes;
pub use shape::{ParamGradient, SdfShape, BOWL_RIM, MAX_CLOSED_PARAMS, PLACEMENT_PARAMS};
pub(crate) use trace::estimate_derivative;
pub use trace::{
    sphere_trace, trace_iterates, trace_scene, trace_with, DepthDerivative, EstimateDerivative, SdfHit,
    SurfaceEstimate, TraceConfig, GRAZE_TOL,
};
