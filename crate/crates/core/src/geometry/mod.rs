//! Vectors, rotations, rigid transforms, the pinhole camera, triangle meshes
//! and the ray/triangle kernels the renderer is built on.

mod camera;
mod mesh;
mod raytri;
mod rotation;
mod transform;
mod vec;

pub use camera::{Camera, Ray};
pub use mesh::{TriMesh, MIN_TRIANGLE_AREA};
pub use raytri::{
    ray_point_distance, ray_triangle_closest, ray_triangle_distance, ray_triangle_edge_closest,
    ray_triangle_intersect,
    Feature, RayTriangleClosest, Triangle,
};
pub use rotation::{axis_angle_matrix, left_jacobian, Quat};
pub use transform::Se3Scale;
pub use vec::{Mat3, Vec3};
