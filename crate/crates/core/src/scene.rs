use crate::emitter::EmitterModel;
use crate::error::{Error, Result};
use crate::sdf::SdfShape;

/// Placed mirrors plus the emitter they reflect.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub objects: Vec<SdfShape>,
    pub emitter: EmitterModel,
    /// Capsule tessellation density (segments per ring).
    pub segments: usize,
}

impl Scene {
    pub fn new(objects: Vec<SdfShape>, emitter: EmitterModel, segments: usize) -> Result<Scene> {
        if segments < 6 {
            return Err(Error::Invalid(format!("segments {segments} below 6")));
        }
        Ok(Scene {
            objects,
            emitter,
            segments,
        })
    }
}
