//! Synthetic RGB-D scenes and corruption protocols.

mod corrupt;
mod scene;

pub use corrupt::{
    inject_gaussian_noise, mask_holes, random_structured_mask, sample_sparse, Corrupted,
    CorruptionMode, CorruptionSpec,
};
pub use scene::{generate_scene, RoomGeometry, SceneConfig, SceneSample};
