//! Synthetic teacher: a closed-form atmosphere over procedural surfaces
//! and clouds, tile files, manifests, patches and input scaling.

pub mod dataset;
pub mod field;
pub mod normalize;
pub mod patches;
pub mod physics;
pub mod scene;
pub mod teacher;
pub mod tile;

pub use dataset::{
    build_dataset, check_disjoint, generate_dataset, load_dataset, regenerate, Dataset, Manifest,
    ManifestEntry, Split, MANIFEST_FILE,
};
pub use normalize::{fit_stats, NormStats, STD_FLOOR};
pub use patches::{crop, extract_patches, patch_origins, tile_sample, PATCH_SIZE};
pub use physics::{
    coefficients, surface_reflectance, toa_reflectance, BandSpec, Coefficients, BANDS,
};
pub use scene::{generate_scene, toa_forward, SceneConfig, SceneParams};
pub use tile::{
    build_tile, Raster, TileDataset, CLASS_MAP, CLEAR_MASK, INPUT_CHANNELS, TEACHER_CHANNELS,
};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid data configuration: {0}")]
    Config(String),
    #[error("raster shape error: {0}")]
    Shape(String),
    #[error("raster has no channel `{0}`")]
    MissingChannel(String),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("tile format version {found} is not supported (expected {expected})")]
    Version { found: u16, expected: u16 },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error(transparent)]
    Tensor(#[from] crate::autodiff::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
