//! Shape primitives, voxel grids and anchor-centric pairwise views.

mod pair;
pub mod polygon;
mod shape;
mod voxel;

pub use pair::{
    pairwise_view, region_index, region_index_masks, region_offset, voxel_center_distance,
    VoxelPairInput, REGION_COUNT,
};
pub use shape::{ObjectInstance, ShapeKind, MAX_DIM, MIN_DIM};
pub use voxel::{voxelize, GridSpec, VoxelGrid, Voxelization};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Vec2 = nalgebra::Vector2<f64>;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid object: {0}")]
    InvalidObject(String),
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),
    #[error("no objects to voxelize")]
    NoObjects,
    #[error("object id {0} not in scene")]
    UnknownObject(usize),
    #[error("anchor and referrant must differ (both {0})")]
    SameObject(usize),
    #[error("channel {0} is empty")]
    EmptyChannel(usize),
    #[error("empty referrant")]
    EmptyReferrant,
    #[error("empty anchor")]
    EmptyAnchor,
    #[error("channel {0} out of range")]
    BadChannel(usize),
}
