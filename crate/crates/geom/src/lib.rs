//! Mesh, skeleton and motion data model for the deformation pipeline:
//! rigged characters, motion clips, geodesic distances, retargeting
//! primitives and the on-disk scene/motion/OBJ formats.

mod error;
pub mod geodesic;
pub mod io;
pub mod mesh;
pub mod retarget;
pub mod skinning;
pub mod types;

pub use error::GeomError;
pub use geodesic::{compute_geodesic_matrix, GeodesicMatrix};
pub use mesh::{boundary_edges, mesh_edges};
pub use retarget::{bone_lengths, scale_translations};
pub use skinning::lbs_apply;
pub use types::{DeformationClip, JointTransform, MotionClip, RiggedCharacter};
