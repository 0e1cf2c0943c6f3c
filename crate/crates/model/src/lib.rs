//! Neural deformation modules: apparel segmentation, geodesic-attention
//! body skinning with linear blend skinning, autoregressive apparel
//! displacement, and joint refinement.

pub mod apparel;
pub mod body;
mod error;
pub mod losses;
pub mod partition;
pub mod refine;
pub mod segmentation;

pub use apparel::{ApparelConfig, ApparelGraph, ApparelNet};
pub use body::{BodyNet, FusionVariant};
pub use error::ModelError;
pub use partition::Partition;
pub use refine::RefineNet;
pub use segmentation::{ApparelMask, SegmentationNet};
