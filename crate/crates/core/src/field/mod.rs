//! Analytic implicit scenes and the counted occupancy/texture oracle.

mod oracle;
mod scene;
pub mod sdf;

pub use oracle::{build_oracle, Color, FieldOracle, OccupancyOracle, DEFAULT_SHARPNESS};
pub use scene::{Axis, CsgNode, CsgOp, Pose, PrimitiveSpec, SceneSpec, Shape, TextureRule};
