//! 2.5D indoor environments: extruded corridor floor plans, a raycast
//! camera, clearance queries and collision-aware motion.

pub mod floorplan;
pub mod generate;
pub mod geometry;
pub mod motion;
pub mod presets;
pub mod render;

pub use floorplan::{AgentPose, FloorPlan, Wall, D_CRASH, TEXTURE_POOL};
pub use generate::{generate_floorplan, meta_texture_overlap, texture_subset, GenParams};
pub use geometry::Vec2;
pub use motion::{min_clearance, sweep_move, Cone, MoveOutcome};
pub use presets::{meta_library, Preset};
pub use render::{cast_ray, render, Camera, Observation, RayHit, FAR_PLANE, NEAR_PLANE};

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("pose ({x:.3}, {y:.3}, {z:.3}) is inside a wall or outside the room")]
    PoseInWall { x: f64, y: f64, z: f64 },
    #[error("floor plan line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}
