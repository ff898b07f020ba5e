//! Pinhole raycaster producing three synthetic channels per pixel:
//! normalized inverse depth, hit-surface texture, and incidence `|cos|`.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Sub};

use super::floorplan::{AgentPose, FloorPlan, TEXTURE_POOL};
use super::geometry::{point_segment_distance, ray_segment, Vec2};
use super::EnvError;

pub const FAR_PLANE: f64 = 10.0;
/// Depth mapped to inverse-depth value 1.
pub const NEAR_PLANE: f64 = 0.25;
pub const FLOOR_TEXTURE: u8 = 0;
pub const CEILING_TEXTURE: u8 = TEXTURE_POOL - 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Camera {
    pub height: usize,
    pub width: usize,
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
}

impl Default for Camera {
    fn default() -> Self {
        Self { height: 64, width: 64, fov_h_deg: 90.0, fov_v_deg: 90.0 }
    }
}

impl Camera {
    /// Horizontal image-plane offset of column `u` (unit focal length);
    /// exactly antisymmetric about the image centre.
    pub fn column_offset(&self, u: usize) -> f64 {
        let half = (self.fov_h_deg.to_radians() / 2.0).tan();
        (u as f64 + 0.5 - self.width as f64 / 2.0) * (2.0 * half / self.width as f64)
    }

    /// Vertical image-plane offset of row `v`, positive upwards.
    pub fn row_offset(&self, v: usize) -> f64 {
        let half = (self.fov_v_deg.to_radians() / 2.0).tan();
        (self.height as f64 / 2.0 - v as f64 - 0.5) * (2.0 * half / self.height as f64)
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, 3]
    }
}

/// `H x W x 3` observation, row-major, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Observation {
    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn channel(&self, c: usize) -> impl Iterator<Item = f32> + '_ {
        self.data.iter().skip(c).step_by(3).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub texture: Option<u8>,
    /// `|cos|` between the ray and the surface normal.
    pub incidence: f64,
}

impl RayHit {
    fn far() -> Self {
        RayHit { distance: FAR_PLANE, texture: None, incidence: 0.0 }
    }

    /// Pixel channels for this hit.
    pub fn channels(&self) -> [f32; 3] {
        let inv = (1.0 / self.distance - 1.0 / FAR_PLANE) / (1.0 / NEAR_PLANE - 1.0 / FAR_PLANE);
        let tex = self.texture.map_or(0.0, |t| t as f64 / (TEXTURE_POOL - 1) as f64);
        [inv.clamp(0.0, 1.0) as f32, tex as f32, self.incidence.clamp(0.0, 1.0) as f32]
    }
}

struct WallHit {
    s: f64,
    texture: u8,
    /// `|h . n|` for the horizontal ray direction `h` and unit wall normal `n`.
    normal_dot: f64,
}

/// Nearest wall along the horizontal direction `h` (unnormalised).
fn nearest_wall(plan: &FloorPlan, origin: Vec2, h: Vec2) -> Option<WallHit> {
    let mut best: Option<WallHit> = None;
    for w in &plan.walls {
        if let Some(s) = ray_segment(origin, h, w.a, w.b) {
            if best.as_ref().is_none_or(|b| s < b.s) {
                let e = w.b.sub(w.a);
                let n = e.perp().scale(1.0 / e.norm());
                best = Some(WallHit { s, texture: w.texture, normal_dot: h.dot(n).abs() });
            }
        }
    }
    best
}

/// Combine a wall hit with the floor/ceiling planes for the 3D direction
/// `(h.x, h.y, up)`.
fn resolve(plan: &FloorPlan, z: f64, h: Vec2, up: f64, wall: Option<&WallHit>) -> RayHit {
    let len = (h.dot(h) + up * up).sqrt();
    let plane = if up < 0.0 {
        Some(((plan.floor_z - z) / up, FLOOR_TEXTURE))
    } else if up > 0.0 {
        Some(((plan.ceil_z - z) / up, CEILING_TEXTURE))
    } else {
        None
    };
    let (s, texture, incidence) = match (wall, plane) {
        (Some(w), Some((sp, _))) if w.s <= sp => (w.s, w.texture, w.normal_dot / len),
        (_, Some((sp, tex))) => (sp, tex, up.abs() / len),
        (Some(w), None) => (w.s, w.texture, w.normal_dot / len),
        (None, None) => return RayHit::far(),
    };
    let distance = s * len;
    if distance >= FAR_PLANE {
        RayHit::far()
    } else {
        RayHit { distance, texture: Some(texture), incidence }
    }
}

/// Cast one ray from `(origin, z)` with horizontal component `h` and
/// vertical component `up`.
pub fn cast_ray(plan: &FloorPlan, origin: Vec2, z: f64, h: Vec2, up: f64) -> RayHit {
    let wall = nearest_wall(plan, origin, h);
    resolve(plan, z, h, up, wall.as_ref())
}

pub fn check_pose(plan: &FloorPlan, pose: &AgentPose) -> Result<(), EnvError> {
    let p = pose.xy();
    let touching = plan.walls.iter().any(|w| point_segment_distance(p, w.a, w.b) < 1e-9);
    if touching || !(pose.z > plan.floor_z && pose.z < plan.ceil_z) {
        return Err(EnvError::PoseInWall { x: pose.x, y: pose.y, z: pose.z });
    }
    Ok(())
}

/// Render one observation. Walls are found once per column; each pixel then
/// only compares that hit with the floor and ceiling.
pub fn render(plan: &FloorPlan, pose: &AgentPose, camera: &Camera) -> Result<Observation, EnvError> {
    check_pose(plan, pose)?;
    let origin = pose.xy();
    let forward = Vec2::from_angle(pose.yaw);
    let right = Vec2::new(forward.y, -forward.x);
    let (hgt, wid) = (camera.height, camera.width);
    let mut data = vec![0.0f32; hgt * wid * 3];
    let rows: Vec<f64> = (0..hgt).map(|v| camera.row_offset(v)).collect();
    for u in 0..wid {
        let h = forward.add(right.scale(camera.column_offset(u)));
        let wall = nearest_wall(plan, origin, h);
        for (v, &up) in rows.iter().enumerate() {
            let hit = resolve(plan, pose.z, h, up, wall.as_ref());
            let i = (v * wid + u) * 3;
            data[i..i + 3].copy_from_slice(&hit.channels());
        }
    }
    Ok(Observation { height: hgt, width: wid, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::floorplan::Wall;

    fn corridor(half_width: f64) -> FloorPlan {
        FloorPlan {
            name: "c".into(),
            floor_z: 0.0,
            ceil_z: 3.0,
            walls: vec![
                Wall { a: Vec2::new(-50.0, half_width), b: Vec2::new(50.0, half_width), texture: 5 },
                Wall { a: Vec2::new(-50.0, -half_width), b: Vec2::new(50.0, -half_width), texture: 5 },
                Wall { a: Vec2::new(2.0, -half_width), b: Vec2::new(2.0, half_width), texture: 9 },
            ],
            spawn_points: vec![],
        }
    }

    #[test]
    fn narrow_beam_reads_wall_distance() {
        let plan = corridor(1.5);
        let cam = Camera { height: 1, width: 1, fov_h_deg: 1e-6, fov_v_deg: 1e-6 };
        let pose = AgentPose::new(0.0, 0.0, 1.5, 0.0);
        let hit = cast_ray(&plan, pose.xy(), pose.z, Vec2::new(1.0, cam.column_offset(0)), cam.row_offset(0));
        assert!((hit.distance - 2.0).abs() < 1e-9);
        assert_eq!(hit.texture, Some(9));
        assert!((hit.incidence - 1.0).abs() < 1e-9);
        let obs = render(&plan, &pose, &cam).unwrap();
        let expect = ((1.0 / 2.0 - 1.0 / FAR_PLANE) / (1.0 / NEAR_PLANE - 1.0 / FAR_PLANE)) as f32;
        assert!((obs.pixel(0, 0)[0] - expect).abs() < 1e-6);
    }

    #[test]
    fn symmetric_corridor_renders_symmetric() {
        let mut plan = corridor(1.5);
        plan.walls.pop();
        let cam = Camera { height: 16, width: 16, ..Camera::default() };
        let obs = render(&plan, &AgentPose::new(0.0, 0.0, 1.5, 0.0), &cam).unwrap();
        for v in 0..16 {
            for u in 0..8 {
                assert_eq!(obs.pixel(v, u), obs.pixel(v, 15 - u), "row {v} col {u}");
            }
        }
    }

    #[test]
    fn pose_in_wall_is_an_error() {
        let plan = corridor(1.5);
        assert!(render(&plan, &AgentPose::new(0.0, 1.5, 1.5, 0.0), &Camera::default()).is_err());
        assert!(render(&plan, &AgentPose::new(0.0, 0.0, 3.5, 0.0), &Camera::default()).is_err());
    }

    #[test]
    fn channels_in_unit_range() {
        let plan = corridor(1.0);
        let obs = render(&plan, &AgentPose::new(0.0, 0.2, 0.4, 0.3), &Camera::default()).unwrap();
        assert!(obs.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
