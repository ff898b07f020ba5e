use super::floorplan::{AgentPose, FloorPlan};
use super::geometry::{capsule_entry, Vec2};
use super::render::cast_ray;

/// A horizontal fan of rays around `(yaw, pitch)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cone {
    pub yaw: f64,
    pub pitch: f64,
    pub half_angle: f64,
    pub ray_count: usize,
}

impl Cone {
    /// Yaw of ray `k`, evenly spaced over `[yaw - half_angle, yaw + half_angle]`.
    pub fn ray_yaw(&self, k: usize) -> f64 {
        if self.ray_count <= 1 {
            self.yaw
        } else {
            self.yaw - self.half_angle + 2.0 * self.half_angle * k as f64 / (self.ray_count - 1) as f64
        }
    }
}

/// Minimum hit distance over the cone's rays (walls, floor and ceiling),
/// capped at the far plane.
pub fn min_clearance(plan: &FloorPlan, pose: &AgentPose, cone: &Cone) -> f64 {
    let origin = pose.xy();
    let (sp, cp) = cone.pitch.sin_cos();
    (0..cone.ray_count.max(1))
        .map(|k| {
            let h = Vec2::from_angle(cone.ray_yaw(k)).scale(cp);
            cast_ray(plan, origin, pose.z, h, sp).distance
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveOutcome {
    pub pose: AgentPose,
    pub collided: bool,
    pub distance: f64,
}

/// Translate along `displacement`, stopping where clearance first drops to
/// `d_crash`. The yaw is left unchanged.
pub fn sweep_move(plan: &FloorPlan, pose: &AgentPose, displacement: [f64; 3], d_crash: f64) -> MoveOutcome {
    let [dx, dy, dz] = displacement;
    let length = (dx * dx + dy * dy + dz * dz).sqrt();
    if length == 0.0 {
        return MoveOutcome { pose: *pose, collided: plan.pose_clearance(pose) < d_crash, distance: 0.0 };
    }
    let start = pose.xy();
    let delta = Vec2::new(dx, dy);
    let mut t_hit = f64::INFINITY;
    for w in &plan.walls {
        if let Some(t) = capsule_entry(start, delta, w.a, w.b, d_crash) {
            t_hit = t_hit.min(t);
        }
    }
    let floor_gap = pose.z - (plan.floor_z + d_crash);
    let ceil_gap = (plan.ceil_z - d_crash) - pose.z;
    if floor_gap < 0.0 || ceil_gap < 0.0 {
        t_hit = 0.0;
    } else if dz < 0.0 {
        t_hit = t_hit.min(-floor_gap / dz);
    } else if dz > 0.0 {
        t_hit = t_hit.min(ceil_gap / dz);
    }

    let at = |t: f64| AgentPose::new(pose.x + t * dx, pose.y + t * dy, pose.z + t * dz, pose.yaw);
    if t_hit <= 1.0 {
        return MoveOutcome { pose: at(t_hit), collided: true, distance: t_hit * length };
    }
    let end = at(1.0);
    // Round-off can leave the end point a hair inside a capsule whose entry
    // root landed just past t = 1.
    let collided = plan.pose_clearance(&end) < d_crash;
    MoveOutcome { pose: end, collided, distance: length }
}
