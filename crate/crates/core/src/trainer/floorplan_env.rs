use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::action::ActionSpaceSpec;
use crate::env::{min_clearance, render, sweep_move, AgentPose, Camera, Cone, EnvError, FloorPlan};

use super::{EnvStep, Environment, TrainConfig, TrainError};

/// `(-1, terminal)` on collision, otherwise forward-cone clearance over
/// `d_safe`, clamped to `[0, 1]`.
pub fn compute_reward(plan: &FloorPlan, pose: &AgentPose, collided: bool, cfg: &TrainConfig) -> (f64, bool) {
    if collided {
        return (-1.0, true);
    }
    let cone = Cone {
        yaw: pose.yaw,
        pitch: 0.0,
        half_angle: cfg.camera.fov_h_deg.to_radians() / 2.0,
        ray_count: cfg.reward_rays,
    };
    let d_min = min_clearance(plan, pose, &cone);
    ((d_min / cfg.d_safe).clamp(0.0, 1.0), false)
}

/// A floor plan with one agent, driven by the N x N action space.
#[derive(Debug, Clone)]
pub struct FloorPlanEnv {
    plan: FloorPlan,
    pose: AgentPose,
    action: ActionSpaceSpec,
    camera: Camera,
    cfg: TrainConfig,
}

impl FloorPlanEnv {
    pub fn new(plan: FloorPlan, cfg: &TrainConfig) -> Result<Self, TrainError> {
        plan.validate()?;
        let pose = *plan
            .spawn_points
            .first()
            .ok_or_else(|| EnvError::Geometry(format!("floor plan '{}' has no spawn points", plan.name)))?;
        Ok(Self { plan, pose, action: cfg.action, camera: cfg.camera, cfg: cfg.clone() })
    }

    pub fn plan(&self) -> &FloorPlan {
        &self.plan
    }

    pub fn pose(&self) -> AgentPose {
        self.pose
    }
}

impl Environment for FloorPlanEnv {
    type State = AgentPose;

    fn observe(&self) -> Result<Vec<f32>, TrainError> {
        Ok(render(&self.plan, &self.pose, &self.camera)?.data)
    }

    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> Result<EnvStep, TrainError> {
        let step = self.action.execute_action(&self.pose, action, rng)?;
        let turned = AgentPose { yaw: step.yaw, ..self.pose };
        let moved = sweep_move(&self.plan, &turned, step.displacement, self.cfg.d_crash);
        self.pose = moved.pose;
        let (reward, terminal) = compute_reward(&self.plan, &self.pose, moved.collided, &self.cfg);
        Ok(EnvStep { reward, terminal })
    }

    fn respawn(&mut self, rng: &mut ChaCha8Rng) {
        let k = rng.gen_range(0..self.plan.spawn_points.len());
        self.pose = self.plan.spawn_points[k];
    }

    fn initial_state(&self) -> AgentPose {
        self.plan.spawn_points[0]
    }

    fn save(&self) -> AgentPose {
        self.pose
    }

    fn restore(&mut self, state: AgentPose) {
        self.pose = state;
    }
}
