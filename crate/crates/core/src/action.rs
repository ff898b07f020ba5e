//! Perception-based N x N action space.
//!
//! The camera frame is cut into an `N x N` grid; choosing cell `(i, j)` turns
//! the agent towards that cell's centre (yaw `theta_i`, pitch `phi_j`) and
//! advances `r` metres. Uniform noise in `[-b, b]` is added to both angles on
//! every execution. Pitch only tilts the step; it is not accumulated into
//! the agent's attitude.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::AgentPose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Normal,
    /// Multiply both angles by this factor.
    Dilated(f64),
    /// Shift both angles by this fraction of one bin step.
    Rotated(f64),
}

impl Variant {
    pub const DILATION: f64 = 1.2;
    pub const ROTATION: f64 = 0.25;

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Normal => "normal",
            Variant::Dilated(_) => "dilated",
            Variant::Rotated(_) => "rotated",
        }
    }
}

impl FromStr for Variant {
    type Err = ActionError;

    /// `normal`, `dilated`, `rotated`, or `dilated:1.5` / `rotated:0.1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (
                n,
                Some(p.parse::<f64>().map_err(|_| ActionError::InvalidSpec(format!("bad variant parameter '{p}'")))?),
            ),
            None => (s, None),
        };
        match name {
            "normal" => Ok(Variant::Normal),
            "dilated" => Ok(Variant::Dilated(param.unwrap_or(Variant::DILATION))),
            "rotated" => Ok(Variant::Rotated(param.unwrap_or(Variant::ROTATION))),
            other => Err(ActionError::InvalidSpec(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ActionError {
    #[error("invalid action space: {0}")]
    InvalidSpec(String),
    #[error("bin ({i}, {j}) outside a {n}x{n} grid")]
    BinOutOfRange { i: usize, j: usize, n: usize },
    #[error("action {action} outside 0..{count}")]
    ActionOutOfRange { action: usize, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActionSpaceFile", into = "ActionSpaceFile")]
pub struct ActionSpaceSpec {
    pub n: usize,
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    pub r_m: f64,
    pub b_rad: f64,
    pub variant: Variant,
}

impl Default for ActionSpaceSpec {
    fn default() -> Self {
        Self { n: 5, fov_h_deg: 90.0, fov_v_deg: 90.0, r_m: 0.5, b_rad: 1.0 / 15.0, variant: Variant::Normal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum VariantKind {
    Normal,
    Dilated,
    Rotated,
}

/// On-disk form: the variant parameter sits beside the variant name.
#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ActionSpaceFile {
    n: usize,
    fov_h_deg: f64,
    fov_v_deg: f64,
    r_m: f64,
    b_rad: f64,
    variant: VariantKind,
    variant_param: Option<f64>,
}

impl Default for ActionSpaceFile {
    fn default() -> Self {
        ActionSpaceSpec::default().into()
    }
}

impl From<ActionSpaceSpec> for ActionSpaceFile {
    fn from(s: ActionSpaceSpec) -> Self {
        let (variant, variant_param) = match s.variant {
            Variant::Normal => (VariantKind::Normal, None),
            Variant::Dilated(f) => (VariantKind::Dilated, Some(f)),
            Variant::Rotated(f) => (VariantKind::Rotated, Some(f)),
        };
        Self {
            n: s.n,
            fov_h_deg: s.fov_h_deg,
            fov_v_deg: s.fov_v_deg,
            r_m: s.r_m,
            b_rad: s.b_rad,
            variant,
            variant_param,
        }
    }
}

impl TryFrom<ActionSpaceFile> for ActionSpaceSpec {
    type Error = ActionError;

    fn try_from(f: ActionSpaceFile) -> Result<Self, Self::Error> {
        let variant = match (f.variant, f.variant_param) {
            (VariantKind::Normal, None) => Variant::Normal,
            (VariantKind::Normal, Some(_)) => {
                return Err(ActionError::InvalidSpec("variant_param given for the normal variant".into()))
            }
            (VariantKind::Dilated, p) => Variant::Dilated(p.unwrap_or(Variant::DILATION)),
            (VariantKind::Rotated, p) => Variant::Rotated(p.unwrap_or(Variant::ROTATION)),
        };
        let spec = ActionSpaceSpec {
            n: f.n,
            fov_h_deg: f.fov_h_deg,
            fov_v_deg: f.fov_v_deg,
            r_m: f.r_m,
            b_rad: f.b_rad,
            variant,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Result of executing one action: the translation to sweep and the new yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionStep {
    pub displacement: [f64; 3],
    pub yaw: f64,
    pub yaw_offset: f64,
    pub pitch: f64,
}

impl ActionSpaceSpec {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn action_count(&self) -> usize {
        self.n * self.n
    }

    fn step_h(&self) -> f64 {
        self.fov_h_deg.to_radians() / self.n as f64
    }

    fn step_v(&self) -> f64 {
        self.fov_v_deg.to_radians() / self.n as f64
    }

    pub fn validate(&self) -> Result<(), ActionError> {
        let bad = |m: String| Err(ActionError::InvalidSpec(m));
        if self.n == 0 || self.n.is_multiple_of(2) {
            return bad(format!("grid side {} must be odd and positive", self.n));
        }
        if !(self.fov_h_deg > 0.0 && self.fov_h_deg < 180.0 && self.fov_v_deg > 0.0 && self.fov_v_deg < 180.0) {
            return bad("fields of view must lie in (0, 180) degrees".into());
        }
        if !(self.r_m > 0.0) {
            return bad(format!("step length {} must be positive", self.r_m));
        }
        let half_bin = 0.5 * self.step_h().min(self.step_v());
        if !(self.b_rad >= 0.0 && self.b_rad < half_bin) {
            return bad(format!("noise bound {} must lie in [0, {half_bin})", self.b_rad));
        }
        match self.variant {
            Variant::Dilated(f) if !(f > 0.0 && f.is_finite()) => bad(format!("dilation {f}")),
            Variant::Rotated(f) if !f.is_finite() => bad(format!("rotation {f}")),
            _ => Ok(()),
        }
    }

    fn apply_variant(&self, nominal: f64, step: f64) -> f64 {
        match self.variant {
            Variant::Normal => nominal,
            Variant::Dilated(f) => nominal * f,
            Variant::Rotated(f) => nominal + f * step,
        }
    }

    /// Nominal `(yaw offset, pitch)` in radians of bin `(i, j)`.
    pub fn bin_angles(&self, i: usize, j: usize) -> Result<(f64, f64), ActionError> {
        if i >= self.n || j >= self.n {
            return Err(ActionError::BinOutOfRange { i, j, n: self.n });
        }
        let centre = (self.n as f64 - 1.0) / 2.0;
        let (sh, sv) = (self.step_h(), self.step_v());
        let theta = self.apply_variant(sh * (i as f64 - centre), sh);
        let phi = self.apply_variant(sv * (j as f64 - centre), sv);
        Ok((theta, phi))
    }

    /// Row-major flattening: `j = a / N`, `i = a % N`.
    pub fn index_to_bin(&self, action: usize) -> Result<(usize, usize), ActionError> {
        if action >= self.action_count() {
            return Err(ActionError::ActionOutOfRange { action, count: self.action_count() });
        }
        Ok((action % self.n, action / self.n))
    }

    pub fn bin_to_index(&self, i: usize, j: usize) -> Result<usize, ActionError> {
        if i >= self.n || j >= self.n {
            return Err(ActionError::BinOutOfRange { i, j, n: self.n });
        }
        Ok(j * self.n + i)
    }

    /// Execute bin `(i, j)` from `pose` with fresh angular noise.
    pub fn execute(&self, pose: &AgentPose, i: usize, j: usize, rng: &mut impl Rng) -> Result<ActionStep, ActionError> {
        let (theta, phi) = self.bin_angles(i, j)?;
        let (eps_theta, eps_phi) = if self.b_rad > 0.0 {
            (rng.gen_range(-self.b_rad..=self.b_rad), rng.gen_range(-self.b_rad..=self.b_rad))
        } else {
            (0.0, 0.0)
        };
        Ok(self.execute_with_noise(pose, theta + eps_theta, phi + eps_phi))
    }

    pub fn execute_action(
        &self,
        pose: &AgentPose,
        action: usize,
        rng: &mut impl Rng,
    ) -> Result<ActionStep, ActionError> {
        let (i, j) = self.index_to_bin(action)?;
        self.execute(pose, i, j, rng)
    }

    /// Deterministic part of [`execute`](Self::execute) for already-perturbed angles.
    pub fn execute_with_noise(&self, pose: &AgentPose, yaw_offset: f64, pitch: f64) -> ActionStep {
        let yaw = pose.yaw + yaw_offset;
        let (sp, cp) = pitch.sin_cos();
        let (sy, cy) = yaw.sin_cos();
        ActionStep { displacement: [self.r_m * cp * cy, self.r_m * cp * sy, self.r_m * sp], yaw, yaw_offset, pitch }
    }
}
