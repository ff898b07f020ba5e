use std::fmt::Write as _;

use super::geometry::{point_segment_distance, Vec2};
use super::EnvError;

/// Number of distinct wall textures.
pub const TEXTURE_POOL: u8 = 40;

/// Crash distance: minimum clearance an agent may keep from any surface.
pub const D_CRASH: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub a: Vec2,
    pub b: Vec2,
    pub texture: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl AgentPose {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self { x, y, z, yaw }
    }

    pub fn xy(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// An extruded 2.5D floor plan: vertical walls between a flat floor and ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlan {
    pub name: String,
    pub floor_z: f64,
    pub ceil_z: f64,
    pub walls: Vec<Wall>,
    pub spawn_points: Vec<AgentPose>,
}

impl FloorPlan {
    /// Exact clearance of a point: distance to the nearest wall, floor or ceiling.
    pub fn clearance(&self, x: f64, y: f64, z: f64) -> f64 {
        let p = Vec2::new(x, y);
        let walls = self.walls.iter().map(|w| point_segment_distance(p, w.a, w.b)).fold(f64::INFINITY, f64::min);
        walls.min(z - self.floor_z).min(self.ceil_z - z)
    }

    pub fn pose_clearance(&self, pose: &AgentPose) -> f64 {
        self.clearance(pose.x, pose.y, pose.z)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.ceil_z > self.floor_z) {
            return Err(EnvError::Geometry(format!("ceiling {} must be above floor {}", self.ceil_z, self.floor_z)));
        }
        if let Some(w) = self.walls.iter().find(|w| w.texture >= TEXTURE_POOL) {
            return Err(EnvError::Geometry(format!("texture id {} outside 0..{TEXTURE_POOL}", w.texture)));
        }
        for (k, s) in self.spawn_points.iter().enumerate() {
            let c = self.pose_clearance(s);
            if c < D_CRASH {
                return Err(EnvError::Geometry(format!("spawn {k} has clearance {c:.3} < {D_CRASH}")));
            }
        }
        Ok(())
    }

    /// Structured text: header, one wall per line, one spawn per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# navtl floor plan v1");
        let _ = writeln!(s, "name {}", self.name);
        let _ = writeln!(s, "floor_z {}", self.floor_z);
        let _ = writeln!(s, "ceil_z {}", self.ceil_z);
        for w in &self.walls {
            let _ = writeln!(s, "wall {} {} {} {} {}", w.a.x, w.a.y, w.b.x, w.b.y, w.texture);
        }
        for p in &self.spawn_points {
            let _ = writeln!(s, "spawn {} {} {} {}", p.x, p.y, p.z, p.yaw);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, EnvError> {
        let mut name = None;
        let mut floor_z = None;
        let mut ceil_z = None;
        let mut walls = Vec::new();
        let mut spawn_points = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| EnvError::Parse { line: lineno + 1, message: msg.to_string() };
            let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let nums = |n: usize| -> Result<Vec<f64>, EnvError> {
                let v: Vec<f64> = rest
                    .split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| err(&format!("bad number '{t}'"))))
                    .collect::<Result<_, _>>()?;
                if v.len() != n {
                    return Err(err(&format!("expected {n} values, got {}", v.len())));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(err("non-finite value"));
                }
                Ok(v)
            };
            match key {
                "name" => name = Some(rest.trim().to_string()),
                "floor_z" => floor_z = Some(nums(1)?[0]),
                "ceil_z" => ceil_z = Some(nums(1)?[0]),
                "wall" => {
                    let v = nums(5)?;
                    if v[4].fract() != 0.0 || v[4] < 0.0 || v[4] >= TEXTURE_POOL as f64 {
                        return Err(err(&format!("texture id {} outside 0..{TEXTURE_POOL}", v[4])));
                    }
                    walls.push(Wall { a: Vec2::new(v[0], v[1]), b: Vec2::new(v[2], v[3]), texture: v[4] as u8 });
                }
                "spawn" => {
                    let v = nums(4)?;
                    spawn_points.push(AgentPose::new(v[0], v[1], v[2], v[3]));
                }
                other => return Err(err(&format!("unknown key '{other}'"))),
            }
        }
        let missing = |k: &str| EnvError::Parse { line: 0, message: format!("missing '{k}' header") };
        let plan = FloorPlan {
            name: name.ok_or_else(|| missing("name"))?,
            floor_z: floor_z.ok_or_else(|| missing("floor_z"))?,
            ceil_z: ceil_z.ok_or_else(|| missing("ceil_z"))?,
            walls,
            spawn_points,
        };
        plan.validate()?;
        Ok(plan)
    }
}
