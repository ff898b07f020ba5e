//! 2D primitives on `f64` points.

use std::ops::{Add, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(a: f64) -> Self {
        Self::new(a.cos(), a.sin())
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

/// Parameter `s > 0` at which `origin + s * dir` meets segment `a..b`,
/// or `None` when parallel or missed.
pub fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = b.sub(a);
    let denom = dir.cross(e);
    if denom == 0.0 {
        return None;
    }
    let ao = a.sub(origin);
    let s = ao.cross(e) / denom;
    let u = ao.cross(dir) / denom;
    (s > 0.0 && (0.0..=1.0).contains(&u)).then_some(s)
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = b.sub(a);
    let len2 = e.dot(e);
    let t = if len2 == 0.0 { 0.0 } else { (p.sub(a).dot(e) / len2).clamp(0.0, 1.0) };
    p.sub(a.add(e.scale(t))).norm()
}

/// Proper or touching intersection of two closed segments.
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    b.sub(a).cross(c.sub(a))
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Smallest `t` in `[0, inf)` at which the point `start + t * delta` comes
/// within `radius` of segment `a..b` (enters the segment's capsule).
/// Returns `Some(0.0)` when already inside.
pub fn capsule_entry(start: Vec2, delta: Vec2, a: Vec2, b: Vec2, radius: f64) -> Option<f64> {
    if point_segment_distance(start, a, b) < radius {
        return Some(0.0);
    }
    let mut best: Option<f64> = None;
    let mut keep = |t: f64| {
        if t >= 0.0 && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    let e = b.sub(a);
    let len = e.norm();
    if len > 0.0 {
        let n = e.perp().scale(1.0 / len);
        let u = e.scale(1.0 / len);
        let dn = delta.dot(n);
        if dn != 0.0 {
            let off = start.sub(a).dot(n);
            for side in [radius, -radius] {
                let t = (side - off) / dn;
                let along = start.add(delta.scale(t)).sub(a).dot(u);
                if (0.0..=len).contains(&along) {
                    keep(t);
                }
            }
        }
    }
    for c in [a, b] {
        if let Some(t) = circle_entry(start, delta, c, radius) {
            keep(t);
        }
    }
    best
}

/// First non-negative root of `|start + t * delta - center| = radius`.
fn circle_entry(start: Vec2, delta: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let f = start.sub(center);
    let a = delta.dot(delta);
    if a == 0.0 {
        return None;
    }
    let b = 2.0 * f.dot(delta);
    let c = f.dot(f) - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = (-b - sq) / (2.0 * a);
    let t1 = (-b + sq) / (2.0 * a);
    if t0 >= 0.0 {
        Some(t0)
    } else if t1 >= 0.0 && c < 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// Intersection of the infinite lines `a1 + t*d1` and `a2 + u*d2`.
pub fn line_intersection(a1: Vec2, d1: Vec2, a2: Vec2, d2: Vec2) -> Option<Vec2> {
    let denom = d1.cross(d2);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = a2.sub(a1).cross(d2) / denom;
    Some(a1.add(d1.scale(t)))
}
