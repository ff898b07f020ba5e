//! Procedural corridor floor plans.
//!
//! A centreline polyline (open, or a closed jittered polygon) is offset to
//! both sides with mitred joints, giving one wall rail per side; open
//! corridors get a cap at each end. Rails are optionally cut into panels so
//! a plan can carry many textures.

use std::f64::consts::PI;
use std::ops::{Add, Sub};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::floorplan::{AgentPose, FloorPlan, Wall, D_CRASH, TEXTURE_POOL};
use super::geometry::{line_intersection, segments_intersect, Vec2};
use super::EnvError;

/// Texture ids used by the meta (training) environments.
pub const META_TEXTURES: std::ops::Range<u8> = 0..30;
/// Texture ids never used by the meta environments.
pub const NOVEL_TEXTURES: std::ops::Range<u8> = 30..TEXTURE_POOL;

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    pub name: String,
    pub corridor_width: f64,
    pub segment_count: usize,
    /// Turn magnitudes for open corridors; each joint picks one at random with a random sign.
    pub turn_angles_deg: Vec<f64>,
    pub textures: Vec<u8>,
    pub closed_loop: bool,
    /// Closed loops: relative radial jitter of the polygon vertices.
    pub loop_jitter: f64,
    pub segment_length: (f64, f64),
    pub panel_length: Option<f64>,
    pub floor_z: f64,
    pub ceil_z: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            name: "corridor".into(),
            corridor_width: 3.0,
            segment_count: 4,
            turn_angles_deg: vec![0.0, 30.0, 60.0],
            textures: META_TEXTURES.collect(),
            closed_loop: false,
            loop_jitter: 0.2,
            segment_length: (6.0, 10.0),
            panel_length: None,
            floor_z: 0.0,
            ceil_z: 3.0,
        }
    }
}

fn geometry_error(msg: impl Into<String>) -> EnvError {
    EnvError::Geometry(msg.into())
}

pub fn generate_floorplan(seed: u64, params: &GenParams) -> Result<FloorPlan, EnvError> {
    if params.corridor_width < 3.0 * D_CRASH {
        return Err(geometry_error(format!("corridor width {} below 3 x d_crash", params.corridor_width)));
    }
    let min_segments = if params.closed_loop { 3 } else { 2 };
    if params.segment_count < min_segments {
        return Err(geometry_error(format!("need at least {min_segments} segments")));
    }
    let (lo, hi) = params.segment_length;
    if !(lo > 0.0 && lo <= hi) {
        return Err(geometry_error("invalid segment length range"));
    }
    if params.textures.is_empty() || params.textures.iter().any(|&t| t >= TEXTURE_POOL) {
        return Err(geometry_error("texture subset must be non-empty ids in 0..40"));
    }
    if !params.closed_loop && params.turn_angles_deg.is_empty() {
        return Err(geometry_error("turn angle set is empty"));
    }
    if !(params.ceil_z - params.floor_z > 2.0 * D_CRASH) {
        return Err(geometry_error("room height leaves no free space"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centre = if params.closed_loop { loop_centreline(params, &mut rng) } else { open_centreline(params, &mut rng) };
    let n_seg = if params.closed_loop { centre.len() } else { centre.len() - 1 };
    let seg = |i: usize| (centre[i], centre[(i + 1) % centre.len()]);
    let dirs: Vec<Vec2> = (0..n_seg)
        .map(|i| {
            let (a, b) = seg(i);
            let d = b.sub(a);
            d.scale(1.0 / d.norm())
        })
        .collect();

    let half = params.corridor_width / 2.0;
    let mut rails: Vec<Vec<Vec2>> = Vec::with_capacity(2);
    for side in [1.0, -1.0] {
        let offset = |i: usize| dirs[i].perp().scale(side * half);
        let joint = |k: usize| -> Vec2 {
            let prev = (k + n_seg - 1) % n_seg;
            let a1 = centre[k].add(offset(prev));
            let a2 = centre[k].add(offset(k));
            line_intersection(a1, dirs[prev], a2, dirs[k]).unwrap_or(a2)
        };
        let mut pts = Vec::with_capacity(n_seg + 1);
        if params.closed_loop {
            pts.extend((0..n_seg).map(joint));
        } else {
            pts.push(centre[0].add(offset(0)));
            pts.extend((1..n_seg).map(joint));
            pts.push(centre[n_seg].add(offset(n_seg - 1)));
        }
        // A rail piece pointing against its centreline segment means the
        // miter of a sharp turn overran the segment.
        for i in 0..n_seg {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            if b.sub(a).dot(dirs[i]) <= 0.0 {
                return Err(geometry_error(format!("segment {i} too short for its turns")));
            }
        }
        rails.push(pts);
    }

    let mut pieces: Vec<(Vec2, Vec2)> = Vec::new();
    for pts in &rails {
        for i in 0..n_seg {
            pieces.push((pts[i], pts[(i + 1) % pts.len()]));
        }
    }
    if !params.closed_loop {
        pieces.push((rails[0][0], rails[1][0]));
        pieces.push((rails[0][n_seg], rails[1][n_seg]));
    }
    check_no_crossings(&pieces)?;

    let mut walls = Vec::new();
    let mut palette = TexturePalette::new(&params.textures);
    for (a, b) in pieces {
        let len = b.sub(a).norm();
        let parts = params.panel_length.map_or(1, |p| (len / p).ceil().max(1.0) as usize);
        for k in 0..parts {
            let t0 = k as f64 / parts as f64;
            let t1 = (k + 1) as f64 / parts as f64;
            let pa = if k == 0 { a } else { a.add(b.sub(a).scale(t0)) };
            let pb = if k + 1 == parts { b } else { a.add(b.sub(a).scale(t1)) };
            walls.push(Wall { a: pa, b: pb, texture: palette.next(&mut rng) });
        }
    }

    let mid_z = 0.5 * (params.floor_z + params.ceil_z);
    let mut plan = FloorPlan {
        name: params.name.clone(),
        floor_z: params.floor_z,
        ceil_z: params.ceil_z,
        walls,
        spawn_points: Vec::new(),
    };
    for i in 0..n_seg {
        let (a, b) = seg(i);
        let m = a.add(b).scale(0.5);
        let pose = AgentPose::new(m.x, m.y, mid_z, dirs[i].y.atan2(dirs[i].x));
        if plan.pose_clearance(&pose) >= D_CRASH {
            plan.spawn_points.push(pose);
        }
    }
    if plan.spawn_points.is_empty() {
        return Err(geometry_error("no spawn point has enough clearance"));
    }
    plan.validate()?;
    Ok(plan)
}

fn open_centreline(params: &GenParams, rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let (lo, hi) = params.segment_length;
    let mut pts = vec![Vec2::new(0.0, 0.0)];
    let mut heading = 0.0f64;
    for i in 0..params.segment_count {
        if i > 0 {
            let turn = *params.turn_angles_deg.choose(rng).unwrap();
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            heading += sign * turn.to_radians();
        }
        let len = if lo == hi { lo } else { rng.gen_range(lo..hi) };
        let last = *pts.last().unwrap();
        pts.push(last.add(Vec2::from_angle(heading).scale(len)));
    }
    pts
}

fn loop_centreline(params: &GenParams, rng: &mut ChaCha8Rng) -> Vec<Vec2> {
    let n = params.segment_count;
    let (lo, hi) = params.segment_length;
    let mean = 0.5 * (lo + hi);
    let radius = mean / (2.0 * (PI / n as f64).sin());
    let step = 2.0 * PI / n as f64;
    let j = params.loop_jitter.max(0.0);
    (0..n)
        .map(|k| {
            let angle = step * k as f64 + if j > 0.0 { rng.gen_range(-0.25..0.25) * step } else { 0.0 };
            let r = radius * if j > 0.0 { 1.0 + rng.gen_range(-j..j) } else { 1.0 };
            Vec2::from_angle(angle).scale(r)
        })
        .collect()
}

fn check_no_crossings(pieces: &[(Vec2, Vec2)]) -> Result<(), EnvError> {
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            let (a, b) = pieces[i];
            let (c, d) = pieces[j];
            let shared = a == c || a == d || b == c || b == d;
            if !shared && segments_intersect(a, b, c, d) {
                return Err(geometry_error(format!("walls {i} and {j} intersect")));
            }
        }
    }
    Ok(())
}

/// Cycles through a texture subset, reshuffling every pass, so every id of
/// the subset appears once per pass.
struct TexturePalette {
    ids: Vec<u8>,
    pos: usize,
}

impl TexturePalette {
    fn new(ids: &[u8]) -> Self {
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let pos = ids.len();
        Self { ids, pos }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> u8 {
        if self.pos == self.ids.len() {
            self.ids.shuffle(rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.ids[self.pos - 1]
    }
}

/// Draw `size` distinct texture ids with exactly `overlap * size` of them
/// from the meta pool and the rest from the novel pool.
pub fn texture_subset(size: usize, overlap: f64, rng: &mut impl Rng) -> Result<Vec<u8>, EnvError> {
    let from_meta = overlap * size as f64;
    if !(0.0..=1.0).contains(&overlap) || (from_meta - from_meta.round()).abs() > 1e-9 {
        return Err(geometry_error(format!("overlap {overlap} of {size} textures is not a whole number")));
    }
    let from_meta = from_meta.round() as usize;
    let from_novel = size - from_meta;
    if from_meta > META_TEXTURES.len() || from_novel > NOVEL_TEXTURES.len() {
        return Err(geometry_error(format!("cannot draw {from_meta} meta + {from_novel} novel textures")));
    }
    let meta: Vec<u8> = META_TEXTURES.collect();
    let novel: Vec<u8> = NOVEL_TEXTURES.collect();
    let mut out: Vec<u8> = meta.choose_multiple(rng, from_meta).copied().collect();
    out.extend(novel.choose_multiple(rng, from_novel).copied());
    out.sort_unstable();
    Ok(out)
}

/// Fraction of a plan's distinct wall textures that belong to the meta pool.
pub fn meta_texture_overlap(plan: &FloorPlan) -> f64 {
    let mut ids: Vec<u8> = plan.walls.iter().map(|w| w.texture).collect();
    ids.sort_unstable();
    ids.dedup();
    let shared = ids.iter().filter(|t| META_TEXTURES.contains(t)).count();
    shared as f64 / ids.len() as f64
}
