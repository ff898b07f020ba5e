use navtl::env::{
    generate::{META_TEXTURES, NOVEL_TEXTURES},
    meta_texture_overlap, min_clearance, render, sweep_move, texture_subset, AgentPose, Camera, Cone, FloorPlan,
    Preset, D_CRASH, FAR_PLANE, NEAR_PLANE,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-pixel brute force: every pixel casts its own 3D ray against every
/// wall and both planes, with no per-column sharing.
fn oracle_render(plan: &FloorPlan, pose: &AgentPose, cam: &Camera) -> Vec<f32> {
    let (fx, fy) = (pose.yaw.cos(), pose.yaw.sin());
    let (rx, ry) = (fy, -fx);
    let half_h = (cam.fov_h_deg.to_radians() / 2.0).tan();
    let half_v = (cam.fov_v_deg.to_radians() / 2.0).tan();
    let mut out = Vec::with_capacity(cam.height * cam.width * 3);
    for v in 0..cam.height {
        let up = (cam.height as f64 / 2.0 - v as f64 - 0.5) * (2.0 * half_v / cam.height as f64);
        for u in 0..cam.width {
            let off = (u as f64 + 0.5 - cam.width as f64 / 2.0) * (2.0 * half_h / cam.width as f64);
            let (hx, hy) = (fx + rx * off, fy + ry * off);
            // nearest wall: solve origin + s*h = a + t*(b - a)
            let mut best: Option<(f64, u8, f64)> = None;
            for w in &plan.walls {
                let (ex, ey) = (w.b.x - w.a.x, w.b.y - w.a.y);
                let denom = hx * ey - hy * ex;
                if denom == 0.0 {
                    continue;
                }
                let (aox, aoy) = (w.a.x - pose.x, w.a.y - pose.y);
                let s = (aox * ey - aoy * ex) / denom;
                let t = (aox * hy - aoy * hx) / denom;
                if s > 0.0 && (0.0..=1.0).contains(&t) && best.is_none_or(|b| s < b.0) {
                    let len = ex.hypot(ey);
                    let (nx, ny) = (-ey * (1.0 / len), ex * (1.0 / len));
                    best = Some((s, w.texture, (hx * nx + hy * ny).abs()));
                }
            }
            let len = (hx * hx + hy * hy + up * up).sqrt();
            let plane = if up < 0.0 {
                Some(((plan.floor_z - pose.z) / up, 0u8))
            } else if up > 0.0 {
                Some(((plan.ceil_z - pose.z) / up, 39u8))
            } else {
                None
            };
            let hit = match (best, plane) {
                (Some(w), Some((sp, _))) if w.0 <= sp => Some((w.0, w.1, w.2 / len)),
                (_, Some((sp, tex))) => Some((sp, tex, up.abs() / len)),
                (Some(w), None) => Some((w.0, w.1, w.2 / len)),
                (None, None) => None,
            };
            let (dist, tex, inc) = match hit {
                Some((s, tex, inc)) if s * len < FAR_PLANE => (s * len, Some(tex), inc),
                _ => (FAR_PLANE, None, 0.0),
            };
            let inv = (1.0 / dist - 1.0 / FAR_PLANE) / (1.0 / NEAR_PLANE - 1.0 / FAR_PLANE);
            out.push(inv.clamp(0.0, 1.0) as f32);
            out.push(tex.map_or(0.0, |t| t as f64 / 39.0) as f32);
            out.push(inc.clamp(0.0, 1.0) as f32);
        }
    }
    out
}

fn all_presets() -> Vec<Preset> {
    (0..8).map(Preset::Meta).chain(Preset::TEST).collect()
}

/// Random free pose near a random spawn point.
fn random_pose(plan: &FloorPlan, rng: &mut impl Rng) -> AgentPose {
    loop {
        let s = plan.spawn_points[rng.gen_range(0..plan.spawn_points.len())];
        let p = AgentPose::new(
            s.x + rng.gen_range(-1.5..1.5),
            s.y + rng.gen_range(-1.5..1.5),
            rng.gen_range(plan.floor_z + 0.05..plan.ceil_z - 0.05),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        if plan.pose_clearance(&p) > 0.05 {
            return p;
        }
    }
}

#[test]
fn render_matches_brute_force_oracle() {
    let plans: Vec<FloorPlan> = all_presets().iter().map(|p| p.generate(11).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cameras = [
        Camera { height: 12, width: 16, ..Camera::default() },
        Camera { height: 9, width: 7, fov_h_deg: 70.0, fov_v_deg: 100.0 },
    ];
    let mut samples = 0;
    for k in 0..1100 {
        let plan = &plans[k % plans.len()];
        let pose = random_pose(plan, &mut rng);
        let cam = &cameras[k % 2];
        let got = render(plan, &pose, cam).unwrap();
        let want = oracle_render(plan, &pose, cam);
        assert!(
            got.data.iter().zip(&want).all(|(a, b)| a.to_bits() == b.to_bits()),
            "sample {k} differs ({} at {pose:?})",
            plan.name
        );
        samples += 1;
    }
    // a few at the default resolution too
    for plan in &plans[..3] {
        let pose = random_pose(plan, &mut rng);
        let got = render(plan, &pose, &Camera::default()).unwrap();
        assert_eq!(got.data, oracle_render(plan, &pose, &Camera::default()));
    }
    assert!(samples >= 1000);
}

#[test]
fn cone_clearance_matches_dense_oracle() {
    let plans: Vec<FloorPlan> = all_presets().iter().map(|p| p.generate(3).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for k in 0..400 {
        let plan = &plans[k % plans.len()];
        let pose = random_pose(plan, &mut rng);
        let cone = Cone { yaw: pose.yaw, pitch: 0.0, half_angle: std::f64::consts::FRAC_PI_4, ray_count: 32 };
        let coarse = min_clearance(plan, &pose, &cone);
        let dense = min_clearance(plan, &pose, &Cone { ray_count: 4001, ..cone });
        assert!(dense <= coarse + 1e-12);
        worst = worst.max((coarse - dense) / dense);
    }
    assert!(worst <= 0.05, "worst relative gap {worst}");
}

#[test]
fn cone_toward_long_wall_reads_one_metre() {
    let plan = FloorPlan::from_text("name w\nfloor_z 0\nceil_z 3\nwall 1 -30 1 30 4\n").unwrap();
    let pose = AgentPose::new(0.0, 0.0, 1.5, 0.0);
    for rays in [1, 2, 9, 32] {
        let cone = Cone { yaw: 0.0, pitch: 0.0, half_angle: 0.6, ray_count: rays };
        let step = if rays > 1 { 1.2 / (rays - 1) as f64 } else { 0.0 };
        let d = min_clearance(&plan, &pose, &cone);
        assert!(d >= 1.0 && d <= 1.0 / (step / 2.0).cos() + 1e-12, "{rays} rays: {d}");
    }
}

#[test]
fn renders_are_deterministic_and_in_range() {
    let plan = Preset::TwistyLike.generate(2).unwrap();
    let pose = plan.spawn_points[1];
    let a = render(&plan, &pose, &Camera::default()).unwrap();
    let b = render(&plan, &pose, &Camera::default()).unwrap();
    assert_eq!(a, b);
    assert!(a.data.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn generation_is_deterministic_and_round_trips() {
    for p in all_presets() {
        let a = p.generate(21).unwrap();
        let b = p.generate(21).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.walls, p.generate(22).unwrap().walls);
        let back = FloorPlan::from_text(&a.to_text()).unwrap();
        assert_eq!(back, a);
        a.validate().unwrap();
    }
}

#[test]
fn texture_overlap_is_exact() {
    for seed in 0..25 {
        for p in all_presets() {
            let plan = p.generate(seed).unwrap();
            assert_eq!(meta_texture_overlap(&plan), p.texture_overlap(), "{p} seed {seed}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (size, overlap) in [(20, 0.75), (20, 0.5), (10, 1.0), (10, 0.0), (8, 0.25)] {
        let subset = texture_subset(size, overlap, &mut rng).unwrap();
        assert_eq!(subset.len(), size);
        let meta = subset.iter().filter(|t| META_TEXTURES.contains(t)).count();
        assert_eq!(meta as f64 / size as f64, overlap);
        assert!(subset.iter().all(|t| META_TEXTURES.contains(t) || NOVEL_TEXTURES.contains(t)));
    }
    // 30 textures at 75% would need 7.5 novel ids
    assert!(texture_subset(30, 0.75, &mut rng).is_err());
}

#[test]
fn twisty_turns_are_sharper_than_cloud() {
    let turn = |plan: &FloorPlan| {
        // sharpest heading change between consecutive spawn points
        let n = plan.spawn_points.len();
        (0..n)
            .map(|i| {
                let d = plan.spawn_points[(i + 1) % n].yaw - plan.spawn_points[i].yaw;
                d.sin().atan2(d.cos()).abs()
            })
            .fold(0.0, f64::max)
    };
    let mut sharper = 0;
    for seed in 0..10 {
        let cloud = Preset::CloudLike.generate(seed).unwrap();
        let twisty = Preset::TwistyLike.generate(seed).unwrap();
        if turn(&twisty) > turn(&cloud) {
            sharper += 1;
        }
    }
    assert!(sharper >= 9, "twisty sharper in only {sharper}/10 seeds");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn sweep_never_ends_inside_the_crash_margin(
        seed in 0u64..50,
        preset in 0usize..11,
        heading in -3.2f64..3.2,
        pitch in -1.2f64..1.2,
        length in 0.0f64..3.0,
        pick in 0u64..1000,
    ) {
        let plan = all_presets()[preset].generate(seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(pick);
        let start = loop {
            let p = random_pose(&plan, &mut rng);
            if plan.pose_clearance(&p) >= D_CRASH {
                break p;
            }
        };
        let d = [length * pitch.cos() * heading.cos(), length * pitch.cos() * heading.sin(), length * pitch.sin()];
        let out = sweep_move(&plan, &start, d, D_CRASH);
        prop_assert!(out.distance <= length + 1e-12);
        prop_assert!(out.distance >= 0.0);
        let clearance = plan.pose_clearance(&out.pose);
        if !out.collided {
            prop_assert!(clearance >= D_CRASH);
            prop_assert!((out.distance - length).abs() < 1e-12);
        } else {
            prop_assert!(clearance >= D_CRASH - 1e-9, "stopped at clearance {}", clearance);
        }
        prop_assert_eq!(out.pose.yaw, start.yaw);
    }
}
