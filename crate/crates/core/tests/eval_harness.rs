use navtl::action::ActionSpaceSpec;
use navtl::env::{render, AgentPose, Camera, FloorPlan, Preset, D_CRASH};
use navtl::eval::{evaluate_msf, export_q_heatmap, fly, spawn_poses, EvalSettings};
use navtl::nn::{build_desk_network, Network};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn settings(cap_m: f64) -> EvalSettings {
    EvalSettings { cap_m, ..EvalSettings::default() }
}

fn small_camera() -> Camera {
    Camera { height: 16, width: 16, ..Camera::default() }
}

/// All-zero weights with one advantage bias raised: always picks `action`.
fn fixed_policy(action: usize) -> Network {
    let mut net = Network::zeroed(build_desk_network(16, 16, 25).unwrap()).unwrap();
    net.params_mut("advantage_head").unwrap().bias.data_mut()[action] = 1.0;
    net
}

/// Dead-end corridor along +x, 4 m wide, closed at x = 20.
fn dead_end() -> FloorPlan {
    FloorPlan::from_text(
        "name dead-end\nfloor_z 0\nceil_z 3\n\
         wall -5 -2 20 -2 1\nwall -5 2 20 2 2\nwall 20 -2 20 2 3\nwall -5 -2 -5 2 4\n\
         spawn 0 0 1.5 0\n",
    )
    .unwrap()
}

#[test]
fn straight_flight_stops_at_the_crash_margin() {
    let plan = dead_end();
    let action = ActionSpaceSpec { b_rad: 0.0, ..ActionSpaceSpec::default() };
    let net = fixed_policy(12);
    let start = AgentPose::new(0.25, 0.0, 1.5, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let far = fly(&plan, &net, &action, &small_camera(), start, &settings(1000.0), &mut rng).unwrap();
    assert!((far - (20.0 - D_CRASH - 0.25)).abs() < 1e-9, "{far}");
    let capped = fly(&plan, &net, &action, &small_camera(), start, &settings(7.3), &mut rng).unwrap();
    assert!((capped - 7.3).abs() < 1e-9, "{capped}");
}

#[test]
fn zero_cap_flies_nowhere() {
    let plan = Preset::CloudLike.generate(0).unwrap();
    let net = fixed_policy(12);
    let settings = EvalSettings { n_spawns: 3, cap_m: 0.0, ..EvalSettings::default() };
    let report = evaluate_msf(&plan, &net, &ActionSpaceSpec::default(), &small_camera(), &settings).unwrap();
    assert_eq!(report.msf, 0.0);
    assert_eq!(report.distances, vec![0.0; 3]);
}

#[test]
fn msf_never_drops_as_the_cap_grows() {
    let plan = Preset::TwistyLike.generate(4).unwrap();
    for action in [12, 7, 3] {
        let net = fixed_policy(action);
        let mut prev: Option<Vec<f64>> = None;
        for cap in [0.0, 1.0, 2.5, 6.0, 15.0, 40.0] {
            let settings = EvalSettings { n_spawns: 4, seed: 2, cap_m: cap, ..EvalSettings::default() };
            let r = evaluate_msf(&plan, &net, &ActionSpaceSpec::default(), &small_camera(), &settings).unwrap();
            assert!(r.distances.iter().all(|&d| d <= cap + 1e-9));
            if let Some(p) = &prev {
                for (a, b) in p.iter().zip(&r.distances) {
                    assert!(b + 1e-9 >= *a, "action {action} cap {cap}: {b} < {a}");
                }
            }
            prev = Some(r.distances);
        }
    }
}

#[test]
fn spawns_are_shared_and_seeded() {
    let plan = Preset::CondoLike.generate(1).unwrap();
    let a = spawn_poses(&plan, 10, 3).unwrap();
    assert_eq!(a, spawn_poses(&plan, 10, 3).unwrap());
    assert_ne!(a, spawn_poses(&plan, 10, 4).unwrap());
    assert!(a.iter().all(|p| plan.pose_clearance(p) >= D_CRASH));
    let settings = EvalSettings { n_spawns: 10, seed: 3, cap_m: 5.0, ..EvalSettings::default() };
    let r1 = evaluate_msf(&plan, &fixed_policy(0), &ActionSpaceSpec::default(), &small_camera(), &settings).unwrap();
    let r2 = evaluate_msf(&plan, &fixed_policy(24), &ActionSpaceSpec::default(), &small_camera(), &settings).unwrap();
    assert_eq!(r1.spawns, r2.spawns);
    assert_ne!(r1.checkpoint_id, r2.checkpoint_id);
}

#[test]
fn evaluation_rejects_incompatible_networks() {
    let plan = Preset::CloudLike.generate(0).unwrap();
    let settings = EvalSettings { n_spawns: 1, ..EvalSettings::default() };
    assert!(evaluate_msf(&plan, &fixed_policy(0), &ActionSpaceSpec::default(), &Camera::default(), &settings).is_err());
    let nine = ActionSpaceSpec { n: 3, ..ActionSpaceSpec::default() };
    assert!(evaluate_msf(&plan, &fixed_policy(0), &nine, &small_camera(), &settings).is_err());
}

#[test]
fn heatmap_places_and_normalizes_q_values() {
    let plan = Preset::CloudLike.generate(0).unwrap();
    let obs = render(&plan, &plan.spawn_points[0], &small_camera()).unwrap();
    let action = ActionSpaceSpec::default();
    let net = Network::new(build_desk_network(16, 16, 25).unwrap(), 7).unwrap();
    let q = net.q_values(&obs.data).unwrap();
    let h = export_q_heatmap(&net, &obs.data, &action).unwrap();
    let (lo, hi) = q.iter().fold((f32::MAX, f32::MIN), |(l, h), &v| (l.min(v), h.max(v)));
    for (a, &v) in q.iter().enumerate() {
        let (i, j) = action.index_to_bin(a).unwrap();
        let want = (v as f64 - lo as f64) / (hi as f64 - lo as f64);
        assert!((h.get(i, j) - want).abs() < 1e-12);
    }
    assert!(h.values.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(h.values.contains(&0.0) && h.values.contains(&1.0));
    assert_eq!(h.to_csv().lines().count(), 5);

    let flat = Network::zeroed(build_desk_network(16, 16, 25).unwrap()).unwrap();
    assert!(export_q_heatmap(&flat, &obs.data, &action).unwrap().values.iter().all(|&v| v == 0.0));
}
