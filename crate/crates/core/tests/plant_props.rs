mod common;

use std::f64::consts::TAU;

use proptest::collection::vec;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use mir_core::config::BringupConfig;
use mir_core::firmware::QuadratureDecoder;
use mir_core::msgs::{topics, Message, Timestamp};
use mir_core::plant::{
    encoder_edges, encoder_position, parse_world, scan_lidar, LidarConfig, Plant, PlantConfig, PlantError, Pose,
    VehicleState, WorldModel,
};
use mir_core::sim::{JoyScript, Sim};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn state_stays_within_actuator_limits(duties in vec((-1.0..=1.0f64, -1.0..=1.0f64), 1..300)) {
        let mut p = Plant::new(PlantConfig::default()).unwrap();
        let c = p.config().clone();
        for (k, (s, d)) in duties.iter().enumerate() {
            let st = p.step(*s, *d, 0.01, Timestamp(k as f64 * 0.01)).unwrap();
            prop_assert!(st.speed.abs() <= c.v_max);
            prop_assert!(st.steer_angle.abs() <= c.steer_limit);
            prop_assert_eq!(st.steer_shaft_angle, st.steer_angle * c.steer_gear_ratio);
        }
    }

    #[test]
    fn edges_reach_the_new_position(a in -500.0..500.0f64, b in -500.0..500.0f64) {
        let from = encoder_position(a, 600);
        let to = encoder_position(b, 600);
        let edges = encoder_edges(a, b, 600);
        prop_assert_eq!(edges.len() as i64, (to - from).abs());
        let (ga, gb) = common::gray(from);
        let mut dec = QuadratureDecoder::new(mir_core::firmware::PhasePair { a: ga, b: gb });
        dec.update_all(&edges);
        prop_assert_eq!(dec.count(), to - from);
        prop_assert_eq!(dec.invalid_transitions(), 0);
    }

    #[test]
    fn lidar_matches_march_oracle(seed in any::<u64>(), n in 1usize..=20) {
        use rand::Rng;
        let mut rng = StdRng::seed_from_u64(seed);
        let world = WorldModel::new((0..n).map(|_| common::random_segment(&mut rng, 6.0)).collect());
        let pose = Pose { x: rng.gen_range(-1.0..1.0), y: rng.gen_range(-1.0..1.0), heading: rng.gen_range(-3.0..3.0) };
        let cfg = LidarConfig::default();
        let scan = scan_lidar(&world, pose, &cfg, Timestamp::ZERO);
        for i in (0..360).step_by(7) {
            let angle = pose.heading + (i as f64).to_radians();
            let oracle = common::march_ray(&world.segments, pose.x, pose.y, angle, 5.0, 1000);
            match oracle {
                Some(r) => {
                    prop_assert!(scan.valid[i], "beam {i}: oracle {r}");
                    prop_assert!((scan.ranges[i] - r).abs() <= 1e-3);
                }
                None => prop_assert!(!scan.valid[i] && scan.ranges[i] == 0.0, "beam {i}: {}", scan.ranges[i]),
            }
        }
    }
}

#[test]
fn rest_is_fixed_point_for_any_dt() {
    for dt in [1e-4, 1e-3, 0.02, 0.5] {
        let mut p = Plant::new(PlantConfig::default()).unwrap();
        for _ in 0..100 {
            p.step(0.0, 0.0, dt, Timestamp::ZERO).unwrap();
        }
        assert_eq!(*p.state(), VehicleState::default());
    }
}

#[test]
fn world_file_errors_name_the_line() {
    assert!(matches!(parse_world("0 0 1 1\n1 2 3\n"), Err(PlantError::WorldParse { line: 2, .. })));
    assert!(matches!(parse_world("# header\nx 0 1 1\n"), Err(PlantError::WorldParse { line: 2, .. })));
    assert_eq!(parse_world("# only a comment\n\n").unwrap(), WorldModel::default());
}

/// Driving straight for 10 m, distance from the published encoder counts
/// matches the plant's displacement.
#[test]
fn odometry_matches_displacement_over_ten_meters() {
    let cfg = BringupConfig::default();
    let mut sim = Sim::new(&cfg, JoyScript::new().push(0.0, &[0.0, 1.0])).unwrap();
    let probe = sim.bus().node("probe").unwrap();
    let sub = probe.subscribe(topics::ENCODER_PULSE, 100).unwrap();
    let mut last = None;
    while sim.plant().state().x < 10.0 {
        sim.step().unwrap();
        for env in sub.drain() {
            if let Message::EncoderPulse(p) = &*env.msg {
                last = Some((*p, sim.plant().state().x));
            }
        }
    }
    let (pulse, x) = last.unwrap();
    let c = &cfg.plant;
    let dist = pulse.drive_count as f64 / (4.0 * c.encoder_ppr as f64 * c.drive_gear_ratio) * TAU * c.wheel_radius;
    assert!(x > 9.9);
    assert!((dist - x).abs() / x < 0.005, "encoder {dist} vs plant {x}");
}
