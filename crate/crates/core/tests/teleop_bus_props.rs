use proptest::collection::vec;
use proptest::prelude::*;

use mir_core::bus::{Bus, TopicSpec};
use mir_core::msgs::{CameraFrame, JoyState, Message, SchemaId, Timestamp};
use mir_core::teleop::{joy_to_vehicle, TeleopConfig};

fn map(cfg: &TeleopConfig, s: f64, t: f64) -> (f64, f64) {
    let j = JoyState { axes: vec![s, t], buttons: vec![], stamp: Timestamp::ZERO };
    let c = joy_to_vehicle(&j, cfg).unwrap();
    (c.steering, c.throttle)
}

fn teleop_config() -> impl Strategy<Value = TeleopConfig> {
    (0.0..0.45f64, 0.05..=1.0f64, 0.05..=1.0f64, any::<bool>()).prop_map(|(deadzone, ss, ts, inv)| TeleopConfig {
        deadzone,
        steering_scale: ss,
        throttle_scale: ts,
        invert_steering: inv,
        ..Default::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn mapping_is_odd(cfg in teleop_config(), s in -1.0..=1.0f64, t in -1.0..=1.0f64) {
        let (a, b) = map(&cfg, s, t);
        let (na, nb) = map(&cfg, -s, -t);
        prop_assert_eq!((a, b), (-na, -nb));
        prop_assert!(a.abs() <= 1.0 && b.abs() <= 1.0);
    }

    #[test]
    fn mapping_is_monotone(cfg in teleop_config(), x in -1.0..=1.0f64, y in -1.0..=1.0f64) {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let sign = if cfg.invert_steering { -1.0 } else { 1.0 };
        prop_assert!(map(&cfg, 0.0, lo).1 <= map(&cfg, 0.0, hi).1);
        prop_assert!(sign * map(&cfg, lo, 0.0).0 <= sign * map(&cfg, hi, 0.0).0);
    }

    #[test]
    fn continuous_at_deadzone_edge(cfg in teleop_config()) {
        let eps = 1e-9;
        for edge in [cfg.deadzone, -cfg.deadzone] {
            let below = map(&cfg, 0.0, edge - eps).1;
            let above = map(&cfg, 0.0, edge + eps).1;
            prop_assert!((below - above).abs() < 1e-6);
        }
    }

    /// Interleaved publishes on two topics: each subscriber sees exactly its
    /// own topic's messages, in publish order, as the suffix that fits its
    /// queue.
    #[test]
    fn delivery_is_ordered_without_cross_talk(pattern in vec(any::<bool>(), 0..200), depth in 1u16..50) {
        let bus = Bus::new();
        let p = bus.node("p").unwrap();
        let a = p.advertise(TopicSpec::new("/a", SchemaId::CameraFrame)).unwrap();
        let b = p.advertise(TopicSpec::new("/b", SchemaId::CameraFrame)).unwrap();
        let s = bus.node("s").unwrap();
        let sa = s.subscribe("/a", depth).unwrap();
        let sb = s.subscribe("/b", 200).unwrap();
        let (mut na, mut nb) = (0u64, 0u64);
        for &on_a in &pattern {
            if on_a {
                a.publish(CameraFrame { counter: na, stamp: Timestamp::ZERO }).unwrap();
                na += 1;
            } else {
                b.publish(CameraFrame { counter: 1_000_000 + nb, stamp: Timestamp::ZERO }).unwrap();
                nb += 1;
            }
        }
        let counters = |envs: Vec<mir_core::bus::Envelope>, topic: &str| -> Vec<u64> {
            envs.into_iter()
                .map(|e| {
                    assert_eq!(&*e.topic, topic);
                    match &*e.msg {
                        Message::Camera(c) => c.counter,
                        other => panic!("unexpected {other:?}"),
                    }
                })
                .collect()
        };
        let got_a = counters(sa.drain(), "/a");
        let got_b = counters(sb.drain(), "/b");
        let kept = na.min(depth as u64);
        prop_assert_eq!(got_a, (na - kept..na).collect::<Vec<_>>());
        prop_assert_eq!(sa.dropped(), na - kept);
        prop_assert_eq!(got_b, (0..nb).map(|k| 1_000_000 + k).collect::<Vec<_>>());
        let g = bus.graph();
        for edge in [("p", "/a"), ("p", "/b"), ("/a", "s"), ("/b", "s")] {
            prop_assert!(g.edges.contains(&(edge.0.to_string(), edge.1.to_string())));
        }
    }
}

#[test]
fn delivered_messages_follow_graph_edges() {
    let bus = Bus::new();
    let p = bus.node("p").unwrap();
    let pubr = p.advertise(TopicSpec::new("/x", SchemaId::CameraFrame)).unwrap();
    let s = bus.node("s").unwrap();
    let sub = s.subscribe("/x", 10).unwrap();
    pubr.publish(CameraFrame::default()).unwrap();
    assert!(bus.graph().edges.contains(&("/x".to_string(), "s".to_string())));
    assert_eq!(sub.drain().len(), 1);
    drop(sub);
    assert!(!bus.graph().edges.contains(&("/x".to_string(), "s".to_string())));
    pubr.publish(CameraFrame::default()).unwrap();
}
