//! Acceptance suite. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use mir_core::config::BringupConfig;
use mir_core::daq::{replay_session, RecordingConfig, Session, LOG_FILE};
use mir_core::firmware::{ControlUnit, FirmwareConfig, PhasePair, QuadratureDecoder};
use mir_core::msgs::{
    euler_to_quaternion, quaternion_to_euler, remap_razor_to_rep103, topics, EulerAngles, Message, Timestamp,
    Vector3, VehicleControl,
};
use mir_core::plant::{encoder_edges, scan_lidar, LidarConfig, Plant, PlantConfig, Pose, Segment, WorldModel};
use mir_core::sim::{JoyScript, Sim};
use mir_core::wire::{Frame, StreamDecoder, MAX_PAYLOAD};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn recording(dir: &Path, name: &str) -> RecordingConfig {
    RecordingConfig { output_dir: dir.to_path_buf(), session_name: name.into(), ..Default::default() }
}

fn phase_of(n: i64) -> PhasePair {
    let (a, b) = common::gray(n);
    PhasePair { a, b }
}

// ---- max speed ----

fn max_speed() -> Outcome {
    let start = Instant::now();
    let cfg = BringupConfig::default();
    let mut sim = Sim::new(&cfg, JoyScript::new().push(0.0, &[0.0, 1.0])).map_err(|e| e.to_string())?;
    let probe = sim.bus().node("probe").unwrap();
    let sub = probe.subscribe(topics::ENCODER_PULSE, 1000).unwrap();
    sim.run_until(3.0).map_err(|e| e.to_string())?;
    let pulses: Vec<_> = sub
        .drain()
        .into_iter()
        .filter_map(|e| match &*e.msg {
            Message::EncoderPulse(p) => Some(*p),
            _ => None,
        })
        .collect();
    let wall = start.elapsed().as_secs_f64();
    let c = &cfg.plant;
    let meters_per_count = TAU * c.wheel_radius / (4.0 * c.encoder_ppr as f64 * c.drive_gear_ratio);
    // Difference over the last 0.2 s of pulses.
    let (a, b) = match pulses.as_slice() {
        [.., a, _, _, _, _, _, _, _, _, _, b] => (*a, *b),
        _ => return Err(format!("only {} pulses", pulses.len())),
    };
    let v = (b.drive_count - a.drive_count) as f64 * meters_per_count / (b.stamp.0 - a.stamp.0);
    let err = (v - 1.12).abs() / 1.12;
    check(err <= 0.01 && wall < 5.0, format!("v = {v:.5} m/s ({:.3}% off 1.12), wall {wall:.3} s", err * 100.0))
}

// ---- encoder arithmetic ----

fn encoder_arithmetic() -> Outcome {
    let cfg = PlantConfig::default();
    let expected = 4 * cfg.encoder_ppr as i64 * cfg.drive_gear_ratio as i64;
    let rev_shaft = TAU * cfg.drive_gear_ratio;
    let mut plant = Plant::new(cfg.clone()).map_err(|e| e.to_string())?;
    let mut fw = ControlUnit::new(FirmwareConfig::default());
    let mut angles = vec![0.0];
    let mut seq = 0;
    let mut tick = 0u64;
    let (mut duty_steer, mut duty_drive) = (0.0, 0.0);
    // A slow throttle keeps the shaft under one count per tick, so the
    // revolution ends on a tick boundary to within a count.
    while plant.state().drive_shaft_angle < rev_shaft {
        tick += 1;
        let now = Timestamp(tick as f64 * 1e-3);
        if tick % 100 == 1 {
            seq += 1;
            fw.handle_vehicle_control(VehicleControl::new(0.0, 0.05, now, seq), now);
        }
        let prev = *plant.state();
        let curr = *plant.step(duty_steer, duty_drive, 1e-3, now).map_err(|e| e.to_string())?;
        let steer = encoder_edges(prev.steer_shaft_angle, curr.steer_shaft_angle, cfg.encoder_ppr);
        let drive = encoder_edges(prev.drive_shaft_angle, curr.drive_shaft_angle, cfg.encoder_ppr);
        let out = fw.tick(&steer, &drive, now);
        (duty_steer, duty_drive) = (out.steer.duty, out.drive.duty);
        angles.push(curr.drive_shaft_angle);
        if tick > 10_000_000 {
            return Err("wheel never completed a revolution".into());
        }
    }
    let oracle = common::enumerate_edges(&angles, cfg.encoder_ppr, 8);
    let count = fw.drive_count();
    check(
        (count - expected).abs() <= 1 && count == oracle && fw.invalid_transitions() == 0,
        format!("firmware {count}, oracle {oracle}, expected {expected} (4 x {} x {})", cfg.encoder_ppr, cfg.drive_gear_ratio),
    )
}

// ---- quadrature ----

fn quadrature() -> Outcome {
    const PPR: u32 = 600;
    let edge = TAU / (4 * PPR) as f64;
    let mut rng = StdRng::seed_from_u64(1);
    let pos = |a: f64| common::angle_to_counts(a, PPR).floor() as i64;
    let mut worst = 0.0f64;
    let mut invalid = 0;
    for _ in 0..100_000 {
        let start = rng.gen_range(-100.0..100.0);
        let mut angle = start;
        let mut dec = QuadratureDecoder::new(phase_of(pos(angle)));
        for _ in 0..rng.gen_range(1..60) {
            angle += rng.gen_range(-0.95..0.95) * edge;
            dec.update(phase_of(pos(angle)));
        }
        let expected = common::angle_to_counts(angle, PPR) - common::angle_to_counts(start, PPR);
        worst = worst.max((dec.count() as f64 - expected).abs());
        invalid += dec.invalid_transitions();
    }
    let mut table_ok = 0;
    for from in 0..4i64 {
        for to in 0..4i64 {
            let mut dec = QuadratureDecoder::new(phase_of(from));
            let r = dec.update(phase_of(to));
            let ok = match common::gray_step(common::gray(from), common::gray(to)) {
                Some(d) => !r.invalid && r.delta as i64 == d && dec.count() == d,
                None => r.invalid && dec.count() == 0,
            };
            table_ok += ok as u32;
        }
    }
    check(
        worst <= 1.0 && invalid == 0 && table_ok == 16,
        format!("1e5 trajectories, worst error {worst:.3} counts; {table_ok}/16 transitions per table"),
    )
}

// ---- wire ----

fn random_frame(rng: &mut StdRng) -> (u16, Vec<u8>) {
    let n = if rng.gen_bool(0.05) { rng.gen_range(0..=MAX_PAYLOAD) } else { rng.gen_range(0..64) };
    (rng.gen(), (0..n).map(|_| rng.gen()).collect())
}

fn feed_chunked(dec: &mut StreamDecoder, bytes: &[u8], rng: &mut StdRng) -> Vec<Frame> {
    let mut out = Vec::new();
    let mut rest = bytes;
    while !rest.is_empty() {
        let n = rng.gen_range(1..=17).min(rest.len());
        out.extend(dec.feed(&rest[..n]));
        rest = &rest[n..];
    }
    out
}

fn wire() -> Outcome {
    const CASES: usize = 100_000;
    let mut rng = StdRng::seed_from_u64(2);
    let mut violations = [0usize; 4];
    for _ in 0..CASES {
        // Round trip against the reference encoding.
        let (topic, payload) = random_frame(&mut rng);
        let f = Frame::new(topic, payload.clone()).unwrap();
        let bytes = f.encode();
        let mut dec = StreamDecoder::new();
        if bytes != common::frame_bytes(topic, &payload) || dec.feed(&bytes) != vec![f.clone()] {
            violations[0] += 1;
        }

        // Chunking: any split gives the same frames and stats as one feed.
        let mut stream: Vec<u8> = (0..rng.gen_range(0..20)).map(|_| rng.gen()).collect();
        for _ in 0..rng.gen_range(1..4) {
            let (t, p) = random_frame(&mut rng);
            stream.extend(common::frame_bytes(t, &p));
        }
        let mut whole = StreamDecoder::new();
        let mut split = StreamDecoder::new();
        let a = whole.feed(&stream);
        let b = feed_chunked(&mut split, &stream, &mut rng);
        if a != b || whole.stats() != split.stats() || whole.state() != split.state() {
            violations[1] += 1;
        }

        // Resync: random garbage, then a real frame, then enough idle
        // bytes to finish any false header the garbage started.
        let mut stream: Vec<u8> = (0..rng.gen_range(0..200)).map(|_| rng.gen()).collect();
        stream.extend(&bytes);
        stream.extend(std::iter::repeat_n(0u8, MAX_PAYLOAD + 8));
        let mut dec = StreamDecoder::new();
        if !feed_chunked(&mut dec, &stream, &mut rng).contains(&f) {
            violations[2] += 1;
        }

        // One flipped bit is never accepted, and the next frame survives.
        let mut flipped = bytes.clone();
        let bit = rng.gen_range(0..flipped.len() * 8);
        flipped[bit / 8] ^= 1 << (bit % 8);
        let follower = Frame::new(7, vec![1, 2, 3]).unwrap();
        flipped.extend(follower.encode());
        let mut dec = StreamDecoder::new();
        let out = dec.feed(&flipped);
        if out.contains(&f) || out.last() != Some(&follower) {
            violations[3] += 1;
        }
    }
    check(
        violations.iter().all(|&v| v == 0),
        format!(
            "1e5 cases each; violations: round-trip {}, chunking {}, resync {}, bit-flip {}",
            violations[0], violations[1], violations[2], violations[3]
        ),
    )
}

// ---- topology ----

fn topology() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = BringupConfig { daq: Some(recording(dir.path(), "graph")), ..Default::default() };
    let sim = Sim::new(&cfg, JoyScript::new()).map_err(|e| e.to_string())?;
    let g = sim.bus().graph();
    let chain = [
        ("joy", "/joy"),
        ("/joy", "joy2vehicle"),
        ("joy2vehicle", "/vehicle_control"),
        ("/vehicle_control", "serial_node"),
        ("serial_node", "/encoder_pulse"),
        ("/encoder_pulse", "data_acquisition"),
    ];
    let sensors = [
        ("serial_node", "/heartbeat"),
        ("lidar", "/scan"),
        ("/scan", "data_acquisition"),
        ("imu", "/imu"),
        ("/imu", "data_acquisition"),
        ("camera", "/camera_stub"),
        ("/camera_stub", "data_acquisition"),
    ];
    let expected: BTreeSet<(String, String)> =
        chain.iter().chain(&sensors).map(|(a, b)| (a.to_string(), b.to_string())).collect();
    let missing: Vec<_> = expected.difference(&g.edges).collect();
    let extra: Vec<_> = g.edges.difference(&expected).collect();
    sim.shutdown().map_err(|e| e.to_string())?;
    check(
        missing.is_empty() && extra.is_empty(),
        format!("{} edges; missing {missing:?}, unexpected {extra:?}", g.edges.len()),
    )
}

// ---- lidar ----

fn lidar() -> Outcome {
    let cfg = LidarConfig::default();
    let origin = Pose { x: 0.0, y: 0.0, heading: 0.0 };
    let wall = WorldModel::new(vec![Segment::new(2.0, -10.0, 2.0, 10.0)]);
    let scan = scan_lidar(&wall, origin, &cfg, Timestamp::ZERO);
    let (r0, r60) = (scan.ranges[0], scan.ranges[60]);
    let geometry = scan.valid[0] && scan.valid[60] && (r0 - 2.0).abs() <= 1e-6 && (r60 - 4.0).abs() <= 1e-6;

    let far = WorldModel::new(vec![Segment::new(5.5, -10.0, 5.5, 10.0)]);
    let beyond = scan_lidar(&far, origin, &cfg, Timestamp::ZERO);
    let cutoff = !beyond.valid[0] && beyond.ranges[0] == 0.0 && cfg.range_max() == 5.0;

    let mut rng = StdRng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=20);
        let world = WorldModel::new((0..n).map(|_| common::random_segment(&mut rng, 6.0)).collect());
        let pose = Pose { x: rng.gen_range(-1.0..1.0), y: rng.gen_range(-1.0..1.0), heading: rng.gen_range(-PI..PI) };
        let scan = scan_lidar(&world, pose, &cfg, Timestamp::ZERO);
        for i in 0..360 {
            let angle = pose.heading + (i as f64).to_radians();
            match common::march_ray(&world.segments, pose.x, pose.y, angle, cfg.range_max(), 50) {
                Some(r) if scan.valid[i] => worst = worst.max((scan.ranges[i] - r).abs()),
                None if !scan.valid[i] => {}
                _ => mismatched += 1,
            }
        }
    }
    check(
        geometry && cutoff && worst <= 1e-3 && mismatched == 0,
        format!(
            "beam 0 = {r0:.9}, beam 60 = {r60:.9}, cutoff {}; 100 worlds: worst {worst:.2e} m, {mismatched} hit/miss mismatches",
            if cutoff { "enforced" } else { "violated" }
        ),
    )
}

// ---- quaternions ----

fn quaternions() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let (mut norm, mut round, mut matrix, mut involution) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    let wrap = |a: f64| (a + PI).rem_euclid(TAU) - PI;
    for _ in 0..100_000 {
        let (r, y) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let p = rng.gen_range(-FRAC_PI_2 + 0.01..FRAC_PI_2 - 0.01);
        let q = euler_to_quaternion(EulerAngles::new(r, p, y)).map_err(|e| e.to_string())?;
        norm = norm.max((q.norm() - 1.0).abs());
        let e = quaternion_to_euler(q).map_err(|e| e.to_string())?;
        for (got, want) in [(e.roll, r), (e.pitch, p), (e.yaw, y)] {
            round = round.max(wrap(got - want).abs());
        }
        matrix = matrix.max(common::mat_max_diff(&common::quat_matrix(q), &common::euler_matrix(r, p, y)));
        let v = Vector3::new(rng.gen_range(-1e6..1e6), rng.gen_range(-1e6..1e6), rng.gen_range(-1e6..1e6));
        let once = remap_razor_to_rep103(v);
        if remap_razor_to_rep103(once) != v || once.norm() != v.norm() {
            involution += 1;
        }
    }
    check(
        norm <= 1e-9 && round <= 1e-6 && matrix <= 1e-12 && involution == 0,
        format!(
            "1e5 cases: norm err {norm:.1e}, round-trip err {round:.1e} rad, matrix err {matrix:.1e}, involution violations {involution}"
        ),
    )
}

// ---- determinism ----

fn scripted_run(dir: &Path, name: &str) -> Result<(), String> {
    let cfg = BringupConfig {
        seed: 7,
        link: mir_core::wire::PipeConfig { per_byte_latency: 1e-5, drop_probability: 0.003 },
        daq: Some(recording(dir, name)),
        ..Default::default()
    };
    let script = JoyScript::new().push(0.0, &[0.0, 1.0]).push(1.5, &[0.6, 0.8]).push(3.0, &[-0.4, 0.5]).disconnect(4.5);
    let wall = WorldModel::new(vec![Segment::new(3.0, -5.0, 3.0, 5.0), Segment::new(-2.0, 2.0, 4.0, 2.5)]);
    let mut sim = Sim::with_world(&cfg, script, wall).map_err(|e| e.to_string())?;
    sim.run_until(6.0).map_err(|e| e.to_string())?;
    sim.shutdown().map_err(|e| e.to_string())?;
    Ok(())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    scripted_run(dir.path(), "a")?;
    scripted_run(dir.path(), "b")?;
    let a = fs::read(dir.path().join("a").join(LOG_FILE)).map_err(|e| e.to_string())?;
    let b = fs::read(dir.path().join("b").join(LOG_FILE)).map_err(|e| e.to_string())?;
    let identical = !a.is_empty() && a == b;

    let first = Session::open(dir.path().join("a")).map_err(|e| e.to_string())?;
    replay_session(&first, 1.0, Some(recording(dir.path(), "c"))).map_err(|e| e.to_string())?;
    let again = Session::open(dir.path().join("c")).map_err(|e| e.to_string())?;
    let mut differing = Vec::new();
    for topic in first.topics() {
        let x: Vec<_> = first.topic_records(&topic).iter().map(|r| (r.t, r.data.clone())).collect();
        let y: Vec<_> = again.topic_records(&topic).iter().map(|r| (r.t, r.data.clone())).collect();
        if x != y {
            differing.push(topic);
        }
    }
    check(
        identical && differing.is_empty(),
        format!(
            "seeded runs {} ({} bytes); re-recorded topics differing: {differing:?}",
            if identical { "byte-identical" } else { "differ" },
            a.len()
        ),
    )
}

// ---- watchdog ----

fn watchdog() -> Outcome {
    let cfg = BringupConfig::default();
    let mut sim = Sim::new(&cfg, JoyScript::new().push(0.0, &[0.0, 1.0])).map_err(|e| e.to_string())?;
    sim.run_until(3.0).map_err(|e| e.to_string())?;
    let v0 = sim.plant().state().speed;
    let halted = sim.now().0;
    sim.halt_teleop();
    let mut zeroed = None;
    let mut stopped = None;
    while sim.now().0 < halted + 3.0 {
        sim.step().map_err(|e| e.to_string())?;
        let t = sim.now().0;
        if zeroed.is_none() && sim.pwm() == (0.0, 0.0) {
            zeroed = Some(t);
        }
        if zeroed.is_some() && stopped.is_none() && sim.plant().state().speed.abs() < 0.01 {
            stopped = Some(t);
        }
    }
    let tau = cfg.plant.drive_time_constant;
    match (zeroed, stopped) {
        (Some(z), Some(s)) => check(
            z - halted <= 0.5 + 1e-9 && s - z <= 5.0 * tau + 1e-9,
            format!("from {v0:.3} m/s: PWM zero after {:.3} s, below 0.01 m/s {:.3} s later (5 tau = {:.2})", z - halted, s - z, 5.0 * tau),
        ),
        _ => Err(format!("PWM zeroed at {zeroed:?}, stopped at {stopped:?}")),
    }
}

// ---- throughput ----

fn throughput() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = BringupConfig { daq: Some(recording(dir.path(), "load")), ..Default::default() };
    let script = JoyScript::new().push(0.0, &[0.3, 1.0]).push(30.0, &[-0.3, 0.7]);
    let wall = WorldModel::new(vec![Segment::new(4.0, -4.0, 4.0, 4.0), Segment::new(-4.0, 4.0, 4.0, 4.0)]);
    let start = Instant::now();
    let mut sim = Sim::with_world(&cfg, script, wall).map_err(|e| e.to_string())?;
    sim.run_until(60.0).map_err(|e| e.to_string())?;
    let ticks = sim.ticks();
    let manifest = sim.shutdown().map_err(|e| e.to_string())?.ok_or("recorder missing")?;
    let wall = start.elapsed().as_secs_f64();
    let records: u64 = manifest.counts.values().sum();
    check(
        wall < 10.0 && ticks == 60_000,
        format!("60 sim-s ({ticks} ticks, {records} records logged) in {wall:.3} wall-s"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("max speed", max_speed),
        ("encoder arithmetic", encoder_arithmetic),
        ("quadrature oracle", quadrature),
        ("wire robustness", wire),
        ("topology", topology),
        ("lidar geometry", lidar),
        ("quaternion suite", quaternions),
        ("determinism", determinism),
        ("watchdog", watchdog),
        ("throughput", throughput),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
