mod common;

use common::{audit_trace, direct_reference, random_trajectory, random_visit, script_from, TruthModel, PERCEPTION_METHODS};
use hrsf_core::config::{ProfileEntry, ScenarioConfig};
use hrsf_core::geometry::Vec3;
use hrsf_core::reference::reference_scenario;
use hrsf_core::sim::trace::{measure_cycle_time, write_trace_csv, TraceRecord};
use hrsf_core::sim::{laser_field, run_method, RunMethod};
use hrsf_core::{BodyPartLabel, Error};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn record(t_s: f64, q: f64) -> TraceRecord {
    TraceRecord {
        t_s,
        q_rad: vec![q, 0.5],
        tcp_mm: Vec3::zeros(),
        commanded_mm_s: 0.0,
        actual_mm_s: 0.0,
        separation_mm: None,
        limiting_part: None,
        phase: None,
    }
}

/// Walks in from both ends: the last home sample before leaving and the first
/// sample of the closing home stretch.
fn two_pointer_cycle(trace: &[TraceRecord]) -> Option<f64> {
    let home = trace.first()?.q_rad.clone();
    let at_home = |r: &TraceRecord| r.q_rad == home;
    let mut lo = 0;
    while lo < trace.len() && at_home(&trace[lo]) {
        lo += 1;
    }
    let mut hi = trace.len();
    while hi > lo && at_home(&trace[hi - 1]) {
        hi -= 1;
    }
    (lo < trace.len() && hi < trace.len()).then(|| trace[hi].t_s - trace[lo - 1].t_s)
}

#[test]
fn cycle_time_matches_two_pointer_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut complete = 0;
    for _ in 0..2000 {
        let n = rng.random_range(1..60);
        let mut t = rng.random_range(0.0..5.0);
        let trace: Vec<TraceRecord> = (0..n)
            .map(|i| {
                t += rng.random_range(0.001..0.5);
                let q = if i == 0 || rng.random_bool(0.4) { 0.0 } else { rng.random_range(-1.0..1.0) };
                record(t, q)
            })
            .collect();
        match (measure_cycle_time(&trace), two_pointer_cycle(&trace)) {
            (Ok(a), Some(b)) => {
                assert_eq!(a, b);
                complete += 1;
            }
            (Err(Error::IncompleteCycle), None) => {}
            (got, want) => panic!("{got:?} vs {want:?}"),
        }
    }
    assert!(complete > 500);
}

fn short_direct(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = direct_reference();
    cfg.trajectory = random_trajectory(&mut rng);
    cfg.human = random_visit(&mut rng, 6.0);
    cfg
}

#[test]
fn total_failure_holds_global_minimum() {
    for (i, method) in PERCEPTION_METHODS.into_iter().enumerate() {
        let mut cfg = short_direct(40 + i as u64);
        cfg.perception.failure_rate = 1.0;
        let (records, _) = run_method(&cfg, method, 2).unwrap();
        let profile = cfg.profile(method.perception().unwrap());
        let settled = profile.t_lat_max_ms / 1000.0 + cfg.sim.dt_ms / 1000.0;
        let held: Vec<_> = records.iter().filter(|r| r.t_s >= settled).collect();
        assert!(!held.is_empty());
        for r in held {
            assert!(r.commanded_mm_s <= 50.0, "{method} at {}: {}", r.t_s, r.commanded_mm_s);
            assert!(r.actual_mm_s <= 50.1, "{method} at {}: {}", r.t_s, r.actual_mm_s);
        }
    }
}

#[test]
fn rendered_total_failure_holds_global_minimum() {
    let mut cfg = reference_scenario();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    cfg.trajectory = random_trajectory(&mut rng);
    cfg.perception.failure_rate = 1.0;
    let (records, _) = run_method(&cfg, RunMethod::BodyPartSegmentation, 4).unwrap();
    let first_limited = records.iter().position(|r| r.commanded_mm_s <= 50.0).expect("fallback reached");
    assert!(records[first_limited..].iter().all(|r| r.commanded_mm_s <= 50.0));
    assert!(records[first_limited].t_s <= 1.0);
}

#[test]
fn equal_seeds_give_identical_traces() {
    let cfg = reference_scenario();
    let csv = |records: &[TraceRecord]| {
        let mut out = Vec::new();
        write_trace_csv(records, &mut out).unwrap();
        out
    };
    for method in [RunMethod::BodyPartSegmentation, RunMethod::BodyRecognition] {
        let (a, sa) = run_method(&cfg, method, 12).unwrap();
        let (b, sb) = run_method(&cfg, method, 12).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert_eq!(csv(&a), csv(&b));
        let (c, _) = run_method(&cfg, method, 13).unwrap();
        assert_ne!(csv(&a), csv(&c), "{method}: a different seed should change the noisy run");
    }
}

fn with_budget(cfg: &ScenarioConfig, method: RunMethod, extra_ms: f64) -> ScenarioConfig {
    let mut cfg = cfg.clone();
    let mut profile = cfg.profile(method.perception().unwrap());
    profile.t_lat_max_ms += extra_ms;
    profile.latency.t_lat_max_ms += extra_ms;
    cfg.profiles.retain(|e| e.profile.name != profile.name);
    cfg.profiles.push(ProfileEntry { profile, expected_sh_mm: None });
    cfg
}

#[test]
fn longer_latency_never_shortens_the_cycle() {
    let mut standing = direct_reference();
    standing.human = script_from(vec![(0.0, 650.0, 1700.0, -1.4, 0.6), (1.0, 650.0, 1700.0, -1.4, 0.6)]);
    for base in [direct_reference(), standing] {
        for method in PERCEPTION_METHODS {
            let mut last = 0.0;
            for extra in [0.0, 50.0, 150.0, 300.0, 600.0] {
                let cfg = with_budget(&base, method, extra);
                let (_, summary) = run_method(&cfg, method, 5).unwrap();
                assert!(summary.t_cycle_s >= last - 1e-9, "{method}: +{extra} ms gives {} s after {last} s", summary.t_cycle_s);
                last = summary.t_cycle_s;
            }
        }
    }
}

#[test]
fn human_outside_laser_field_costs_nothing() {
    let mut cfg = reference_scenario();
    let field = laser_field(&cfg).unwrap();
    let y = field.max_xy_mm[1] + 400.0;
    cfg.human = script_from(vec![(0.0, 0.0, y, -1.57, 0.0), (10.0, 900.0, y + 300.0, -1.57, 1.0), (20.0, 200.0, y, -1.57, 0.5)]);
    let (records, summary) = run_method(&cfg, RunMethod::LaserScanner, 0).unwrap();
    assert!(records.iter().all(|r| r.commanded_mm_s == cfg.velocity_limits.full_speed_mm_s));
    assert!((summary.t_cycle_s - summary.no_interference_time_s).abs() <= 0.003, "{summary:?}");
}

/// With bounded noise the estimate can sit up to Z_d short of the truth, so
/// the guarantee is owed against the hull grown by Z_r alone.
#[test]
fn noisy_direct_runs_respect_robot_side_hull() {
    let mut constrained = 0;
    for i in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + i);
        let mut cfg = short_direct(600 + i);
        let method = *PERCEPTION_METHODS.choose(&mut rng).unwrap();
        cfg.method = method;
        cfg.perception.noise_sigma_scale = 1.0 / 3.0;
        cfg.perception.noise_clip_sigma = Some(3.0);
        cfg.perception.failure_rate = rng.random_range(0.0..0.1);
        cfg.regulator.clear_frames_required = rng.random_range(1..5);
        let (records, _) = run_method(&cfg, method, i).unwrap();
        assert!(records.iter().all(|r| r.actual_mm_s <= r.commanded_mm_s + 0.1));
        let profile = cfg.profile(method.perception().unwrap());
        let model = TruthModel::new(&cfg, &profile, [0.0; 3]);
        let report = audit_trace(&model, &cfg.human, &records, cfg.sim.dt_ms / 1000.0);
        assert!(report.breaches.is_empty(), "scenario {i} ({method}): {:?}", &report.breaches[..report.breaches.len().min(3)]);
        constrained += report.constrained_steps;
    }
    assert!(constrained > 0);
}

#[test]
fn audit_catches_a_lenient_regulator() {
    let mut breached = 0;
    for (i, method) in PERCEPTION_METHODS.into_iter().enumerate() {
        let cfg = short_direct(700 + i as u64);
        let mut lenient = cfg.clone();
        for label in BodyPartLabel::ALL {
            let v = lenient.velocity_limits.limits_mm_s.get_mut(&label).unwrap();
            *v = (*v * 4.0).min(lenient.velocity_limits.full_speed_mm_s);
        }
        let (records, _) = run_method(&lenient, method, 0).unwrap();
        let profile = cfg.profile(method.perception().unwrap());
        let model = TruthModel::new(&cfg, &profile, profile.z_d_mm.into());
        breached += audit_trace(&model, &cfg.human, &records, cfg.sim.dt_ms / 1000.0).breaches.len();
    }
    assert!(breached > 0, "raised limits went unnoticed");
}
