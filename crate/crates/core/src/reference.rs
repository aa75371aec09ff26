//! The reference screwing cell used by the fixtures and the test suites.
//!
//! A 7-axis arm on a 900 mm table tightens three screws on the side facing a
//! worker. The worker alternates between a distant bench, handing over
//! parts from arm's length and working right next to the robot.

use std::f64::consts::FRAC_PI_2;

use crate::config::{
    LaserSettings, LatencySettings, PerceptionMode, PerceptionSection, RegulatorSettings, RobotSection, ScenarioConfig,
    SimSettings, SCHEMA_VERSION,
};
use crate::geometry::{DhParameterTable, Vec3};
use crate::perception::{CameraExtrinsics, CameraIntrinsics};
use crate::regulator::VelocityLimitTable;
use crate::safety::{HumanSpeedPolicy, SafetyConstants};
use crate::sim::human::{standing_pose, HumanKeyframe, HumanMotionScript, Phase, PhaseSpan};
use crate::sim::render::CameraModel;
use crate::sim::trajectory::{Dwell, RobotTrajectory};
use crate::sim::RunMethod;

pub const FLOOR_Z_MM: f64 = -900.0;

fn pose(base_rad: f64, shoulder_rad: f64, elbow_rad: f64, wrist_rad: f64) -> Vec<f64> {
    vec![base_rad, shoulder_rad, 0.0, elbow_rad, 0.0, wrist_rad, 0.0]
}

pub fn reference_trajectory() -> RobotTrajectory {
    let home = pose(0.0, 0.2, -1.8, 0.9);
    let above = |base| pose(base, 0.55, -1.4, 1.3);
    let screw = |base| pose(base, 0.9, -1.2, 1.0);
    let bases = [0.4, 0.8, 1.2];
    let mut waypoints = vec![home.clone()];
    let mut speeds = Vec::new();
    let mut dwells = Vec::new();
    for (i, b) in bases.into_iter().enumerate() {
        waypoints.push(above(b));
        speeds.push(500.0);
        waypoints.push(screw(b));
        speeds.push(100.0);
        dwells.push(Dwell { at_waypoint: waypoints.len() - 1, duration_s: 0.5, label: format!("screw {}", i + 1) });
        waypoints.push(above(b));
        speeds.push(100.0);
    }
    waypoints.push(home);
    speeds.push(500.0);
    RobotTrajectory { waypoints_rad: waypoints, segment_speeds_mm_s: speeds, dwells, start_delay_s: 1.0 }
}

/// Worker script: `(time, distance along +y, arm reach, phase from here on)`.
const VISIT: [(f64, f64, f64, Phase); 8] = [
    (0.0, 3400.0, 0.1, Phase::Coexistence),
    (2.0, 3400.0, 0.1, Phase::Collaboration),
    (3.0, 2350.0, 0.0, Phase::Collaboration),
    (3.5, 2350.0, 1.0, Phase::Collaboration),
    (11.0, 2350.0, 1.0, Phase::Cooperation),
    (11.8, 1500.0, 1.0, Phase::Cooperation),
    (13.0, 1500.0, 1.0, Phase::Coexistence),
    (14.5, 3400.0, 0.1, Phase::Coexistence),
];
const VISIT_PERIOD_S: f64 = 20.0;
const VISITS: usize = 10;

pub fn reference_human() -> HumanMotionScript {
    let mut keyframes = Vec::new();
    let mut phases: Vec<PhaseSpan> = Vec::new();
    let x = 450.0;
    let heading = -FRAC_PI_2;
    for v in 0..VISITS {
        let t0 = v as f64 * VISIT_PERIOD_S;
        for (i, &(t, y, reach, phase)) in VISIT.iter().enumerate() {
            keyframes.push(HumanKeyframe { t_s: t0 + t, parts_mm: standing_pose(x, y, heading, FLOOR_Z_MM, reach) });
            let end = VISIT.get(i + 1).map_or(VISIT_PERIOD_S, |n| n.0);
            match phases.last_mut() {
                Some(last) if last.phase == phase && last.end_s == t0 + t => last.end_s = t0 + end,
                _ => phases.push(PhaseSpan { start_s: t0 + t, end_s: t0 + end, phase }),
            }
        }
    }
    HumanMotionScript { keyframes, phases }
}

pub fn reference_camera() -> CameraModel {
    CameraModel {
        intrinsics: CameraIntrinsics { fx_px: 385.0, fy_px: 385.0, cx_px: 320.0, cy_px: 240.0, width_px: 640, height_px: 480 },
        extrinsics: CameraExtrinsics::look_at(Vec3::new(450.0, -600.0, 1200.0), Vec3::new(450.0, 2500.0, -100.0), Vec3::z())
            .expect("non-degenerate camera"),
    }
}

pub fn reference_scenario() -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: "reference screwing cell".into(),
        robot: RobotSection { dh: DhParameterTable::example_7dof(), hull_padding_mm: Vec3::new(150.0, 150.0, 150.0) },
        camera: reference_camera(),
        perception: PerceptionSection {
            mode: PerceptionMode::Rendered,
            noise_sigma_scale: 1.0 / 3.0,
            noise_clip_sigma: Some(3.0),
            failure_rate: 0.01,
            ..PerceptionSection::default()
        },
        method: RunMethod::BodyPartSegmentation,
        profiles: Vec::new(),
        safety: SafetyConstants::default(),
        human_speed: HumanSpeedPolicy::default(),
        velocity_limits: VelocityLimitTable::default(),
        regulator: RegulatorSettings { clear_frames_required: 3, ..RegulatorSettings::default() },
        human: reference_human(),
        trajectory: reference_trajectory(),
        latency: LatencySettings::default(),
        laser: LaserSettings::default(),
        sim: SimSettings { dt_ms: 1.0, max_time_s: 300.0, seed: 1, repeats: 10 },
    }
}
