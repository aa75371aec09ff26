//! Fixed-step replay of a collaborative work cell.

pub mod human;
pub mod latency;
pub mod render;
pub mod trace;
pub mod trajectory;

use std::collections::VecDeque;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::body::BodyPartLabel;
use crate::config::{PerceptionMode, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{forward_kinematics_angles, inflate_hull, point_hull_distance, ProtectiveHull, Vec3};
use crate::perception::{extract_body_points, BodyPointSet, DetectionStatus};
use crate::regulator::{evaluate, RegulatorState};
use crate::safety::{compute_budget, compute_c, compute_sh, MethodKind, MethodProfile, SeparationBudget};

use human::HumanPose;
use latency::TickSchedule;
use render::{perceive_direct, render_synthetic_observation, NoiseModel};
use trace::{measure_cycle_time, phase_shares, TraceRecord, TraceSummary};
use trajectory::{PathPlan, RobotMotion};

/// What guards the cell during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMethod {
    BodyRecognition,
    BodySegmentation,
    PoseEstimation,
    BodyPartSegmentation,
    LaserScanner,
    FixedLowestSpeed,
}

impl RunMethod {
    pub const ALL: [RunMethod; 6] = [
        RunMethod::BodyRecognition,
        RunMethod::BodySegmentation,
        RunMethod::PoseEstimation,
        RunMethod::BodyPartSegmentation,
        RunMethod::LaserScanner,
        RunMethod::FixedLowestSpeed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RunMethod::BodyRecognition => "body_recognition",
            RunMethod::BodySegmentation => "body_segmentation",
            RunMethod::PoseEstimation => "pose_estimation",
            RunMethod::BodyPartSegmentation => "body_part_segmentation",
            RunMethod::LaserScanner => "laser_scanner",
            RunMethod::FixedLowestSpeed => "fixed_lowest_speed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn perception(self) -> Option<MethodKind> {
        match self {
            RunMethod::BodyRecognition => Some(MethodKind::BodyRecognition),
            RunMethod::BodySegmentation => Some(MethodKind::BodySegmentation),
            RunMethod::PoseEstimation => Some(MethodKind::PoseEstimation),
            RunMethod::BodyPartSegmentation => Some(MethodKind::BodyPartSegmentation),
            RunMethod::LaserScanner | RunMethod::FixedLowestSpeed => None,
        }
    }
}

impl From<MethodKind> for RunMethod {
    fn from(kind: MethodKind) -> Self {
        match kind {
            MethodKind::BodyRecognition => RunMethod::BodyRecognition,
            MethodKind::BodySegmentation => RunMethod::BodySegmentation,
            MethodKind::PoseEstimation => RunMethod::PoseEstimation,
            MethodKind::BodyPartSegmentation => RunMethod::BodyPartSegmentation,
        }
    }
}

impl fmt::Display for RunMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Floor rectangle watched by the laser scanner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserField {
    pub min_xy_mm: [f64; 2],
    pub max_xy_mm: [f64; 2],
}

impl LaserField {
    /// Planar distance from `p` to the field; zero inside.
    pub fn distance(&self, p: &Vec3) -> f64 {
        let dx = (self.min_xy_mm[0] - p.x).max(0.0).max(p.x - self.max_xy_mm[0]);
        let dy = (self.min_xy_mm[1] - p.y).max(0.0).max(p.y - self.max_xy_mm[1]);
        dx.hypot(dy)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.distance(p) == 0.0
    }
}

/// Margin from the guarded cell to the field border: the slowest profile's
/// separation threshold plus the scanner's intrusion distance.
pub fn laser_field_margin(cfg: &ScenarioConfig) -> f64 {
    if let Some(m) = cfg.laser.field_margin_mm {
        return m;
    }
    let far = Some(cfg.human_speed.near_threshold_mm);
    let slowest = cfg
        .profiles_with_expectations()
        .iter()
        .map(|(p, _)| compute_sh(p.t_lat_max_ms, &cfg.human_speed, far))
        .fold(0.0, f64::max);
    slowest + cfg.safety.s_r_mm + compute_c(cfg.laser.detection_capacity_mm)
}

/// Robot footprint over the whole trajectory, or the configured cell.
fn laser_cell(cfg: &ScenarioConfig) -> Result<([f64; 2], [f64; 2])> {
    if let (Some(lo), Some(hi)) = (cfg.laser.cell_min_xy_mm, cfg.laser.cell_max_xy_mm) {
        return Ok((lo, hi));
    }
    let t = &cfg.trajectory;
    let mut hull: Option<ProtectiveHull> = None;
    for seg in t.waypoints_rad.windows(2) {
        for k in 0..=200 {
            let s = k as f64 / 200.0;
            let q: Vec<f64> = seg[0].iter().zip(&seg[1]).map(|(a, b)| a + (b - a) * s).collect();
            let h = crate::geometry::hull_for_configuration(&cfg.robot.dh, &q, cfg.robot.hull_padding_mm)?;
            hull = Some(hull.map_or(h, |acc| acc.union(&h)));
        }
    }
    let h = hull.expect("at least one segment");
    Ok(([h.x_min, h.y_min], [h.x_max, h.y_max]))
}

pub fn laser_field(cfg: &ScenarioConfig) -> Result<LaserField> {
    let (lo, hi) = laser_cell(cfg)?;
    let m = laser_field_margin(cfg);
    Ok(LaserField { min_xy_mm: [lo[0] - m, lo[1] - m], max_xy_mm: [hi[0] + m, hi[1] + m] })
}

struct InFlight {
    deliver_tick: u64,
    points: BodyPointSet,
    swept: ProtectiveHull,
}

struct Command {
    effective_tick: u64,
    velocity_mm_s: f64,
    separation_mm: Option<f64>,
    limiting_part: Option<BodyPartLabel>,
}

#[allow(clippy::large_enum_variant)]
enum Controller {
    Perception {
        profile: MethodProfile,
        schedule: TickSchedule,
        noise: NoiseModel,
        regulator: RegulatorState,
        next_sample: u64,
        in_flight: VecDeque<InFlight>,
    },
    Laser {
        field: LaserField,
        scan_ticks: u64,
        delay_ticks: u64,
    },
    Fixed,
}

fn ms_to_ticks(ms: f64, dt_ms: f64) -> u64 {
    (ms / dt_ms - 1e-9).ceil().max(0.0) as u64
}

/// One run of a scenario under a given method and seed.
pub struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    method: RunMethod,
    plan: PathPlan,
    motion: RobotMotion,
    controller: Controller,
    rng: ChaCha8Rng,
    dt_s: f64,
    tick: u64,
    max_ticks: u64,
    commanded_mm_s: f64,
    separation_mm: Option<f64>,
    limiting_part: Option<BodyPartLabel>,
    pending: VecDeque<Command>,
    records: Vec<TraceRecord>,
    finished: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(cfg: &'a ScenarioConfig, method: RunMethod, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let plan = PathPlan::new(&cfg.robot.dh, &cfg.trajectory)?;
        let dt_ms = cfg.sim.dt_ms;
        let controller = match method.perception() {
            Some(kind) => {
                let profile = cfg.profile(kind);
                let schedule = cfg.latency_model(&profile).schedule(dt_ms);
                let p = &cfg.perception;
                Controller::Perception {
                    noise: NoiseModel {
                        sigma_mm: profile.z_d_mm * p.noise_sigma_scale,
                        clip_sigma: p.noise_clip_sigma,
                        failure_rate: p.failure_rate,
                    },
                    profile,
                    next_sample: schedule.first_sample,
                    schedule,
                    regulator: RegulatorState::new(
                        cfg.regulator.hysteresis_margin_mm,
                        cfg.regulator.clear_frames_required,
                        cfg.regulator.failures_before_fallback,
                    ),
                    in_flight: VecDeque::new(),
                }
            }
            None if method == RunMethod::LaserScanner => {
                let l = &cfg.laser;
                Controller::Laser {
                    field: laser_field(cfg)?,
                    scan_ticks: ms_to_ticks(l.scan_period_ms, dt_ms).max(1),
                    delay_ticks: ms_to_ticks(l.response_ms + l.relay_ms + l.t_adj_ms, dt_ms),
                }
            }
            None => Controller::Fixed,
        };
        let commanded_mm_s = match controller {
            Controller::Fixed => cfg.velocity_limits.global_minimum(),
            _ => cfg.velocity_limits.full_speed_mm_s,
        };
        Ok(Self {
            cfg,
            method,
            motion: RobotMotion::new(&plan),
            plan,
            controller,
            rng: ChaCha8Rng::seed_from_u64(seed),
            dt_s: dt_ms / 1000.0,
            tick: 0,
            max_ticks: (cfg.sim.max_time_s * 1000.0 / dt_ms).ceil() as u64,
            commanded_mm_s,
            separation_mm: None,
            limiting_part: None,
            pending: VecDeque::new(),
            records: Vec::new(),
            finished: false,
        })
    }

    pub fn time_s(&self) -> f64 {
        self.tick as f64 * self.dt_s
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn hull_of(&self, q: &[f64]) -> ProtectiveHull {
        crate::geometry::hull_for_configuration(&self.cfg.robot.dh, q, self.cfg.robot.hull_padding_mm)
            .expect("validated dimensions")
    }

    fn tcp_of(&self, q: &[f64]) -> Vec3 {
        forward_kinematics_angles(&self.cfg.robot.dh, q).expect("validated dimensions").tcp()
    }

    fn perceive(&mut self, pose: Option<&HumanPose>, hull_now: &ProtectiveHull, t: f64) -> BodyPointSet {
        let Controller::Perception { profile, noise, .. } = &self.controller else {
            unreachable!("only perception controllers sample");
        };
        let cfg = self.cfg;
        let kind = profile.name;
        match cfg.perception.mode {
            PerceptionMode::Direct => {
                let budget = budget_for(cfg, profile, None);
                let (zd, zr) = budget.hull_inflation();
                let reference = inflate_hull(hull_now, zd, zr).expect("validated inflation");
                perceive_direct(pose, &cfg.camera, profile.class, noise, &mut self.rng, &reference, t)
            }
            PerceptionMode::Rendered => {
                let (frame, obs) = render_synthetic_observation(
                    pose,
                    &cfg.camera,
                    &cfg.perception.body_model,
                    kind,
                    noise,
                    &mut self.rng,
                    t,
                    cfg.perception.background_depth_mm,
                );
                let settings = cfg.perception.extraction_settings();
                extract_body_points(&frame, &obs, &cfg.camera.intrinsics, &cfg.camera.extrinsics, &settings)
                    .unwrap_or_else(|_| BodyPointSet::empty(t, profile.class, DetectionStatus::Failed))
            }
        }
    }

    /// Advances the cell by one tick and appends its trace record.
    pub fn step(&mut self) -> Result<()> {
        if self.finished {
            return Ok(());
        }
        if self.tick > self.max_ticks {
            return Err(Error::Timeout(self.cfg.sim.max_time_s));
        }
        let cfg = self.cfg;
        let k = self.tick;
        let t = self.time_s();
        let q = self.motion.q().to_vec();
        let hull_now = self.hull_of(&q);
        let pose = cfg.human.pose_at(t);

        let sample_due = matches!(&self.controller, Controller::Perception { next_sample, .. } if *next_sample == k);
        let fresh = if sample_due { Some(self.perceive(pose.as_ref(), &hull_now, t)) } else { None };

        match &mut self.controller {
            Controller::Perception { profile, schedule, regulator, next_sample, in_flight, .. } => {
                for f in in_flight.iter_mut() {
                    f.swept = f.swept.union(&hull_now);
                }
                if let Some(points) = fresh {
                    in_flight.push_back(InFlight { deliver_tick: k + schedule.processing, points, swept: hull_now });
                    *next_sample += schedule.period;
                }
                while in_flight.front().is_some_and(|f| f.deliver_tick <= k) {
                    let f = in_flight.pop_front().expect("checked");
                    let base = if cfg.regulator.swept_hull { f.swept } else { hull_now };
                    let inflation = budget_for(cfg, profile, None).hull_inflation();
                    let hull = inflate_hull(&base, inflation.0, inflation.1).expect("validated inflation");
                    let nearest = f.points.valid_points().map(|e| point_hull_distance(&e.world_mm, &hull)).reduce(f64::min);
                    let budget = budget_for(cfg, profile, nearest);
                    let (decision, next) = evaluate(&f.points, &hull, &budget, &cfg.velocity_limits, regulator);
                    *regulator = next;
                    self.pending.push_back(Command {
                        effective_tick: k + schedule.actuation,
                        velocity_mm_s: decision.commanded_velocity_mm_s,
                        separation_mm: decision.nearest_distance_mm,
                        limiting_part: decision.limiting_part,
                    });
                }
            }
            Controller::Laser { field, scan_ticks, delay_ticks } => {
                if k.is_multiple_of(*scan_ticks) {
                    let separation =
                        pose.as_ref().map(|p| p.parts.iter().map(|x| field.distance(x)).fold(f64::INFINITY, f64::min));
                    let occupied = separation.is_some_and(|d| d == 0.0);
                    let limits = &cfg.velocity_limits;
                    self.pending.push_back(Command {
                        effective_tick: k + *delay_ticks,
                        velocity_mm_s: if occupied { limits.global_minimum() } else { limits.full_speed_mm_s },
                        separation_mm: separation,
                        limiting_part: None,
                    });
                }
            }
            Controller::Fixed => {}
        }

        while self.pending.front().is_some_and(|c| c.effective_tick <= k) {
            let c = self.pending.pop_front().expect("checked");
            self.commanded_mm_s = c.velocity_mm_s;
            self.separation_mm = c.separation_mm;
            self.limiting_part = c.limiting_part;
        }

        let was_done = self.motion.is_done();
        let tcp_before = self.tcp_of(&q);
        self.motion.advance(&self.plan, self.commanded_mm_s, self.dt_s);
        let tcp_after = self.tcp_of(self.motion.q());
        self.records.push(TraceRecord {
            t_s: t,
            q_rad: q,
            tcp_mm: tcp_before,
            commanded_mm_s: self.commanded_mm_s,
            actual_mm_s: (tcp_after - tcp_before).norm() / self.dt_s,
            separation_mm: self.separation_mm,
            limiting_part: self.limiting_part,
            phase: cfg.human.phase_at(t),
        });
        self.tick += 1;
        self.finished = was_done;
        Ok(())
    }

    pub fn run(mut self) -> Result<Vec<TraceRecord>> {
        while !self.finished {
            self.step()?;
        }
        Ok(self.records)
    }

    pub fn summarize(&self, seed: u64) -> Result<TraceSummary> {
        summarize(self.method, seed, &self.plan, &self.records)
    }
}

fn budget_for(cfg: &ScenarioConfig, profile: &MethodProfile, nearest_mm: Option<f64>) -> SeparationBudget {
    compute_budget(profile, &cfg.safety, &cfg.human_speed, nearest_mm, cfg.regulator.uncertainty_mode)
}

fn summarize(method: RunMethod, seed: u64, plan: &PathPlan, records: &[TraceRecord]) -> Result<TraceSummary> {
    Ok(TraceSummary {
        method: method.to_string(),
        seed,
        t_cycle_s: measure_cycle_time(records)?,
        no_interference_time_s: plan.no_interference_time_s(),
        phase_shares: phase_shares(records),
        min_commanded_mm_s: records.iter().map(|r| r.commanded_mm_s).fold(f64::INFINITY, f64::min),
        min_separation_mm: records.iter().filter_map(|r| r.separation_mm).reduce(f64::min),
        steps: records.len(),
    })
}

/// Runs `method` with `seed` to trajectory completion.
pub fn run_method(cfg: &ScenarioConfig, method: RunMethod, seed: u64) -> Result<(Vec<TraceRecord>, TraceSummary)> {
    let sim = Simulation::new(cfg, method, seed)?;
    let plan = sim.plan.clone();
    let records = sim.run()?;
    let summary = summarize(method, seed, &plan, &records)?;
    Ok((records, summary))
}

/// Runs the configured method with the configured seed.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Vec<TraceRecord>, TraceSummary)> {
    run_method(cfg, cfg.method, cfg.sim.seed)
}

pub fn laser_scanner_baseline(cfg: &ScenarioConfig) -> Result<TraceSummary> {
    run_method(cfg, RunMethod::LaserScanner, cfg.sim.seed).map(|(_, s)| s)
}

pub fn fixed_speed_baseline(cfg: &ScenarioConfig) -> Result<TraceSummary> {
    run_method(cfg, RunMethod::FixedLowestSpeed, cfg.sim.seed).map(|(_, s)| s)
}
