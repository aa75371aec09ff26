//! Independent reference computations shared by the integration suites.
#![allow(dead_code)]

use hrsf_core::config::{PerceptionMode, ScenarioConfig};
use hrsf_core::geometry::{DhParameterTable, Vec3};
use hrsf_core::reference::{reference_scenario, FLOOR_Z_MM};
use hrsf_core::safety::{MethodProfile, UncertaintyMode};
use hrsf_core::sim::human::{standing_pose, HumanKeyframe, HumanMotionScript, HumanPose, Phase, PhaseSpan};
use hrsf_core::sim::trace::TraceRecord;
use hrsf_core::sim::trajectory::RobotTrajectory;
use hrsf_core::sim::RunMethod;
use hrsf_core::BodyPartLabel;
use rand::Rng;

pub type Mat4 = [[f64; 4]; 4];

fn identity() -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

fn rot_z(t: f64) -> Mat4 {
    let mut m = identity();
    m[0][0] = t.cos();
    m[0][1] = -t.sin();
    m[1][0] = t.sin();
    m[1][1] = t.cos();
    m
}

fn rot_x(t: f64) -> Mat4 {
    let mut m = identity();
    m[1][1] = t.cos();
    m[1][2] = -t.sin();
    m[2][1] = t.sin();
    m[2][2] = t.cos();
    m
}

fn trans(x: f64, y: f64, z: f64) -> Mat4 {
    let mut m = identity();
    m[0][3] = x;
    m[1][3] = y;
    m[2][3] = z;
    m
}

/// Base origin, every joint frame origin and the tool point, by composing
/// elementary rotations and translations one at a time.
pub fn naive_fk(dh: &DhParameterTable, q: &[f64]) -> Vec<[f64; 3]> {
    let mut t = identity();
    let mut out = vec![[0.0; 3]];
    for (j, &angle) in dh.joints.iter().zip(q) {
        t = mul(&t, &rot_z(angle + j.theta0_rad));
        t = mul(&t, &trans(0.0, 0.0, j.d_mm));
        t = mul(&t, &trans(j.a_mm, 0.0, 0.0));
        t = mul(&t, &rot_x(j.alpha_rad));
        out.push([t[0][3], t[1][3], t[2][3]]);
    }
    let o = dh.tool_offset_mm;
    if o != Vec3::zeros() {
        let tool = mul(&t, &trans(o.x, o.y, o.z));
        out.push([tool[0][3], tool[1][3], tool[2][3]]);
    }
    out
}

/// Axis-aligned box as `(min, max)`.
pub type Aabb = ([f64; 3], [f64; 3]);

pub fn naive_hull(dh: &DhParameterTable, q: &[f64], padding: [f64; 3]) -> Aabb {
    let pts = naive_fk(dh, q);
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &pts {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a] - padding[a]);
            hi[a] = hi[a].max(p[a] + padding[a]);
        }
    }
    (lo, hi)
}

pub fn grow(b: &Aabb, by: [f64; 3]) -> Aabb {
    let mut out = *b;
    for (a, d) in by.iter().enumerate() {
        out.0[a] -= d;
        out.1[a] += d;
    }
    out
}

/// Euclidean distance from a point to a solid box, zero inside.
pub fn box_distance(p: [f64; 3], b: &Aabb) -> f64 {
    (0..3).map(|a| (b.0[a] - p[a]).max(0.0).max(p[a] - b.1[a]).powi(2)).sum::<f64>().sqrt()
}

/// Smallest distance from `p` to `n` points drawn uniformly over the box surface.
pub fn monte_carlo_surface_distance<R: Rng>(p: [f64; 3], b: &Aabb, n: usize, rng: &mut R) -> f64 {
    let ext = [b.1[0] - b.0[0], b.1[1] - b.0[1], b.1[2] - b.0[2]];
    let areas = [ext[1] * ext[2], ext[0] * ext[2], ext[0] * ext[1]];
    let total = 2.0 * areas.iter().sum::<f64>();
    let mut best = f64::INFINITY;
    for _ in 0..n {
        let mut pick = rng.random::<f64>() * total;
        let mut axis = 0;
        while axis < 2 && pick >= 2.0 * areas[axis] {
            pick -= 2.0 * areas[axis];
            axis += 1;
        }
        let mut s = [0.0; 3];
        for a in 0..3 {
            s[a] = b.0[a] + rng.random::<f64>() * ext[a];
        }
        s[axis] = if pick < areas[axis] { b.0[axis] } else { b.1[axis] };
        let d = ((s[0] - p[0]).powi(2) + (s[1] - p[1]).powi(2) + (s[2] - p[2]).powi(2)).sqrt();
        best = best.min(d);
    }
    best
}

/// Ground-truth separation check for one profile, rebuilt from first principles.
#[derive(Debug, Clone)]
pub struct TruthModel {
    pub dh: DhParameterTable,
    pub padding: [f64; 3],
    pub inflation: [f64; 3],
    pub v_far: f64,
    pub v_near: f64,
    pub near_below_mm: f64,
    pub t_lat_max_ms: f64,
    /// Everything in the threshold besides the human-motion term.
    pub fixed_mm: f64,
    pub whole_body: bool,
    pub limits: Vec<(BodyPartLabel, f64)>,
    pub floor_mm_s: f64,
}

#[derive(Debug, Clone)]
pub struct Assessment {
    pub distances: [f64; 10],
    pub threshold: f64,
    pub violating: [bool; 10],
}

impl Assessment {
    pub fn nearest(&self) -> f64 {
        self.distances.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn any(&self) -> bool {
        self.nearest() < self.threshold
    }
}

impl TruthModel {
    /// `extra_inflation` is the per-axis slack of the perception model,
    /// normally the full Z_d; pass zeros to audit against the robot-side
    /// uncertainty only.
    pub fn new(cfg: &ScenarioConfig, profile: &MethodProfile, extra_inflation: [f64; 3]) -> Self {
        let zr = cfg.safety.z_r_mm;
        let (inflation, fixed_mm) = match cfg.regulator.uncertainty_mode {
            UncertaintyMode::PerAxis => (
                [extra_inflation[0] + zr.x, extra_inflation[1] + zr.y, extra_inflation[2] + zr.z],
                cfg.safety.s_r_mm + cfg.safety.intrusion_c_mm,
            ),
            UncertaintyMode::Scalar => {
                let zd = Vec3::from(extra_inflation);
                ([0.0; 3], cfg.safety.s_r_mm + cfg.safety.intrusion_c_mm + zd.norm() + zr.norm())
            }
        };
        let limits = BodyPartLabel::ALL.iter().map(|&l| (l, cfg.velocity_limits.limits_mm_s[&l])).collect();
        Self {
            dh: cfg.robot.dh.clone(),
            padding: cfg.robot.hull_padding_mm.into(),
            inflation,
            v_far: cfg.human_speed.v_far_mm_s,
            v_near: cfg.human_speed.v_near_mm_s,
            near_below_mm: cfg.human_speed.near_threshold_mm,
            t_lat_max_ms: profile.t_lat_max_ms,
            fixed_mm,
            whole_body: profile.class == hrsf_core::safety::ExtractionClass::A,
            limits,
            floor_mm_s: cfg.velocity_limits.global_minimum(),
        }
    }

    pub fn limit(&self, label: BodyPartLabel) -> f64 {
        self.limits.iter().find(|(l, _)| *l == label).map(|(_, v)| *v).expect("all labels")
    }

    pub fn assess(&self, q: &[f64], pose: &HumanPose) -> Assessment {
        let hull = grow(&naive_hull(&self.dh, q, self.padding), self.inflation);
        let mut distances = [0.0; 10];
        for (i, (_, p)) in pose.iter().enumerate() {
            distances[i] = box_distance([p.x, p.y, p.z], &hull);
        }
        let nearest = distances.iter().copied().fold(f64::INFINITY, f64::min);
        let v = if nearest < self.near_below_mm { self.v_near } else { self.v_far };
        let threshold = v * self.t_lat_max_ms / 1000.0 + self.fixed_mm;
        let violating = distances.map(|d| d < threshold);
        Assessment { distances, threshold, violating }
    }

    /// Limit that applies to whatever has been violating continuously for
    /// the whole `since` window; `None` when nothing has.
    fn applicable(&self, since: &[Option<f64>; 11], t: f64, window_s: f64) -> Option<(f64, Option<BodyPartLabel>)> {
        let held = |s: Option<f64>| s.is_some_and(|s0| t - s0 >= window_s - 1e-9);
        if self.whole_body {
            return held(since[10]).then_some((self.floor_mm_s, None));
        }
        BodyPartLabel::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| held(since[*i]))
            .map(|(_, &l)| (self.limit(l), Some(l)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub steps: usize,
    pub constrained_steps: usize,
    /// `(time, actual speed, applicable limit)` for every breach.
    pub breaches: Vec<(f64, f64, f64)>,
}

/// Replays a trace against the truth model and collects every step where the
/// robot moved faster than the limit owed after a full reaction window.
pub fn audit_trace(model: &TruthModel, script: &HumanMotionScript, records: &[TraceRecord], dt_s: f64) -> AuditReport {
    let window = model.t_lat_max_ms / 1000.0 + dt_s;
    let mut since: [Option<f64>; 11] = [None; 11];
    let mut report = AuditReport::default();
    for r in records {
        report.steps += 1;
        let Some(pose) = script.pose_at(r.t_s) else {
            since = [None; 11];
            continue;
        };
        let a = model.assess(&r.q_rad, &pose);
        for (s, &hit) in since.iter_mut().zip(&a.violating) {
            *s = if hit { s.or(Some(r.t_s)) } else { None };
        }
        since[10] = if a.any() { since[10].or(Some(r.t_s)) } else { None };
        if let Some((limit, _)) = model.applicable(&since, r.t_s, window) {
            report.constrained_steps += 1;
            if r.actual_mm_s > limit + 0.1 {
                report.breaches.push((r.t_s, r.actual_mm_s, limit));
            }
        }
    }
    report
}

/// A ground-truth threshold crossing and the command reaction to it.
#[derive(Debug, Clone)]
pub struct ReactionEvent {
    pub part: Option<BodyPartLabel>,
    pub crossing_s: f64,
    pub limit_mm_s: f64,
    /// `None` if the command never came down while the crossing persisted.
    pub reaction_s: Option<f64>,
}

impl ReactionEvent {
    pub fn delay_s(&self) -> Option<f64> {
        self.reaction_s.map(|r| r - self.crossing_s)
    }
}

/// Finds every crossing into violation that then persists for at least
/// `hold_s`, and the first step at or after it whose command honours the limit.
pub fn reaction_events(
    model: &TruthModel,
    script: &HumanMotionScript,
    records: &[TraceRecord],
    hold_s: f64,
) -> Vec<ReactionEvent> {
    let states: Vec<Option<[bool; 11]>> = records
        .iter()
        .map(|r| {
            script.pose_at(r.t_s).map(|pose| {
                let a = model.assess(&r.q_rad, &pose);
                let mut s = [false; 11];
                s[..10].copy_from_slice(&a.violating);
                s[10] = a.any();
                s
            })
        })
        .collect();
    let keys: Vec<(usize, Option<BodyPartLabel>, f64)> = if model.whole_body {
        vec![(10, None, model.floor_mm_s)]
    } else {
        BodyPartLabel::ALL.iter().enumerate().map(|(i, &l)| (i, Some(l), model.limit(l))).collect()
    };
    let mut events = Vec::new();
    for (key, part, limit) in keys {
        let on = |i: usize| states[i].is_some_and(|s| s[key]);
        for i in 1..records.len() {
            if !on(i) || on(i - 1) {
                continue;
            }
            let t0 = records[i].t_s;
            let mut j = i;
            while j < records.len() && on(j) && records[j].t_s - t0 < hold_s - 1e-9 {
                j += 1;
            }
            if j >= records.len() || !on(j) {
                continue;
            }
            let reaction =
                (i..records.len()).take_while(|&k| on(k)).find(|&k| records[k].commanded_mm_s <= limit).map(|k| records[k].t_s);
            events.push(ReactionEvent { part, crossing_s: t0, limit_mm_s: limit, reaction_s: reaction });
        }
    }
    events
}

/// Reference cell switched to ideal direct perception.
pub fn direct_reference() -> ScenarioConfig {
    let mut cfg = reference_scenario();
    cfg.perception.mode = PerceptionMode::Direct;
    cfg.perception.noise_sigma_scale = 0.0;
    cfg.perception.failure_rate = 0.0;
    cfg.regulator.clear_frames_required = 1;
    cfg
}

pub fn script_from(frames: Vec<(f64, f64, f64, f64, f64)>) -> HumanMotionScript {
    let end = frames.last().map_or(0.0, |f| f.0);
    let keyframes = frames
        .into_iter()
        .map(|(t, x, y, heading, reach)| HumanKeyframe { t_s: t, parts_mm: standing_pose(x, y, heading, FLOOR_Z_MM, reach) })
        .collect();
    HumanMotionScript { keyframes, phases: vec![PhaseSpan { start_s: 0.0, end_s: end.max(1.0), phase: Phase::Collaboration }] }
}

/// A worker who walks up to the robot, lingers at random spots, and leaves.
pub fn random_visit<R: Rng>(rng: &mut R, duration_s: f64) -> HumanMotionScript {
    let facing = -std::f64::consts::FRAC_PI_2;
    let mut frames = vec![(0.0, rng.random_range(-500.0..1200.0), rng.random_range(2500.0..3500.0), facing, 0.1)];
    let mut t = rng.random_range(0.0..1.5);
    while t < duration_s {
        t += rng.random_range(0.4..2.5);
        let x = rng.random_range(-600.0..1300.0);
        let y = rng.random_range(700.0..3000.0);
        let heading = facing + rng.random_range(-0.6..0.6);
        frames.push((t, x, y, heading, rng.random_range(0.0..1.0)));
    }
    frames.push((t + 2.0, 450.0, 3600.0, facing, 0.1));
    script_from(frames)
}

/// A short pick between random configurations near the reference poses.
pub fn random_trajectory<R: Rng>(rng: &mut R) -> RobotTrajectory {
    let home = vec![0.0, 0.2, 0.0, -1.8, 0.0, 0.9, 0.0];
    let mut waypoints = vec![home.clone()];
    let stops = rng.random_range(1..=2);
    for _ in 0..stops {
        let q = vec![
            rng.random_range(-0.2..1.4),
            rng.random_range(0.3..1.0),
            rng.random_range(-0.3..0.3),
            rng.random_range(-1.6..-1.0),
            rng.random_range(-0.3..0.3),
            rng.random_range(0.8..1.4),
            0.0,
        ];
        waypoints.push(q);
    }
    waypoints.push(home);
    let speeds = (0..waypoints.len() - 1).map(|_| rng.random_range(150.0..900.0)).collect();
    RobotTrajectory { waypoints_rad: waypoints, segment_speeds_mm_s: speeds, dwells: Vec::new(), start_delay_s: 0.2 }
}

pub const PERCEPTION_METHODS: [RunMethod; 4] =
    [RunMethod::BodyRecognition, RunMethod::BodySegmentation, RunMethod::PoseEstimation, RunMethod::BodyPartSegmentation];
