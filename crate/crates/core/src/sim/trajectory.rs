use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{forward_kinematics_angles, DhParameterTable, Vec3};

/// Stationary task executed on arrival at a waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dwell {
    pub at_waypoint: usize,
    pub duration_s: f64,
    #[serde(default)]
    pub label: String,
}

/// Joint-space waypoints joined by straight segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotTrajectory {
    pub waypoints_rad: Vec<Vec<f64>>,
    /// Nominal TCP speed for each segment; one entry per consecutive pair.
    pub segment_speeds_mm_s: Vec<f64>,
    #[serde(default)]
    pub dwells: Vec<Dwell>,
    #[serde(default)]
    pub start_delay_s: f64,
}

impl RobotTrajectory {
    pub fn validate(&self, dof: usize, full_speed_mm_s: f64) -> Result<()> {
        let n = self.waypoints_rad.len();
        if n < 2 {
            return Err(Error::Config(format!("trajectory needs at least 2 waypoints, got {n}")));
        }
        for (i, w) in self.waypoints_rad.iter().enumerate() {
            if w.len() != dof {
                return Err(Error::Config(format!("trajectory.waypoints_rad[{i}] has {} joints, robot has {dof}", w.len())));
            }
            if w.iter().any(|q| !q.is_finite()) {
                return Err(Error::Config(format!("trajectory.waypoints_rad[{i}] is not finite")));
            }
        }
        if self.segment_speeds_mm_s.len() != n - 1 {
            return Err(Error::Config(format!(
                "trajectory.segment_speeds_mm_s needs {} entries, got {}",
                n - 1,
                self.segment_speeds_mm_s.len()
            )));
        }
        for (i, v) in self.segment_speeds_mm_s.iter().enumerate() {
            if !(*v > 0.0 && *v <= full_speed_mm_s) {
                return Err(Error::Config(format!(
                    "trajectory.segment_speeds_mm_s[{i}] must lie in (0, {full_speed_mm_s}], got {v}"
                )));
            }
        }
        for (i, d) in self.dwells.iter().enumerate() {
            if d.at_waypoint == 0 || d.at_waypoint + 1 >= n {
                return Err(Error::Config(format!(
                    "trajectory.dwells[{i}].at_waypoint must be an intermediate waypoint (1..{}), got {}",
                    n - 1,
                    d.at_waypoint
                )));
            }
            if !(d.duration_s.is_finite() && d.duration_s >= 0.0) {
                return Err(Error::Config(format!("trajectory.dwells[{i}].duration_s must be >= 0")));
            }
        }
        if !(self.start_delay_s.is_finite() && self.start_delay_s >= 0.0) {
            return Err(Error::Config("trajectory.start_delay_s must be >= 0".into()));
        }
        Ok(())
    }

    fn dwell_at(&self, waypoint: usize) -> f64 {
        self.dwells.iter().filter(|d| d.at_waypoint == waypoint).map(|d| d.duration_s).sum()
    }
}

const ARC_SAMPLES: usize = 2000;

/// Precomputed TCP arc-length tables for each segment.
#[derive(Debug, Clone)]
pub struct PathPlan {
    dh: DhParameterTable,
    trajectory: RobotTrajectory,
    arcs: Vec<Vec<f64>>,
}

impl PathPlan {
    pub fn new(dh: &DhParameterTable, trajectory: &RobotTrajectory) -> Result<Self> {
        let mut arcs = Vec::with_capacity(trajectory.waypoints_rad.len() - 1);
        for seg in 0..trajectory.waypoints_rad.len() - 1 {
            let mut table = Vec::with_capacity(ARC_SAMPLES + 1);
            let mut prev = tcp(dh, &lerp(&trajectory.waypoints_rad[seg], &trajectory.waypoints_rad[seg + 1], 0.0))?;
            let mut acc = 0.0;
            table.push(0.0);
            for k in 1..=ARC_SAMPLES {
                let s = k as f64 / ARC_SAMPLES as f64;
                let p = tcp(dh, &lerp(&trajectory.waypoints_rad[seg], &trajectory.waypoints_rad[seg + 1], s))?;
                acc += (p - prev).norm();
                prev = p;
                table.push(acc);
            }
            if acc < 1e-6 {
                return Err(Error::Config(format!("trajectory segment {seg} does not move the TCP")));
            }
            arcs.push(table);
        }
        Ok(Self { dh: dh.clone(), trajectory: trajectory.clone(), arcs })
    }

    pub fn trajectory(&self) -> &RobotTrajectory {
        &self.trajectory
    }

    pub fn segment_length_mm(&self, seg: usize) -> f64 {
        *self.arcs[seg].last().expect("non-empty table")
    }

    pub fn path_length_mm(&self) -> f64 {
        (0..self.arcs.len()).map(|s| self.segment_length_mm(s)).sum()
    }

    /// Time from departure to return with nobody around.
    pub fn no_interference_time_s(&self) -> f64 {
        let travel: f64 = (0..self.arcs.len()).map(|s| self.segment_length_mm(s) / self.trajectory.segment_speeds_mm_s[s]).sum();
        let dwell: f64 = self.trajectory.dwells.iter().map(|d| d.duration_s).sum();
        travel + dwell
    }

    /// Time for the same cycle at one constant speed.
    pub fn constant_speed_time_s(&self, speed_mm_s: f64) -> f64 {
        let dwell: f64 = self.trajectory.dwells.iter().map(|d| d.duration_s).sum();
        self.path_length_mm() / speed_mm_s + dwell
    }

    fn arc_at(&self, seg: usize, s: f64) -> f64 {
        let table = &self.arcs[seg];
        let x = s.clamp(0.0, 1.0) * ARC_SAMPLES as f64;
        let i = (x.floor() as usize).min(ARC_SAMPLES - 1);
        let w = x - i as f64;
        table[i] + (table[i + 1] - table[i]) * w
    }

    fn s_at(&self, seg: usize, arc: f64) -> f64 {
        let table = &self.arcs[seg];
        if arc >= *table.last().unwrap() {
            return 1.0;
        }
        let i = table.partition_point(|a| *a <= arc).clamp(1, ARC_SAMPLES) - 1;
        let span = table[i + 1] - table[i];
        let w = if span > 0.0 { (arc - table[i]) / span } else { 0.0 };
        (i as f64 + w) / ARC_SAMPLES as f64
    }

    fn q_at(&self, seg: usize, s: f64) -> Vec<f64> {
        lerp(&self.trajectory.waypoints_rad[seg], &self.trajectory.waypoints_rad[seg + 1], s)
    }

    fn tcp_at(&self, seg: usize, s: f64) -> Vec3 {
        tcp(&self.dh, &self.q_at(seg, s)).expect("dimensions validated at construction")
    }

    /// Largest step along `seg` from `s0` whose TCP chord stays within
    /// `target_mm`. Returns the new parameter and the chord length.
    fn chord_step(&self, seg: usize, s0: f64, target_mm: f64) -> (f64, f64) {
        let p0 = self.tcp_at(seg, s0);
        let end = (self.tcp_at(seg, 1.0) - p0).norm();
        if end <= target_mm {
            return (1.0, end);
        }
        let chord = |s: f64| (self.tcp_at(seg, s) - p0).norm();
        let mut s1 = self.s_at(seg, self.arc_at(seg, s0) + target_mm).clamp(s0, 1.0);
        for _ in 0..4 {
            let c = chord(s1);
            if c <= 0.0 {
                break;
            }
            let next = (s0 + (s1 - s0) * target_mm / c).min(1.0);
            if (next - s1).abs() <= 1e-15 {
                break;
            }
            s1 = next;
        }
        let mut c = chord(s1);
        while c > target_mm {
            s1 = s0 + (s1 - s0) * (target_mm / c) * (1.0 - 1e-9);
            c = chord(s1);
        }
        (s1, c)
    }
}

fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + (y - x) * s).collect()
}

fn tcp(dh: &DhParameterTable, q: &[f64]) -> Result<Vec3> {
    Ok(forward_kinematics_angles(dh, q)?.tcp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MotionStage {
    StartDelay { remaining_s: f64 },
    Moving { segment: usize, s: f64 },
    Dwelling { next_segment: usize, remaining_s: f64 },
    Done,
}

/// Kinematic path follower: the TCP moves along the plan at
/// `min(nominal, allowed)` with no acceleration limits.
#[derive(Debug, Clone)]
pub struct RobotMotion {
    stage: MotionStage,
    q: Vec<f64>,
}

impl RobotMotion {
    pub fn new(plan: &PathPlan) -> Self {
        let t = &plan.trajectory;
        let stage = if t.start_delay_s > 0.0 {
            MotionStage::StartDelay { remaining_s: t.start_delay_s }
        } else {
            MotionStage::Moving { segment: 0, s: 0.0 }
        };
        Self { stage, q: t.waypoints_rad[0].clone() }
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn stage(&self) -> MotionStage {
        self.stage
    }

    pub fn is_done(&self) -> bool {
        self.stage == MotionStage::Done
    }

    /// Advances by `dt_s` under the velocity limit `allowed_mm_s`.
    pub fn advance(&mut self, plan: &PathPlan, allowed_mm_s: f64, dt_s: f64) {
        let traj = &plan.trajectory;
        let last_segment = traj.waypoints_rad.len() - 2;
        let mut budget = dt_s;
        while budget > 1e-12 {
            match self.stage {
                MotionStage::Done => break,
                MotionStage::StartDelay { remaining_s } | MotionStage::Dwelling { remaining_s, .. } if remaining_s > budget => {
                    self.stage = match self.stage {
                        MotionStage::StartDelay { .. } => MotionStage::StartDelay { remaining_s: remaining_s - budget },
                        MotionStage::Dwelling { next_segment, .. } => {
                            MotionStage::Dwelling { next_segment, remaining_s: remaining_s - budget }
                        }
                        other => other,
                    };
                    budget = 0.0;
                }
                MotionStage::StartDelay { remaining_s } => {
                    budget -= remaining_s;
                    self.stage = MotionStage::Moving { segment: 0, s: 0.0 };
                }
                MotionStage::Dwelling { next_segment, remaining_s } => {
                    budget -= remaining_s;
                    self.stage = MotionStage::Moving { segment: next_segment, s: 0.0 };
                }
                MotionStage::Moving { segment, s } => {
                    let speed = traj.segment_speeds_mm_s[segment].min(allowed_mm_s);
                    if speed <= 0.0 {
                        break;
                    }
                    let (s1, chord) = plan.chord_step(segment, s, speed * budget);
                    if s1 >= 1.0 {
                        budget -= chord / speed;
                        self.q = traj.waypoints_rad[segment + 1].clone();
                        let waypoint = segment + 1;
                        self.stage = if segment == last_segment {
                            MotionStage::Done
                        } else {
                            let dwell = traj.dwell_at(waypoint);
                            if dwell > 0.0 {
                                MotionStage::Dwelling { next_segment: segment + 1, remaining_s: dwell }
                            } else {
                                MotionStage::Moving { segment: segment + 1, s: 0.0 }
                            }
                        };
                    } else {
                        self.q = plan.q_at(segment, s1);
                        self.stage = MotionStage::Moving { segment, s: s1 };
                        budget = 0.0;
                    }
                }
            }
        }
    }
}
