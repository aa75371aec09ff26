//! Velocity regulation combining separation monitoring with body-part
//! specific speed limits.
//!
//! Every body point closer to the protective hull than the separation
//! threshold is a violation. Part-level detections reduce the robot to the
//! lowest limit among the violating parts; whole-body detections and failed
//! detections fall back to the lowest limit in the table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::body::BodyPartLabel;
use crate::error::{Error, Result};
use crate::geometry::{point_hull_distance, ProtectiveHull};
use crate::perception::{BodyPointSet, DetectionStatus};
use crate::safety::{ExtractionClass, SeparationBudget};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityLimitTable {
    pub full_speed_mm_s: f64,
    pub limits_mm_s: BTreeMap<BodyPartLabel, f64>,
}

impl Default for VelocityLimitTable {
    /// Quasi-static limits for the screwing cell: skull 50, chest 100,
    /// arms 100, thighs 200, lower legs 50 mm/s; full speed 1.6 m/s.
    fn default() -> Self {
        use BodyPartLabel::*;
        let limits_mm_s = BTreeMap::from([
            (Head, 50.0),
            (Body, 100.0),
            (LeftUpperArm, 100.0),
            (RightUpperArm, 100.0),
            (LeftLowerArm, 100.0),
            (RightLowerArm, 100.0),
            (LeftUpperLeg, 200.0),
            (RightUpperLeg, 200.0),
            (LeftLowerLeg, 50.0),
            (RightLowerLeg, 50.0),
        ]);
        Self { full_speed_mm_s: 1600.0, limits_mm_s }
    }
}

impl VelocityLimitTable {
    pub fn validate(&self) -> Result<()> {
        if !(self.full_speed_mm_s.is_finite() && self.full_speed_mm_s > 0.0) {
            return Err(Error::Config(format!("full_speed_mm_s must be > 0, got {}", self.full_speed_mm_s)));
        }
        for label in BodyPartLabel::ALL {
            let v = map_label_to_limit(label, self)?;
            if !(v > 0.0 && v <= self.full_speed_mm_s) {
                return Err(Error::Config(format!("limit for {label} must lie in (0, {}], got {v}", self.full_speed_mm_s)));
            }
        }
        Ok(())
    }

    /// Most restrictive limit in the table.
    pub fn global_minimum(&self) -> f64 {
        self.limits_mm_s.values().copied().fold(self.full_speed_mm_s, f64::min)
    }

    fn limit_or_minimum(&self, label: BodyPartLabel) -> f64 {
        self.limits_mm_s.get(&label).copied().unwrap_or_else(|| self.global_minimum())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            full_speed_mm_s: self.full_speed_mm_s * factor,
            limits_mm_s: self.limits_mm_s.iter().map(|(k, v)| (*k, v * factor)).collect(),
        }
    }
}

pub fn map_label_to_limit(label: BodyPartLabel, limits: &VelocityLimitTable) -> Result<f64> {
    limits.limits_mm_s.get(&label).copied().ok_or(Error::MissingLimit(label))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionReason {
    NoHuman,
    Clear,
    Violation,
    FailedDetection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub label: Option<BodyPartLabel>,
    pub separation_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyDecision {
    pub commanded_velocity_mm_s: f64,
    pub violating: Vec<Violation>,
    /// Smallest separation among valid points, if any were measured.
    pub nearest_distance_mm: Option<f64>,
    /// Violating part whose limit sets the command.
    pub limiting_part: Option<BodyPartLabel>,
    pub reason: DecisionReason,
    /// Set while a reduced velocity is kept waiting for enough clear frames.
    pub holding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulatorState {
    pub consecutive_failures: u32,
    pub consecutive_clear: u32,
    pub hysteresis_margin_mm: f64,
    pub clear_frames_required: u32,
    pub failures_before_fallback: u32,
    pub last_decision: Option<SafetyDecision>,
}

impl Default for RegulatorState {
    fn default() -> Self {
        Self::new(0.0, 1, 1)
    }
}

impl RegulatorState {
    pub fn new(hysteresis_margin_mm: f64, clear_frames_required: u32, failures_before_fallback: u32) -> Self {
        Self {
            consecutive_failures: 0,
            consecutive_clear: 0,
            hysteresis_margin_mm: hysteresis_margin_mm.max(0.0),
            clear_frames_required: clear_frames_required.max(1),
            failures_before_fallback: failures_before_fallback.max(1),
            last_decision: None,
        }
    }

    fn last_velocity(&self, limits: &VelocityLimitTable) -> f64 {
        self.last_decision.as_ref().map_or(limits.full_speed_mm_s, |d| d.commanded_velocity_mm_s)
    }
}

/// One regulation step. `hull` must already carry the per-axis uncertainty
/// inflation when the budget is in per-axis mode.
pub fn evaluate(
    points: &BodyPointSet,
    hull: &ProtectiveHull,
    budget: &SeparationBudget,
    limits: &VelocityLimitTable,
    state: &RegulatorState,
) -> (SafetyDecision, RegulatorState) {
    let mut next = state.clone();
    let full = limits.full_speed_mm_s;
    let floor = limits.global_minimum();

    let measured: Vec<Violation> = points
        .valid_points()
        .map(|e| Violation { label: e.label, separation_mm: point_hull_distance(&e.world_mm, hull) })
        .collect();

    let decision = if points.status != DetectionStatus::NoHuman && measured.is_empty() {
        next.consecutive_failures = state.consecutive_failures.saturating_add(1);
        next.consecutive_clear = 0;
        if next.consecutive_failures >= state.failures_before_fallback {
            SafetyDecision {
                commanded_velocity_mm_s: floor,
                violating: Vec::new(),
                nearest_distance_mm: None,
                limiting_part: None,
                reason: DecisionReason::FailedDetection,
                holding: false,
            }
        } else {
            // tolerated dropout: keep whatever was commanded before
            let mut held = state.last_decision.clone().unwrap_or(SafetyDecision {
                commanded_velocity_mm_s: full,
                violating: Vec::new(),
                nearest_distance_mm: None,
                limiting_part: None,
                reason: DecisionReason::Clear,
                holding: false,
            });
            held.holding = true;
            held
        }
    } else {
        next.consecutive_failures = 0;
        let threshold = budget.scalar_threshold_mm;
        let nearest = measured.iter().map(|v| v.separation_mm).reduce(f64::min);
        let violating: Vec<Violation> = measured.iter().copied().filter(|v| v.separation_mm < threshold).collect();

        if !violating.is_empty() {
            next.consecutive_clear = 0;
            let (velocity, limiting_part) = match points.class {
                ExtractionClass::A => (floor, None),
                ExtractionClass::B => {
                    let (v, part) = violating
                        .iter()
                        .map(|v| {
                            let label = v.label;
                            let limit = label.map_or(floor, |l| limits.limit_or_minimum(l));
                            (limit, v.separation_mm, label)
                        })
                        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)))
                        .map(|(limit, _, label)| (limit, label))
                        .expect("non-empty");
                    (v, part)
                }
            };
            SafetyDecision {
                commanded_velocity_mm_s: velocity.min(full),
                violating,
                nearest_distance_mm: nearest,
                limiting_part,
                reason: DecisionReason::Violation,
                holding: false,
            }
        } else {
            let beyond_margin = measured.iter().all(|v| v.separation_mm >= threshold + state.hysteresis_margin_mm);
            next.consecutive_clear = if beyond_margin { state.consecutive_clear.saturating_add(1) } else { 0 };
            let reduced = state.last_velocity(limits) < full;
            let release = !reduced || next.consecutive_clear >= state.clear_frames_required;
            let reason = if points.status == DetectionStatus::NoHuman { DecisionReason::NoHuman } else { DecisionReason::Clear };
            SafetyDecision {
                commanded_velocity_mm_s: if release { full } else { state.last_velocity(limits) },
                violating: Vec::new(),
                nearest_distance_mm: nearest,
                limiting_part: if release { None } else { state.last_decision.as_ref().and_then(|d| d.limiting_part) },
                reason,
                holding: !release,
            }
        }
    };
    next.last_decision = Some(decision.clone());
    (decision, next)
}
