//! Minimum separation distance assembly per perception method.
//!
//! The budget is `S_p = S_h + S_r + S_s + C + Z_d + Z_r` with the stopping
//! term `S_s` held at zero. `Z_d` and `Z_r` are either applied as a per-axis
//! inflation of the protective hull (default) or folded into the scalar
//! threshold as Euclidean norms.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// The four analysed human-localization methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    BodyRecognition,
    PoseEstimation,
    BodySegmentation,
    BodyPartSegmentation,
}

impl MethodKind {
    pub const ALL: [MethodKind; 4] =
        [MethodKind::BodyRecognition, MethodKind::PoseEstimation, MethodKind::BodySegmentation, MethodKind::BodyPartSegmentation];

    /// Whole-body methods extract one closest point (class A); part-level
    /// methods extract one point per body part (class B).
    pub fn extraction_class(self) -> ExtractionClass {
        match self {
            MethodKind::BodyRecognition | MethodKind::BodySegmentation => ExtractionClass::A,
            MethodKind::PoseEstimation | MethodKind::BodyPartSegmentation => ExtractionClass::B,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::BodyRecognition => "body_recognition",
            MethodKind::PoseEstimation => "pose_estimation",
            MethodKind::BodySegmentation => "body_segmentation",
            MethodKind::BodyPartSegmentation => "body_part_segmentation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractionClass {
    A,
    B,
}

/// Measured latency contributions of one method, in milliseconds.
///
/// `*_1` and `*_2` are the first and second pass of inference and 3D
/// extraction: a trigger landing just after a capture waits for the frame in
/// flight and then for a full pass over the next frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub t_cap_ms: f64,
    pub t_alg1_ms: f64,
    pub t_3d1_ms: f64,
    pub t_alg2_ms: f64,
    pub t_3d2_ms: f64,
    /// Safety PLC relay between the separation check and the robot.
    #[serde(default)]
    pub t_relay_ms: f64,
    pub t_adj_ms: f64,
    pub t_lat_max_ms: f64,
}

impl LatencyBreakdown {
    pub fn worst_case_sum_ms(&self) -> f64 {
        self.t_cap_ms + self.t_alg1_ms + self.t_3d1_ms + self.t_alg2_ms + self.t_3d2_ms + self.t_relay_ms + self.t_adj_ms
    }

    fn components(&self) -> [(&'static str, f64); 8] {
        [
            ("t_cap_ms", self.t_cap_ms),
            ("t_alg1_ms", self.t_alg1_ms),
            ("t_3d1_ms", self.t_3d1_ms),
            ("t_alg2_ms", self.t_alg2_ms),
            ("t_3d2_ms", self.t_3d2_ms),
            ("t_relay_ms", self.t_relay_ms),
            ("t_adj_ms", self.t_adj_ms),
            ("t_lat_max_ms", self.t_lat_max_ms),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.components() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("latency {name} must be >= 0, got {v}")));
            }
        }
        if self.worst_case_sum_ms() > self.t_lat_max_ms + 1e-9 {
            return Err(Error::Config(format!(
                "latency components sum to {} ms, above t_lat_max_ms {}",
                self.worst_case_sum_ms(),
                self.t_lat_max_ms
            )));
        }
        Ok(())
    }

    /// Splits `t_lat_max_ms` over a 30 Hz capture, a 10 ms PLC relay and a
    /// 40 ms drive adjustment, giving the rest to two inference passes.
    fn apportioned(t_lat_max_ms: f64, t_3d_ms: f64) -> Self {
        let (t_cap_ms, t_relay_ms, t_adj_ms) = (33.0, 10.0, 40.0);
        let per_pass = ((t_lat_max_ms - t_cap_ms - t_relay_ms - t_adj_ms) / 2.0).floor();
        let t_alg = per_pass - t_3d_ms;
        Self {
            t_cap_ms,
            t_alg1_ms: t_alg,
            t_3d1_ms: t_3d_ms,
            t_alg2_ms: t_alg,
            t_3d2_ms: t_3d_ms,
            t_relay_ms,
            t_adj_ms,
            t_lat_max_ms,
        }
    }
}

/// Assumed human approach speed when it is not measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanSpeedPolicy {
    pub v_far_mm_s: f64,
    pub v_near_mm_s: f64,
    pub near_threshold_mm: f64,
}

impl Default for HumanSpeedPolicy {
    fn default() -> Self {
        Self { v_far_mm_s: 1600.0, v_near_mm_s: 2000.0, near_threshold_mm: 500.0 }
    }
}

impl HumanSpeedPolicy {
    /// Speed for the last measured separation; unknown separation is treated as near.
    pub fn speed_for(&self, current_distance_mm: Option<f64>) -> f64 {
        match current_distance_mm {
            Some(d) if d >= self.near_threshold_mm => self.v_far_mm_s,
            _ => self.v_near_mm_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_far_mm_s > 0.0 && self.v_near_mm_s >= self.v_far_mm_s && self.near_threshold_mm >= 0.0) {
            return Err(Error::Config(format!("human speed policy violates v_near >= v_far > 0: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodProfile {
    pub name: MethodKind,
    pub t_lat_max_ms: f64,
    pub z_d_mm: Vec3,
    pub class: ExtractionClass,
    pub latency: LatencyBreakdown,
}

impl MethodProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_lat_max_ms.is_finite() && self.t_lat_max_ms >= 0.0) {
            return Err(Error::Config(format!("{}: t_lat_max_ms must be >= 0, got {}", self.name, self.t_lat_max_ms)));
        }
        if self.z_d_mm.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!("{}: z_d_mm must be >= 0 per axis, got {:?}", self.name, self.z_d_mm)));
        }
        if self.class != self.name.extraction_class() {
            return Err(Error::Config(format!("{}: class {:?} does not match the method", self.name, self.class)));
        }
        self.latency.validate().map_err(|e| Error::Config(format!("{}: {e}", self.name)))?;
        if (self.latency.t_lat_max_ms - self.t_lat_max_ms).abs() > 1e-9 {
            return Err(Error::Config(format!("{}: latency breakdown t_lat_max_ms disagrees with profile", self.name)));
        }
        Ok(())
    }
}

/// Human-motion separation contributions for the built-in profiles after
/// rounding to millimetres, keyed like [`builtin_profiles`].
pub const BUILTIN_SH_MM: [(MethodKind, f64); 4] = [
    (MethodKind::BodyRecognition, 592.0),
    (MethodKind::PoseEstimation, 488.0),
    (MethodKind::BodySegmentation, 894.0),
    (MethodKind::BodyPartSegmentation, 1299.0),
];

pub fn builtin_profiles() -> Vec<MethodProfile> {
    let make = |name: MethodKind, t_lat_max_ms: f64, z_d: [f64; 3], t_3d_ms: f64| MethodProfile {
        name,
        t_lat_max_ms,
        z_d_mm: Vec3::from(z_d),
        class: name.extraction_class(),
        latency: LatencyBreakdown::apportioned(t_lat_max_ms, t_3d_ms),
    };
    vec![
        make(MethodKind::BodyRecognition, 370.0, [346.0, 767.0, 399.0], 15.0),
        make(MethodKind::PoseEstimation, 305.0, [131.0, 57.0, 206.0], 15.0),
        make(MethodKind::BodySegmentation, 559.0, [346.0, 416.0, 334.0], 25.0),
        make(MethodKind::BodyPartSegmentation, 812.0, [87.0, 71.0, 151.0], 25.0),
    ]
}

pub fn builtin_profile(kind: MethodKind) -> MethodProfile {
    builtin_profiles().into_iter().find(|p| p.name == kind).expect("every kind has a built-in profile")
}

/// Contributions that do not depend on the perception method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyConstants {
    pub s_r_mm: f64,
    pub z_r_mm: Vec3,
    pub s_s_mm: f64,
    pub intrusion_c_mm: f64,
}

impl Default for SafetyConstants {
    fn default() -> Self {
        Self { s_r_mm: 5.0, z_r_mm: Vec3::new(8.0, 7.0, 11.0), s_s_mm: 0.0, intrusion_c_mm: 0.0 }
    }
}

impl SafetyConstants {
    pub fn validate(&self) -> Result<()> {
        let scalars = [("s_r_mm", self.s_r_mm), ("intrusion_c_mm", self.intrusion_c_mm)];
        for (name, v) in scalars {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("safety constant {name} must be >= 0, got {v}")));
            }
        }
        if self.z_r_mm.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!("z_r_mm must be >= 0 per axis, got {:?}", self.z_r_mm)));
        }
        if self.s_s_mm != 0.0 {
            return Err(Error::Config(format!("s_s_mm is fixed at 0, got {}", self.s_s_mm)));
        }
        Ok(())
    }
}

/// How the positional uncertainties enter the separation check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UncertaintyMode {
    #[default]
    PerAxis,
    Scalar,
}

impl UncertaintyMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per-axis" | "per_axis" => Some(Self::PerAxis),
            "scalar" => Some(Self::Scalar),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationBudget {
    pub s_h_mm: f64,
    pub s_r_mm: f64,
    pub c_mm: f64,
    pub z_d_mm: Vec3,
    pub z_r_mm: Vec3,
    pub scalar_threshold_mm: f64,
    pub mode: UncertaintyMode,
}

impl SeparationBudget {
    /// Per-axis hull growth `(Z_d, Z_r)` to apply before distance checks;
    /// zero in scalar mode, where the norms already sit in the threshold.
    pub fn hull_inflation(&self) -> (Vec3, Vec3) {
        match self.mode {
            UncertaintyMode::PerAxis => (self.z_d_mm, self.z_r_mm),
            UncertaintyMode::Scalar => (Vec3::zeros(), Vec3::zeros()),
        }
    }
}

/// Distance covered by the human during the reaction time.
pub fn compute_sh(t_lat_max_ms: f64, policy: &HumanSpeedPolicy, current_distance_mm: Option<f64>) -> f64 {
    policy.speed_for(current_distance_mm) * t_lat_max_ms / 1000.0
}

/// Intrusion distance for a field sensor with detection capacity `d_mm`.
/// Contributions for capacities at or below 14 mm are neglected.
pub fn compute_c(detection_capacity_mm: f64) -> f64 {
    (8.0 * (detection_capacity_mm - 14.0)).max(0.0)
}

/// Robot-side reaction distance from a joint-state query latency.
pub fn derive_sr(query_latency_ms: f64, robot_max_speed_mm_s: f64) -> f64 {
    query_latency_ms / 1000.0 * robot_max_speed_mm_s
}

/// Reporting helper; comparisons always use the unrounded value.
pub fn round_mm(v: f64) -> f64 {
    v.round()
}

pub fn compute_budget(
    profile: &MethodProfile,
    consts: &SafetyConstants,
    policy: &HumanSpeedPolicy,
    current_distance_mm: Option<f64>,
    mode: UncertaintyMode,
) -> SeparationBudget {
    let s_h_mm = compute_sh(profile.t_lat_max_ms, policy, current_distance_mm);
    let base = s_h_mm + consts.s_r_mm + consts.intrusion_c_mm;
    let scalar_threshold_mm = match mode {
        UncertaintyMode::PerAxis => base,
        UncertaintyMode::Scalar => base + profile.z_d_mm.norm() + consts.z_r_mm.norm(),
    };
    SeparationBudget {
        s_h_mm,
        s_r_mm: consts.s_r_mm,
        c_mm: consts.intrusion_c_mm,
        z_d_mm: profile.z_d_mm,
        z_r_mm: consts.z_r_mm,
        scalar_threshold_mm,
        mode,
    }
}
