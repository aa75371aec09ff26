//! Scenario documents: JSON with a `schema_version` and unit-suffixed keys.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DhParameterTable, Vec3};
use crate::perception::{DepthWindow, ExtractionSettings, MaskReference};
use crate::regulator::VelocityLimitTable;
use crate::safety::{
    builtin_profiles, compute_sh, HumanSpeedPolicy, MethodKind, MethodProfile, SafetyConstants, UncertaintyMode, BUILTIN_SH_MM,
};
use crate::sim::human::HumanMotionScript;
use crate::sim::latency::PipelineLatencyModel;
use crate::sim::render::{BodyModel, CameraModel};
use crate::sim::trajectory::RobotTrajectory;
use crate::sim::RunMethod;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSection {
    pub dh: DhParameterTable,
    pub hull_padding_mm: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptionMode {
    /// Scripted part positions are handed to the regulator directly.
    Direct,
    /// Frames are rendered and passed through depth extraction.
    #[default]
    Rendered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionSection {
    #[serde(default)]
    pub mode: PerceptionMode,
    pub d_thres_mm: f64,
    pub d_max_mm: f64,
    pub roi_px: (u32, u32),
    #[serde(default)]
    pub mask_reference: MaskReference,
    /// Noise standard deviation as a multiple of the method's `z_d_mm`.
    #[serde(default)]
    pub noise_sigma_scale: f64,
    #[serde(default)]
    pub noise_clip_sigma: Option<f64>,
    #[serde(default)]
    pub failure_rate: f64,
    #[serde(default)]
    pub background_depth_mm: u16,
    #[serde(default)]
    pub body_model: BodyModel,
}

impl Default for PerceptionSection {
    fn default() -> Self {
        Self {
            mode: PerceptionMode::Rendered,
            d_thres_mm: 500.0,
            d_max_mm: 8000.0,
            roi_px: (10, 10),
            mask_reference: MaskReference::WorldOrigin,
            noise_sigma_scale: 0.0,
            noise_clip_sigma: None,
            failure_rate: 0.0,
            background_depth_mm: 0,
            body_model: BodyModel::default(),
        }
    }
}

impl PerceptionSection {
    pub fn extraction_settings(&self) -> ExtractionSettings {
        ExtractionSettings {
            depth: DepthWindow { min_mm: self.d_thres_mm, max_mm: self.d_max_mm },
            roi_px: self.roi_px,
            mask_reference: self.mask_reference,
            ..ExtractionSettings::default()
        }
    }
}

/// Replacement for a built-in method profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileEntry {
    pub profile: MethodProfile,
    /// Expected rounded human-motion contribution, checked by `validate`.
    #[serde(default)]
    pub expected_sh_mm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegulatorSettings {
    pub uncertainty_mode: UncertaintyMode,
    pub hysteresis_margin_mm: f64,
    pub clear_frames_required: u32,
    pub failures_before_fallback: u32,
    /// Check each observation against every robot pose between its capture
    /// and its evaluation, not only the pose at evaluation.
    pub swept_hull: bool,
}

impl Default for RegulatorSettings {
    fn default() -> Self {
        Self {
            uncertainty_mode: UncertaintyMode::PerAxis,
            hysteresis_margin_mm: 0.0,
            clear_frames_required: 1,
            failures_before_fallback: 1,
            swept_hull: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatencySettings {
    pub capture_period_ms: f64,
    pub double_processing: bool,
}

impl Default for LatencySettings {
    fn default() -> Self {
        Self { capture_period_ms: 33.0, double_processing: true }
    }
}

/// Floor-level safety laser scanner guarding a rectangular field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaserSettings {
    pub detection_capacity_mm: f64,
    pub scan_period_ms: f64,
    pub response_ms: f64,
    pub relay_ms: f64,
    pub t_adj_ms: f64,
    /// Distance from the guarded cell to the field border; derived from the
    /// slowest profile when absent.
    pub field_margin_mm: Option<f64>,
    /// Guarded cell rectangle `[x, y]`; the robot's swept footprint when absent.
    pub cell_min_xy_mm: Option<[f64; 2]>,
    pub cell_max_xy_mm: Option<[f64; 2]>,
}

impl Default for LaserSettings {
    fn default() -> Self {
        Self {
            detection_capacity_mm: 70.0,
            scan_period_ms: 30.0,
            response_ms: 60.0,
            relay_ms: 10.0,
            t_adj_ms: 40.0,
            field_margin_mm: None,
            cell_min_xy_mm: None,
            cell_max_xy_mm: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub dt_ms: f64,
    pub max_time_s: f64,
    pub seed: u64,
    pub repeats: u32,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { dt_ms: 1.0, max_time_s: 600.0, seed: 0, repeats: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub robot: RobotSection,
    pub camera: CameraModel,
    #[serde(default)]
    pub perception: PerceptionSection,
    pub method: RunMethod,
    #[serde(default)]
    pub profiles: Vec<ProfileEntry>,
    #[serde(default)]
    pub safety: SafetyConstants,
    #[serde(default)]
    pub human_speed: HumanSpeedPolicy,
    pub velocity_limits: VelocityLimitTable,
    #[serde(default)]
    pub regulator: RegulatorSettings,
    pub human: HumanMotionScript,
    pub trajectory: RobotTrajectory,
    #[serde(default)]
    pub latency: LatencySettings,
    #[serde(default)]
    pub laser: LaserSettings,
    #[serde(default)]
    pub sim: SimSettings,
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Argument(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Profile for `kind`, preferring an override from the document.
    pub fn profile(&self, kind: MethodKind) -> MethodProfile {
        self.profiles
            .iter()
            .find(|e| e.profile.name == kind)
            .map(|e| e.profile)
            .unwrap_or_else(|| crate::safety::builtin_profile(kind))
    }

    /// Every profile in use with the human-motion contribution it is expected
    /// to reproduce.
    pub fn profiles_with_expectations(&self) -> Vec<(MethodProfile, Option<f64>)> {
        builtin_profiles()
            .into_iter()
            .map(|p| match self.profiles.iter().find(|e| e.profile.name == p.name) {
                Some(e) => (e.profile, e.expected_sh_mm),
                None => {
                    let expected = BUILTIN_SH_MM.iter().find(|(k, _)| *k == p.name).map(|(_, v)| *v);
                    (p, expected)
                }
            })
            .collect()
    }

    pub fn latency_model(&self, profile: &MethodProfile) -> PipelineLatencyModel {
        PipelineLatencyModel::from_breakdown(&profile.latency, self.latency.capture_period_ms, self.latency.double_processing)
    }

    /// Every problem found, each prefixed with the offending field.
    pub fn check(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let mut push = |field: &str, r: Result<()>| {
            if let Err(e) = r {
                issues.push(format!("{field}: {e}"));
            }
        };
        if self.schema_version != SCHEMA_VERSION {
            push(
                "schema_version",
                Err(Error::Config(format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version))),
            );
        }
        push("robot.dh", self.robot.dh.validate());
        push("robot.hull_padding_mm", non_negative(&self.robot.hull_padding_mm));
        push("camera.intrinsics", self.camera.intrinsics.validate());
        push("camera.extrinsics", self.camera.extrinsics.validate());
        push("perception", self.check_perception());
        push("perception.body_model", self.perception.body_model.validate());
        let mut seen = Vec::new();
        for (i, entry) in self.profiles.iter().enumerate() {
            let field = format!("profiles[{i}]");
            push(&field, entry.profile.validate());
            if entry.profile.class != entry.profile.name.extraction_class() {
                push(&field, Err(Error::Config(format!("class does not match method {}", entry.profile.name))));
            }
            if seen.contains(&entry.profile.name) {
                push(&field, Err(Error::Config(format!("duplicate profile {}", entry.profile.name))));
            }
            seen.push(entry.profile.name);
        }
        for (profile, expected) in self.profiles_with_expectations() {
            if let Some(expected) = expected {
                let far = Some(self.human_speed.near_threshold_mm);
                let sh = compute_sh(profile.t_lat_max_ms, &self.human_speed, far).round();
                if sh != expected {
                    push(
                        &format!("profiles.{}.expected_sh_mm", profile.name),
                        Err(Error::Config(format!("recomputed {sh} mm, expected {expected} mm"))),
                    );
                }
            }
            let model = self.latency_model(&profile);
            push(&format!("latency ({})", profile.name), model.validate(profile.t_lat_max_ms, self.sim.dt_ms.max(1e-6)));
        }
        push("safety", self.safety.validate());
        push("human_speed", self.human_speed.validate());
        push("velocity_limits", self.velocity_limits.validate());
        push("regulator", self.check_regulator());
        push("human", self.human.validate());
        push("trajectory", self.trajectory.validate(self.robot.dh.dof(), self.velocity_limits.full_speed_mm_s));
        push("laser", self.check_laser());
        push("sim", self.check_sim());
        issues
    }

    pub fn validate(&self) -> Result<()> {
        match self.check().into_iter().next() {
            None => Ok(()),
            Some(first) => Err(Error::Config(first)),
        }
    }

    fn check_perception(&self) -> Result<()> {
        let p = &self.perception;
        if !(p.d_thres_mm > 0.0 && p.d_max_mm > p.d_thres_mm) {
            return Err(Error::Config(format!("need 0 < d_thres_mm < d_max_mm, got {} and {}", p.d_thres_mm, p.d_max_mm)));
        }
        if p.roi_px.0 == 0 || p.roi_px.1 == 0 {
            return Err(Error::Config("roi_px must be at least 1x1".into()));
        }
        if !(p.noise_sigma_scale.is_finite() && p.noise_sigma_scale >= 0.0) {
            return Err(Error::Config("noise_sigma_scale must be >= 0".into()));
        }
        if p.noise_clip_sigma.is_some_and(|k| k.is_nan() || k <= 0.0) {
            return Err(Error::Config("noise_clip_sigma must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&p.failure_rate) {
            return Err(Error::Config(format!("failure_rate must lie in [0, 1], got {}", p.failure_rate)));
        }
        Ok(())
    }

    fn check_regulator(&self) -> Result<()> {
        let r = &self.regulator;
        if !(r.hysteresis_margin_mm.is_finite() && r.hysteresis_margin_mm >= 0.0) {
            return Err(Error::Config("hysteresis_margin_mm must be >= 0".into()));
        }
        if r.clear_frames_required == 0 || r.failures_before_fallback == 0 {
            return Err(Error::Config("clear_frames_required and failures_before_fallback must be >= 1".into()));
        }
        Ok(())
    }

    fn check_laser(&self) -> Result<()> {
        let l = &self.laser;
        let scalars = [
            ("detection_capacity_mm", l.detection_capacity_mm),
            ("response_ms", l.response_ms),
            ("relay_ms", l.relay_ms),
            ("t_adj_ms", l.t_adj_ms),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0")));
            }
        }
        if l.scan_period_ms.is_nan() || l.scan_period_ms <= 0.0 {
            return Err(Error::Config("scan_period_ms must be > 0".into()));
        }
        if l.field_margin_mm.is_some_and(|m| m.is_nan() || m < 0.0) {
            return Err(Error::Config("field_margin_mm must be >= 0".into()));
        }
        match (l.cell_min_xy_mm, l.cell_max_xy_mm) {
            (None, None) => Ok(()),
            (Some(lo), Some(hi)) if lo[0] <= hi[0] && lo[1] <= hi[1] => Ok(()),
            _ => Err(Error::Config("cell_min_xy_mm and cell_max_xy_mm must be given together with min <= max".into())),
        }
    }

    fn check_sim(&self) -> Result<()> {
        let s = &self.sim;
        if !(s.dt_ms > 0.0 && s.dt_ms.is_finite()) {
            return Err(Error::Config("dt_ms must be > 0".into()));
        }
        if s.max_time_s.is_nan() || s.max_time_s <= 0.0 {
            return Err(Error::Config("max_time_s must be > 0".into()));
        }
        if s.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        Ok(())
    }
}

fn non_negative(v: &Vec3) -> Result<()> {
    if v.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::Config(format!("must be >= 0 per axis, got {v:?}")));
    }
    Ok(())
}
