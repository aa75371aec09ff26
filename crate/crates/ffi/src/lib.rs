//! C interface to the hrsf engine.
//!
//! Every entry point returns an [`HrsfStatus`]; on failure a message is kept
//! per thread and can be read with [`hrsf_last_error`]. Handles are opaque and
//! must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hrsf_core::cli::{cmd_run, load_config, Failure, Overrides, Status};
use hrsf_core::config::ScenarioConfig;
use hrsf_core::geometry::{inflate_hull, point_hull_distance, ProtectiveHull, Vec3};
use hrsf_core::perception::{BodyPointEntry, BodyPointSet, DetectionStatus};
use hrsf_core::regulator::{evaluate, DecisionReason, RegulatorState, VelocityLimitTable};
use hrsf_core::safety::{
    builtin_profile, compute_budget, compute_c, compute_sh, HumanSpeedPolicy, MethodKind, MethodProfile, SafetyConstants,
    UncertaintyMode,
};
use hrsf_core::sim::{run_method, RunMethod};
use hrsf_core::{BodyPartLabel, Error};

/// Result of every call. The first four values match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrsfStatus {
    Ok = 0,
    Internal = 1,
    Validation = 2,
    Timeout = 3,
    NullPointer = 4,
    InvalidArgument = 5,
}

impl From<Status> for HrsfStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Success => HrsfStatus::Ok,
            Status::Internal => HrsfStatus::Internal,
            Status::Validation => HrsfStatus::Validation,
            Status::Timeout => HrsfStatus::Timeout,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrsfVec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<HrsfVec3> for Vec3 {
    fn from(v: HrsfVec3) -> Self {
        Vec3::new(v.x, v.y, v.z)
    }
}

/// Axis-aligned box in millimetres.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrsfHull {
    pub min: HrsfVec3,
    pub max: HrsfVec3,
}

/// Estimated body point. `label` is a body-part index in `0..10`
/// (head, body, left/right upper arm, left/right lower arm, left/right upper
/// leg, left/right lower leg) or `-1` for a whole-body point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrsfBodyPoint {
    pub label: i32,
    pub position: HrsfVec3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrsfDetection {
    Detected = 0,
    NoHuman = 1,
    Failed = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrsfReason {
    NoHuman = 0,
    Clear = 1,
    Violation = 2,
    FailedDetection = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrsfDecision {
    pub commanded_velocity_mm_s: f64,
    /// Smallest measured separation, NaN when nothing was measured.
    pub nearest_distance_mm: f64,
    /// Part whose limit sets the command, `-1` for none.
    pub limiting_part: i32,
    pub violating_count: u32,
    pub reason: HrsfReason,
    pub holding: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrsfRunSummary {
    pub t_cycle_s: f64,
    pub no_interference_time_s: f64,
    pub min_commanded_mm_s: f64,
    /// NaN when no separation was ever measured.
    pub min_separation_mm: f64,
    pub steps: u64,
}

/// Stateful velocity regulator for one perception method.
pub struct HrsfRegulator {
    profile: MethodProfile,
    safety: SafetyConstants,
    policy: HumanSpeedPolicy,
    limits: VelocityLimitTable,
    mode: UncertaintyMode,
    state: RegulatorState,
}

/// Validated scenario document.
pub struct HrsfScenario {
    config: ScenarioConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct CallError {
    status: HrsfStatus,
    message: String,
}

impl CallError {
    fn null(what: &str) -> Self {
        Self { status: HrsfStatus::NullPointer, message: format!("{what} must not be null") }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self { status: HrsfStatus::InvalidArgument, message: message.into() }
    }
}

impl From<Failure> for CallError {
    fn from(f: Failure) -> Self {
        Self { status: f.status.into(), message: f.message }
    }
}

impl From<Error> for CallError {
    fn from(e: Error) -> Self {
        Failure::from(e).into()
    }
}

fn set_last_error(message: Option<String>) {
    let text = message.map(|m| CString::new(m.replace('\0', " ")).expect("interior nul removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

fn guard(f: impl FnOnce() -> Result<(), CallError>) -> HrsfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            HrsfStatus::Ok
        }
        Ok(Err(e)) => {
            set_last_error(Some(e.message));
            e.status
        }
        Err(_) => {
            set_last_error(Some("internal panic".into()));
            HrsfStatus::Internal
        }
    }
}

fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), CallError> {
    if out.is_null() {
        return Err(CallError::null(what));
    }
    // SAFETY: checked non-null; the caller provides writable storage for one T.
    unsafe { out.write(value) };
    Ok(())
}

fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, CallError> {
    if p.is_null() {
        return Err(CallError::null(what));
    }
    // SAFETY: checked non-null; the caller passes a nul-terminated string.
    let s = unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| CallError::invalid(format!("{what} is not UTF-8")))?;
    Ok(Path::new(s))
}

fn method_kind(index: i32) -> Result<MethodKind, CallError> {
    const KINDS: [MethodKind; 4] =
        [MethodKind::BodyRecognition, MethodKind::BodySegmentation, MethodKind::PoseEstimation, MethodKind::BodyPartSegmentation];
    usize::try_from(index)
        .ok()
        .and_then(|i| KINDS.get(i).copied())
        .ok_or_else(|| CallError::invalid(format!("unknown method {index}")))
}

fn label_index(label: Option<BodyPartLabel>) -> i32 {
    label.map_or(-1, |l| l.index() as i32)
}

fn hull_arg(hull: *const HrsfHull) -> Result<ProtectiveHull, CallError> {
    if hull.is_null() {
        return Err(CallError::null("hull"));
    }
    // SAFETY: checked non-null.
    let h = unsafe { *hull };
    if ![h.min, h.max].iter().all(|v| v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
        return Err(CallError::invalid("hull bounds must be finite"));
    }
    let hull = ProtectiveHull::new(h.min.into(), h.max.into());
    if !hull.is_well_formed() {
        return Err(CallError::invalid("hull needs finite bounds with min <= max"));
    }
    Ok(hull)
}

/// Message for the most recent failed call on this thread, or NULL after a
/// success. The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hrsf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Human-motion separation for a latency budget under the default approach
/// speeds. Pass NaN for `current_distance_mm` when no separation is known.
#[no_mangle]
pub extern "C" fn hrsf_compute_sh(t_lat_max_ms: f64, current_distance_mm: f64, out_mm: *mut f64) -> HrsfStatus {
    guard(|| {
        if !(t_lat_max_ms.is_finite() && t_lat_max_ms >= 0.0) {
            return Err(CallError::invalid(format!("t_lat_max_ms must be finite and >= 0, got {t_lat_max_ms}")));
        }
        let distance = (!current_distance_mm.is_nan()).then_some(current_distance_mm);
        write_out(out_mm, compute_sh(t_lat_max_ms, &HumanSpeedPolicy::default(), distance), "out_mm")
    })
}

/// Intrusion distance for a sensor of the given detection capacity.
#[no_mangle]
pub extern "C" fn hrsf_compute_c(detection_capacity_mm: f64, out_mm: *mut f64) -> HrsfStatus {
    guard(|| {
        if !detection_capacity_mm.is_finite() {
            return Err(CallError::invalid("detection capacity must be finite"));
        }
        write_out(out_mm, compute_c(detection_capacity_mm), "out_mm")
    })
}

/// Euclidean distance from `point` to `hull`; zero inside.
///
/// # Safety
/// `point` and `hull` must each be NULL or point to a readable value.
#[no_mangle]
pub unsafe extern "C" fn hrsf_point_hull_distance(point: *const HrsfVec3, hull: *const HrsfHull, out_mm: *mut f64) -> HrsfStatus {
    guard(|| {
        if point.is_null() {
            return Err(CallError::null("point"));
        }
        let hull = hull_arg(hull)?;
        // SAFETY: checked non-null.
        let p: Vec3 = unsafe { *point }.into();
        write_out(out_mm, point_hull_distance(&p, &hull), "out_mm")
    })
}

/// Creates a regulator for method `method` (0 body recognition, 1 body
/// segmentation, 2 pose estimation, 3 body-part segmentation) with the
/// built-in profile, safety constants and velocity limits. `scalar_mode`
/// selects the scalar uncertainty budget instead of per-axis hull growth.
#[no_mangle]
pub extern "C" fn hrsf_regulator_new(
    method: i32,
    scalar_mode: bool,
    hysteresis_margin_mm: f64,
    clear_frames_required: u32,
    failures_before_fallback: u32,
    out: *mut *mut HrsfRegulator,
) -> HrsfStatus {
    guard(|| {
        let kind = method_kind(method)?;
        if !(hysteresis_margin_mm.is_finite() && hysteresis_margin_mm >= 0.0) {
            return Err(CallError::invalid("hysteresis margin must be finite and >= 0"));
        }
        let regulator = HrsfRegulator {
            profile: builtin_profile(kind),
            safety: SafetyConstants::default(),
            policy: HumanSpeedPolicy::default(),
            limits: VelocityLimitTable::default(),
            mode: if scalar_mode { UncertaintyMode::Scalar } else { UncertaintyMode::PerAxis },
            state: RegulatorState::new(hysteresis_margin_mm, clear_frames_required, failures_before_fallback),
        };
        write_out(out, Box::into_raw(Box::new(regulator)), "out")
    })
}

/// # Safety
/// `regulator` must be NULL or a handle from [`hrsf_regulator_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn hrsf_regulator_free(regulator: *mut HrsfRegulator) {
    if !regulator.is_null() {
        // SAFETY: the caller hands back ownership of a live handle.
        drop(unsafe { Box::from_raw(regulator) });
    }
}

/// One regulation step for `count` estimated points against the robot's
/// un-inflated `hull`. The regulator keeps its hysteresis and failure state
/// between calls.
///
/// # Safety
/// `regulator` must be a live handle, `points` must hold `count` readable
/// entries (it may be NULL when `count` is 0), and `hull` must be readable.
#[no_mangle]
pub unsafe extern "C" fn hrsf_regulator_evaluate(
    regulator: *mut HrsfRegulator,
    detection: HrsfDetection,
    points: *const HrsfBodyPoint,
    count: usize,
    hull: *const HrsfHull,
    out: *mut HrsfDecision,
) -> HrsfStatus {
    guard(|| {
        if regulator.is_null() {
            return Err(CallError::null("regulator"));
        }
        // SAFETY: checked non-null; the caller owns a live handle.
        let reg = unsafe { &mut *regulator };
        let hull = hull_arg(hull)?;
        let raw = match count {
            0 => &[][..],
            _ if points.is_null() => return Err(CallError::null("points")),
            // SAFETY: checked non-null; the caller guarantees `count` entries.
            _ => unsafe { std::slice::from_raw_parts(points, count) },
        };
        let mut entries = Vec::with_capacity(raw.len());
        for p in raw {
            let label = match p.label {
                -1 => None,
                i => Some(
                    usize::try_from(i)
                        .ok()
                        .and_then(|i| BodyPartLabel::ALL.get(i).copied())
                        .ok_or_else(|| CallError::invalid(format!("unknown body part {i}")))?,
                ),
            };
            let world_mm: Vec3 = p.position.into();
            entries.push(BodyPointEntry { label, world_mm, camera_depth_mm: 0.0, valid: world_mm.iter().all(|c| c.is_finite()) });
        }
        let status = match detection {
            HrsfDetection::Detected => DetectionStatus::Detected,
            HrsfDetection::NoHuman => DetectionStatus::NoHuman,
            HrsfDetection::Failed => DetectionStatus::Failed,
        };
        let set = BodyPointSet { timestamp_s: 0.0, class: reg.profile.class, status, entries };

        let budget_at = |nearest| compute_budget(&reg.profile, &reg.safety, &reg.policy, nearest, reg.mode);
        let (zd, zr) = budget_at(None).hull_inflation();
        let inflated = inflate_hull(&hull, zd, zr)?;
        let nearest = set.valid_points().map(|e| point_hull_distance(&e.world_mm, &inflated)).reduce(f64::min);
        let (decision, next) = evaluate(&set, &inflated, &budget_at(nearest), &reg.limits, &reg.state);
        reg.state = next;
        let reason = match decision.reason {
            DecisionReason::NoHuman => HrsfReason::NoHuman,
            DecisionReason::Clear => HrsfReason::Clear,
            DecisionReason::Violation => HrsfReason::Violation,
            DecisionReason::FailedDetection => HrsfReason::FailedDetection,
        };
        let result = HrsfDecision {
            commanded_velocity_mm_s: decision.commanded_velocity_mm_s,
            nearest_distance_mm: decision.nearest_distance_mm.unwrap_or(f64::NAN),
            limiting_part: label_index(decision.limiting_part),
            violating_count: decision.violating.len() as u32,
            reason,
            holding: decision.holding,
        };
        write_out(out, result, "out")
    })
}

/// Loads and validates a scenario document.
///
/// # Safety
/// `path` must be NULL or a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hrsf_scenario_load(path: *const c_char, out: *mut *mut HrsfScenario) -> HrsfStatus {
    guard(|| {
        let config = load_config(path_arg(path, "path")?, Overrides::default())?;
        write_out(out, Box::into_raw(Box::new(HrsfScenario { config })), "out")
    })
}

/// # Safety
/// `scenario` must be NULL or a handle from [`hrsf_scenario_load`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn hrsf_scenario_free(scenario: *mut HrsfScenario) {
    if !scenario.is_null() {
        // SAFETY: the caller hands back ownership of a live handle.
        drop(unsafe { Box::from_raw(scenario) });
    }
}

/// Simulates one cycle. `method` indexes body recognition, body
/// segmentation, pose estimation, body-part segmentation, laser scanner and
/// fixed lowest speed in that order; `-1` uses the document's method.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hrsf_scenario_run(
    scenario: *const HrsfScenario,
    method: i32,
    seed: u64,
    out: *mut HrsfRunSummary,
) -> HrsfStatus {
    guard(|| {
        if scenario.is_null() {
            return Err(CallError::null("scenario"));
        }
        // SAFETY: checked non-null; the caller owns a live handle.
        let cfg = unsafe { &(*scenario).config };
        let method = match method {
            -1 => cfg.method,
            i => usize::try_from(i)
                .ok()
                .and_then(|i| RunMethod::ALL.get(i).copied())
                .ok_or_else(|| CallError::invalid(format!("unknown method {i}")))?,
        };
        let (_, s) = run_method(cfg, method, seed)?;
        let summary = HrsfRunSummary {
            t_cycle_s: s.t_cycle_s,
            no_interference_time_s: s.no_interference_time_s,
            min_commanded_mm_s: s.min_commanded_mm_s,
            min_separation_mm: s.min_separation_mm.unwrap_or(f64::NAN),
            steps: s.steps as u64,
        };
        write_out(out, summary, "out")
    })
}

/// Runs a scenario file and writes its trace and summary into `out_dir`,
/// exactly as the `run` command does.
///
/// # Safety
/// `config_path` and `out_dir` must be NULL or nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn hrsf_run_scenario_file(config_path: *const c_char, out_dir: *const c_char) -> HrsfStatus {
    guard(|| {
        let config = path_arg(config_path, "config_path")?;
        let out = path_arg(out_dir, "out_dir")?;
        cmd_run(config, out, Overrides::default())?;
        Ok(())
    })
}
