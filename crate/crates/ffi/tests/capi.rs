use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use hrsf_ffi::*;

fn last_error() -> Option<String> {
    let p = hrsf_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

fn v(x: f64, y: f64, z: f64) -> HrsfVec3 {
    HrsfVec3 { x, y, z }
}

fn unit_hull() -> HrsfHull {
    HrsfHull { min: v(0.0, 0.0, 0.0), max: v(1000.0, 1000.0, 1000.0) }
}

fn fixture() -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/reference_scenario.json");
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn separation_terms() {
    let mut out = 0.0;
    assert_eq!(hrsf_compute_sh(370.0, 1000.0, &mut out), HrsfStatus::Ok);
    assert_eq!(out, 592.0);
    assert!(last_error().is_none());
    assert_eq!(hrsf_compute_sh(370.0, f64::NAN, &mut out), HrsfStatus::Ok);
    assert_eq!(out, 740.0);
    assert_eq!(hrsf_compute_c(70.0, &mut out), HrsfStatus::Ok);
    assert_eq!(out, 448.0);
    assert_eq!(hrsf_compute_sh(-1.0, 1000.0, &mut out), HrsfStatus::InvalidArgument);
    assert!(last_error().unwrap().contains("t_lat_max_ms"));
    assert_eq!(hrsf_compute_c(70.0, ptr::null_mut()), HrsfStatus::NullPointer);
    assert!(last_error().unwrap().contains("out_mm"));
}

#[test]
fn point_distance() {
    let mut out = 0.0;
    let status = unsafe { hrsf_point_hull_distance(&v(1100.0, 1100.0, 1100.0), &unit_hull(), &mut out) };
    assert_eq!(status, HrsfStatus::Ok);
    assert!((out - 173.205).abs() < 1e-3);
    let inverted = HrsfHull { min: v(10.0, 0.0, 0.0), max: v(0.0, 1.0, 1.0) };
    assert_eq!(unsafe { hrsf_point_hull_distance(&v(0.0, 0.0, 0.0), &inverted, &mut out) }, HrsfStatus::InvalidArgument);
    assert_eq!(unsafe { hrsf_point_hull_distance(ptr::null(), &unit_hull(), &mut out) }, HrsfStatus::NullPointer);
}

struct Regulator(*mut HrsfRegulator);

impl Regulator {
    fn new(method: i32, clear_frames: u32) -> Self {
        let mut handle = ptr::null_mut();
        assert_eq!(hrsf_regulator_new(method, false, 0.0, clear_frames, 1, &mut handle), HrsfStatus::Ok);
        Self(handle)
    }

    fn step(&self, detection: HrsfDetection, points: &[HrsfBodyPoint]) -> HrsfDecision {
        let mut out = std::mem::MaybeUninit::uninit();
        let status =
            unsafe { hrsf_regulator_evaluate(self.0, detection, points.as_ptr(), points.len(), &unit_hull(), out.as_mut_ptr()) };
        assert_eq!(status, HrsfStatus::Ok, "{:?}", last_error());
        unsafe { out.assume_init() }
    }
}

impl Drop for Regulator {
    fn drop(&mut self) {
        unsafe { hrsf_regulator_free(self.0) };
    }
}

fn part(label: i32, x: f64) -> HrsfBodyPoint {
    HrsfBodyPoint { label, position: v(x, 500.0, 500.0) }
}

#[test]
fn part_regulator_cycle() {
    let reg = Regulator::new(3, 2);
    let far = reg.step(HrsfDetection::Detected, &[part(0, 6000.0), part(8, 6000.0)]);
    assert_eq!(far.reason, HrsfReason::Clear);
    assert_eq!(far.commanded_velocity_mm_s, 1600.0);
    assert_eq!(far.limiting_part, -1);

    let near = reg.step(HrsfDetection::Detected, &[part(0, 1500.0), part(8, 6000.0)]);
    assert_eq!(near.reason, HrsfReason::Violation);
    assert_eq!(near.commanded_velocity_mm_s, 50.0);
    assert_eq!(near.limiting_part, 0);
    assert_eq!(near.violating_count, 1);

    let thigh = reg.step(HrsfDetection::Detected, &[part(6, 1500.0), part(1, 1600.0)]);
    assert_eq!(thigh.commanded_velocity_mm_s, 100.0);
    assert_eq!(thigh.limiting_part, 1);

    let first_clear = reg.step(HrsfDetection::Detected, &[part(0, 6000.0)]);
    assert_eq!(first_clear.commanded_velocity_mm_s, 100.0);
    let released = reg.step(HrsfDetection::Detected, &[part(0, 6000.0)]);
    assert_eq!(released.commanded_velocity_mm_s, 1600.0);

    let failed = reg.step(HrsfDetection::Failed, &[]);
    assert_eq!(failed.reason, HrsfReason::FailedDetection);
    assert_eq!(failed.commanded_velocity_mm_s, 50.0);
    assert!(failed.nearest_distance_mm.is_nan());

    let absent = Regulator::new(3, 1).step(HrsfDetection::NoHuman, &[]);
    assert_eq!(absent.reason, HrsfReason::NoHuman);
    assert_eq!(absent.commanded_velocity_mm_s, 1600.0);
}

#[test]
fn whole_body_regulator_uses_global_minimum() {
    let reg = Regulator::new(0, 1);
    let d = reg.step(HrsfDetection::Detected, &[part(-1, 1300.0)]);
    assert_eq!(d.commanded_velocity_mm_s, 50.0);
    assert_eq!(d.limiting_part, -1);
}

#[test]
fn regulator_rejects_bad_input() {
    let mut handle = ptr::null_mut();
    assert_eq!(hrsf_regulator_new(7, false, 0.0, 1, 1, &mut handle), HrsfStatus::InvalidArgument);
    assert!(handle.is_null());
    let reg = Regulator::new(2, 1);
    let mut out = std::mem::MaybeUninit::uninit();
    let bad = [part(10, 0.0)];
    let status =
        unsafe { hrsf_regulator_evaluate(reg.0, HrsfDetection::Detected, bad.as_ptr(), 1, &unit_hull(), out.as_mut_ptr()) };
    assert_eq!(status, HrsfStatus::InvalidArgument);
    assert!(last_error().unwrap().contains("10"));
    let status =
        unsafe { hrsf_regulator_evaluate(reg.0, HrsfDetection::Detected, ptr::null(), 3, &unit_hull(), out.as_mut_ptr()) };
    assert_eq!(status, HrsfStatus::NullPointer);
    unsafe { hrsf_regulator_free(ptr::null_mut()) };
}

#[test]
fn scenario_handle_runs_baselines() {
    let mut scenario = ptr::null_mut();
    assert_eq!(unsafe { hrsf_scenario_load(fixture().as_ptr(), &mut scenario) }, HrsfStatus::Ok);
    let mut summary = std::mem::MaybeUninit::uninit();
    assert_eq!(unsafe { hrsf_scenario_run(scenario, 4, 0, summary.as_mut_ptr()) }, HrsfStatus::Ok);
    let laser = unsafe { summary.assume_init() };
    assert!(laser.t_cycle_s > laser.no_interference_time_s);
    assert!(laser.steps > 0);
    assert_eq!(unsafe { hrsf_scenario_run(scenario, 9, 0, summary.as_mut_ptr()) }, HrsfStatus::InvalidArgument);
    unsafe { hrsf_scenario_free(scenario) };
}

#[test]
fn scenario_errors_carry_status() {
    let mut scenario = ptr::null_mut();
    let missing = CString::new("/nonexistent/scenario.json").unwrap();
    assert_eq!(unsafe { hrsf_scenario_load(missing.as_ptr(), &mut scenario) }, HrsfStatus::Validation);
    assert!(scenario.is_null());
    assert!(last_error().unwrap().contains("nonexistent"));
    assert_eq!(unsafe { hrsf_scenario_load(ptr::null(), &mut scenario) }, HrsfStatus::NullPointer);
}

#[test]
fn scenario_file_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { hrsf_run_scenario_file(fixture().as_ptr(), out.as_ptr()) }, HrsfStatus::Ok, "{:?}", last_error());
    assert!(dir.path().join("trace.csv").exists());
    assert!(dir.path().join("summary.json").exists());
}

fn compiler() -> Option<&'static str> {
    ["cc", "clang", "gcc"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok())
}

#[test]
fn c_caller_links_and_runs() {
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("hrsf.h")).unwrap();
    for symbol in ["hrsf_last_error", "hrsf_regulator_evaluate", "hrsf_scenario_run", "HRSF_STATUS_TIMEOUT = 3"] {
        assert!(header.contains(symbol), "{symbol}");
    }
    let Some(cc) = compiler() else {
        panic!("no C compiler on PATH");
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "hrsf.h"
int main(void) {
    double sh = 0.0;
    HrsfRegulator *reg = NULL;
    HrsfHull hull = {{0, 0, 0}, {1000, 1000, 1000}};
    HrsfBodyPoint head = {0, {1500, 500, 500}};
    HrsfDecision d;
    if (hrsf_compute_sh(370.0, 1000.0, &sh) != HRSF_STATUS_OK) return 1;
    if (hrsf_regulator_new(3, false, 0.0, 1, 1, &reg) != HRSF_STATUS_OK) return 1;
    hrsf_regulator_evaluate(reg, HRSF_DETECTION_DETECTED, &head, 1, &hull, &d);
    hrsf_regulator_free(reg);
    return d.reason == HRSF_REASON_VIOLATION ? 0 : 1;
}
"#,
    )
    .unwrap();
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    assert!(lib_dir.join("libhrsf_ffi.so").exists(), "shared library missing from {}", lib_dir.display());
    let exe = dir.path().join("use");
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(&include)
        .arg(&src)
        .arg("-o")
        .arg(&exe)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lhrsf_ffi")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).status().unwrap();
    assert!(run.success(), "C caller exited with {run}");
}
