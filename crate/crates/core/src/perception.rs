//! Depth-frame body localization.
//!
//! Whole-body detections (class A: bounding box or person mask) yield one
//! closest body point. Part-level detections (class B: keypoints or part
//! masks) yield one point per body part. Depth values below the lower
//! threshold are stereo artifacts and never contribute.

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::body::BodyPartLabel;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::safety::ExtractionClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx_px: f64,
    pub fy_px: f64,
    pub cx_px: f64,
    pub cy_px: f64,
    pub width_px: u32,
    pub height_px: u32,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx_px > 0.0
            && self.fy_px > 0.0
            && self.cx_px >= 0.0
            && self.cx_px < self.width_px as f64
            && self.cy_px >= 0.0
            && self.cy_px < self.height_px as f64;
        if !ok {
            return Err(Error::Config(format!("invalid camera intrinsics {self:?}")));
        }
        Ok(())
    }

    pub fn in_bounds(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width_px as f64 && v < self.height_px as f64
    }

    /// Lateral size of one pixel at `depth_mm`, the coarser of both axes.
    pub fn pixel_footprint_mm(&self, depth_mm: f64) -> f64 {
        depth_mm / self.fx_px.min(self.fy_px)
    }
}

/// Rigid transform from the camera frame (x right, y down, z along the
/// optical axis) to the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraExtrinsics {
    /// Row-major rotation matrix.
    pub rotation: [[f64; 3]; 3],
    pub translation_mm: Vec3,
}

impl CameraExtrinsics {
    pub fn identity() -> Self {
        Self { rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], translation_mm: Vec3::zeros() }
    }

    /// Camera at `eye` with its optical axis through `target`; image rows
    /// point away from `up`.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Self> {
        let z = (target - eye).try_normalize(1e-12).ok_or_else(|| Error::Argument("camera eye and target coincide".into()))?;
        let x = z
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Argument("camera up vector is parallel to the optical axis".into()))?;
        let y = z.cross(&x);
        let r = Matrix3::from_columns(&[x, y, z]);
        Ok(Self::from_matrix(&r, eye))
    }

    pub fn from_matrix(r: &Matrix3<f64>, translation_mm: Vec3) -> Self {
        let mut rotation = [[0.0; 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = r[(i, j)];
            }
        }
        Self { rotation, translation_mm }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rotation[i][j])
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.matrix();
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err.is_nan() || err > 1e-9 || (r.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("camera rotation must be orthonormal with determinant +1".into()));
        }
        if !self.translation_mm.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("camera translation is not finite".into()));
        }
        Ok(())
    }

    pub fn to_world(&self, p_cam: &Vec3) -> Vec3 {
        self.matrix() * p_cam + self.translation_mm
    }

    pub fn to_camera(&self, p_world: &Vec3) -> Vec3 {
        self.matrix().transpose() * (p_world - self.translation_mm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthFrame {
    pub width: u32,
    pub height: u32,
    pub timestamp_s: f64,
    /// Row-major depth in millimetres; 0 marks a pixel without a return.
    pub depth_mm: Vec<u16>,
}

impl DepthFrame {
    pub fn new(width: u32, height: u32, timestamp_s: f64) -> Self {
        Self { width, height, timestamp_s, depth_mm: vec![0; (width * height) as usize] }
    }

    pub fn validate(&self, intr: &CameraIntrinsics) -> Result<()> {
        if self.width != intr.width_px || self.height != intr.height_px {
            return Err(Error::Argument(format!(
                "frame is {}x{}, camera is {}x{}",
                self.width, self.height, intr.width_px, intr.height_px
            )));
        }
        if self.depth_mm.len() != (self.width * self.height) as usize {
            return Err(Error::Argument("depth buffer length does not match frame size".into()));
        }
        Ok(())
    }

    pub fn depth(&self, px: Pixel) -> u16 {
        self.depth_mm[(px.1 * self.width + px.0) as usize]
    }

    pub fn set_depth(&mut self, px: Pixel, depth: u16) {
        let idx = (px.1 * self.width + px.0) as usize;
        self.depth_mm[idx] = depth;
    }

    pub fn contains(&self, px: Pixel) -> bool {
        px.0 < self.width && px.1 < self.height
    }
}

/// Pixel `(u, v)`: column, row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pixel(pub u32, pub u32);

impl Pixel {
    /// Scanline ordering key: row first, then column.
    fn scan_key(self) -> (u32, u32) {
        (self.1, self.0)
    }
}

/// Accepted depth range; values outside it are treated as invalid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthWindow {
    pub min_mm: f64,
    pub max_mm: f64,
}

impl DepthWindow {
    pub fn accepts(&self, depth_mm: f64) -> bool {
        depth_mm > 0.0 && depth_mm >= self.min_mm && depth_mm <= self.max_mm
    }
}

impl Default for DepthWindow {
    fn default() -> Self {
        Self { min_mm: 500.0, max_mm: 8000.0 }
    }
}

/// A lower threshold alone.
impl From<f64> for DepthWindow {
    fn from(min_mm: f64) -> Self {
        Self { min_mm, max_mm: f64::INFINITY }
    }
}

/// Whole-body image region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    BoundingBox { x_c_px: f64, y_c_px: f64, w_px: u32, h_px: u32 },
    Mask { pixels: Vec<Pixel> },
}

impl Region {
    /// Pixels of the region inside a `width x height` frame, in scanline order.
    pub fn pixels(&self, width: u32, height: u32) -> Vec<Pixel> {
        match self {
            Region::BoundingBox { x_c_px, y_c_px, w_px, h_px } => {
                let u0 = (x_c_px - *w_px as f64 / 2.0).round() as i64;
                let v0 = (y_c_px - *h_px as f64 / 2.0).round() as i64;
                let us = u0.max(0)..(u0 + *w_px as i64).min(width as i64);
                let vs = v0.max(0)..(v0 + *h_px as i64).min(height as i64);
                vs.flat_map(|v| us.clone().map(move |u| Pixel(u as u32, v as u32))).collect()
            }
            Region::Mask { pixels } => {
                let mut px: Vec<Pixel> = pixels.iter().copied().filter(|p| p.0 < width && p.1 < height).collect();
                px.sort_by_key(|p| p.scan_key());
                px.dedup();
                px
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Region::BoundingBox { w_px, h_px, .. } => *w_px == 0 || *h_px == 0,
            Region::Mask { pixels } => pixels.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartGeometry {
    Keypoints { keypoints: BTreeMap<BodyPartLabel, Pixel> },
    PartMasks { masks: BTreeMap<BodyPartLabel, Vec<Pixel>> },
}

impl PartGeometry {
    pub fn is_empty(&self) -> bool {
        match self {
            PartGeometry::Keypoints { keypoints } => keypoints.is_empty(),
            PartGeometry::PartMasks { masks } => masks.values().all(|m| m.is_empty()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Detection {
    /// The detector reports an empty scene.
    NoPerson,
    ClassA {
        region: Region,
    },
    ClassB {
        parts: PartGeometry,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub timestamp_s: f64,
    pub detection: Detection,
}

/// Which pixel of a part mask represents the part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskReference {
    /// Pixel whose world point lies closest to the world origin (robot base).
    #[default]
    WorldOrigin,
    /// Pixel with the smallest camera depth.
    CameraDepth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionSettings {
    pub depth: DepthWindow,
    pub roi_px: (u32, u32),
    pub mask_reference: MaskReference,
    /// Largest accepted gap between observation and frame timestamps.
    pub max_timestamp_skew_s: f64,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        Self {
            depth: DepthWindow::default(),
            roi_px: (10, 10),
            mask_reference: MaskReference::WorldOrigin,
            max_timestamp_skew_s: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionStatus {
    Detected,
    NoHuman,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyPointEntry {
    /// `None` for a whole-body point.
    pub label: Option<BodyPartLabel>,
    pub world_mm: Vec3,
    pub camera_depth_mm: f64,
    pub valid: bool,
}

impl BodyPointEntry {
    pub fn invalid(label: Option<BodyPartLabel>) -> Self {
        Self { label, world_mm: Vec3::zeros(), camera_depth_mm: 0.0, valid: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyPointSet {
    pub timestamp_s: f64,
    pub class: ExtractionClass,
    pub status: DetectionStatus,
    pub entries: Vec<BodyPointEntry>,
}

impl BodyPointSet {
    pub fn empty(timestamp_s: f64, class: ExtractionClass, status: DetectionStatus) -> Self {
        Self { timestamp_s, class, status, entries: Vec::new() }
    }

    pub fn valid_points(&self) -> impl Iterator<Item = &BodyPointEntry> {
        self.entries.iter().filter(|e| e.valid)
    }

    pub fn part(&self, label: BodyPartLabel) -> Option<&BodyPointEntry> {
        self.entries.iter().find(|e| e.label == Some(label))
    }
}

/// Pinhole back-projection into the camera frame.
pub fn deproject(pixel: (f64, f64), depth_mm: f64, intr: &CameraIntrinsics) -> Result<Vec3> {
    if !depth_mm.is_finite() || depth_mm <= 0.0 {
        return Err(Error::InvalidDepth(depth_mm));
    }
    let (u, v) = pixel;
    if !intr.in_bounds(u, v) {
        return Err(Error::Argument(format!("pixel ({u}, {v}) is outside the image")));
    }
    Ok(Vec3::new((u - intr.cx_px) * depth_mm / intr.fx_px, (v - intr.cy_px) * depth_mm / intr.fy_px, depth_mm))
}

/// Pinhole projection of a camera-frame point; `None` behind the camera.
pub fn project(p_cam: &Vec3, intr: &CameraIntrinsics) -> Option<(f64, f64)> {
    if p_cam.z <= 0.0 {
        return None;
    }
    Some((intr.fx_px * p_cam.x / p_cam.z + intr.cx_px, intr.fy_px * p_cam.y / p_cam.z + intr.cy_px))
}

/// Closest valid pixel of a whole-body region. Ties resolve to the first
/// pixel in scanline order.
pub fn min_depth_point(frame: &DepthFrame, region: &Region, window: impl Into<DepthWindow>) -> Result<(Pixel, f64)> {
    let window = window.into();
    if region.is_empty() {
        return Err(Error::Argument("empty region".into()));
    }
    let mut best: Option<(Pixel, u16)> = None;
    for px in region.pixels(frame.width, frame.height) {
        let d = frame.depth(px);
        if !window.accepts(d as f64) {
            continue;
        }
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((px, d));
        }
    }
    best.map(|(px, d)| (px, d as f64)).ok_or(Error::NoValidDepth)
}

/// Mean of the valid depths in a `roi` window centred on `center`, clipped to the frame.
pub fn roi_mean_depth(frame: &DepthFrame, center: Pixel, roi: (u32, u32), window: impl Into<DepthWindow>) -> Result<f64> {
    let window = window.into();
    let (w, h) = (roi.0.max(1) as i64, roi.1.max(1) as i64);
    let u0 = center.0 as i64 - w / 2;
    let v0 = center.1 as i64 - h / 2;
    let mut sum = 0u64;
    let mut count = 0u64;
    for v in v0.max(0)..(v0 + h).min(frame.height as i64) {
        for u in u0.max(0)..(u0 + w).min(frame.width as i64) {
            let d = frame.depth(Pixel(u as u32, v as u32));
            if window.accepts(d as f64) {
                sum += d as u64;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::NoValidDepth);
    }
    Ok(sum as f64 / count as f64)
}

fn point_entry(
    label: Option<BodyPartLabel>,
    px: (f64, f64),
    depth: f64,
    intr: &CameraIntrinsics,
    extr: &CameraExtrinsics,
) -> Result<BodyPointEntry> {
    let cam = deproject(px, depth, intr)?;
    Ok(BodyPointEntry { label, world_mm: extr.to_world(&cam), camera_depth_mm: depth, valid: true })
}

fn mask_entry(
    frame: &DepthFrame,
    label: BodyPartLabel,
    mask: &[Pixel],
    intr: &CameraIntrinsics,
    extr: &CameraExtrinsics,
    settings: &ExtractionSettings,
) -> BodyPointEntry {
    let mut pixels: Vec<Pixel> = mask.iter().copied().filter(|p| frame.contains(*p)).collect();
    pixels.sort_by_key(|p| p.scan_key());
    pixels.dedup();
    let mut best: Option<(f64, BodyPointEntry)> = None;
    for px in pixels {
        let d = frame.depth(px) as f64;
        if !settings.depth.accepts(d) {
            continue;
        }
        let Ok(entry) = point_entry(Some(label), (px.0 as f64, px.1 as f64), d, intr, extr) else {
            continue;
        };
        let key = match settings.mask_reference {
            MaskReference::WorldOrigin => entry.world_mm.norm(),
            MaskReference::CameraDepth => d,
        };
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            best = Some((key, entry));
        }
    }
    best.map(|(_, e)| e).unwrap_or(BodyPointEntry::invalid(Some(label)))
}

pub fn extract_body_points(
    frame: &DepthFrame,
    obs: &Observation,
    intr: &CameraIntrinsics,
    extr: &CameraExtrinsics,
    settings: &ExtractionSettings,
) -> Result<BodyPointSet> {
    frame.validate(intr)?;
    if (obs.timestamp_s - frame.timestamp_s).abs() > settings.max_timestamp_skew_s {
        return Err(Error::Argument(format!(
            "observation at {} s does not belong to frame at {} s",
            obs.timestamp_s, frame.timestamp_s
        )));
    }
    let t = obs.timestamp_s;
    let set = match &obs.detection {
        Detection::NoPerson => BodyPointSet::empty(t, ExtractionClass::A, DetectionStatus::NoHuman),
        Detection::ClassA { region } => {
            let entry = if region.is_empty() {
                None
            } else {
                min_depth_point(frame, region, settings.depth)
                    .ok()
                    .and_then(|(px, d)| point_entry(None, (px.0 as f64, px.1 as f64), d, intr, extr).ok())
            };
            match entry {
                Some(e) => BodyPointSet {
                    timestamp_s: t,
                    class: ExtractionClass::A,
                    status: DetectionStatus::Detected,
                    entries: vec![e],
                },
                None => BodyPointSet::empty(t, ExtractionClass::A, DetectionStatus::Failed),
            }
        }
        Detection::ClassB { parts } => {
            let entries: Vec<BodyPointEntry> = match parts {
                PartGeometry::Keypoints { keypoints } => keypoints
                    .iter()
                    .map(|(&label, &px)| {
                        if !frame.contains(px) {
                            return BodyPointEntry::invalid(Some(label));
                        }
                        roi_mean_depth(frame, px, settings.roi_px, settings.depth)
                            .and_then(|d| point_entry(Some(label), (px.0 as f64, px.1 as f64), d, intr, extr))
                            .unwrap_or(BodyPointEntry::invalid(Some(label)))
                    })
                    .collect(),
                PartGeometry::PartMasks { masks } => masks
                    .iter()
                    .filter(|(_, m)| !m.is_empty())
                    .map(|(&label, mask)| mask_entry(frame, label, mask, intr, extr, settings))
                    .collect(),
            };
            let status = if entries.iter().any(|e| e.valid) { DetectionStatus::Detected } else { DetectionStatus::Failed };
            BodyPointSet { timestamp_s: t, class: ExtractionClass::B, status, entries }
        }
    };
    Ok(set)
}
