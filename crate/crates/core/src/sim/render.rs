//! Synthetic depth rendering that stands in for the detection networks.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::body::BodyPartLabel;
use crate::error::{Error, Result};
use crate::geometry::{point_hull_distance, ProtectiveHull, Vec3};
use crate::perception::{
    project, BodyPointEntry, BodyPointSet, CameraExtrinsics, CameraIntrinsics, DepthFrame, Detection, DetectionStatus,
    Observation, PartGeometry, Pixel, Region,
};
use crate::safety::{ExtractionClass, MethodKind};

use super::human::HumanPose;

/// Vertical capsule standing in for one body part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Capsule {
    pub radius_mm: f64,
    pub half_length_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyModel {
    pub capsules: BTreeMap<BodyPartLabel, Capsule>,
}

impl Default for BodyModel {
    fn default() -> Self {
        use BodyPartLabel::*;
        let c = |radius_mm, half_length_mm| Capsule { radius_mm, half_length_mm };
        Self {
            capsules: BTreeMap::from([
                (Head, c(100.0, 30.0)),
                (Body, c(160.0, 180.0)),
                (LeftUpperArm, c(50.0, 130.0)),
                (RightUpperArm, c(50.0, 130.0)),
                (LeftLowerArm, c(45.0, 140.0)),
                (RightLowerArm, c(45.0, 140.0)),
                (LeftUpperLeg, c(80.0, 180.0)),
                (RightUpperLeg, c(80.0, 180.0)),
                (LeftLowerLeg, c(60.0, 180.0)),
                (RightLowerLeg, c(60.0, 180.0)),
            ]),
        }
    }
}

impl BodyModel {
    pub fn validate(&self) -> Result<()> {
        for label in BodyPartLabel::ALL {
            let c = self.capsules.get(&label).ok_or_else(|| Error::Config(format!("body model has no capsule for {label}")))?;
            if !(c.radius_mm > 0.0 && c.half_length_mm >= 0.0 && c.radius_mm.is_finite() && c.half_length_mm.is_finite()) {
                return Err(Error::Config(format!("capsule for {label} needs radius > 0 and half length >= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraModel {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
}

/// Prediction error and dropout emulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Per-axis standard deviation in world coordinates.
    pub sigma_mm: Vec3,
    /// Offsets are clamped to this many standard deviations.
    pub clip_sigma: Option<f64>,
    pub failure_rate: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self { sigma_mm: Vec3::zeros(), clip_sigma: None, failure_rate: 0.0 }
    }

    pub fn offset<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        let mut out = Vec3::zeros();
        for axis in 0..3 {
            let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
            let z = match self.clip_sigma {
                Some(k) => z.clamp(-k, k),
                None => z,
            };
            out[axis] = z * self.sigma_mm[axis];
        }
        out
    }

    fn draws<R: Rng + ?Sized>(&self, class: ExtractionClass, rng: &mut R) -> (bool, Vec<Vec3>) {
        let failed = rng.random::<f64>() < self.failure_rate;
        let offsets = match class {
            ExtractionClass::A => vec![self.offset(rng)],
            ExtractionClass::B => (0..BodyPartLabel::ALL.len()).map(|_| self.offset(rng)).collect(),
        };
        (failed, offsets)
    }
}

fn perturbed(pose: &HumanPose, offsets: &[Vec3]) -> HumanPose {
    match offsets {
        [common] => pose.translated(*common),
        per_part => {
            let mut parts = pose.parts;
            for (p, o) in parts.iter_mut().zip(per_part) {
                *p += o;
            }
            HumanPose { parts }
        }
    }
}

fn sphere_hit(rd: &Vec3, center: &Vec3, r: f64) -> Option<f64> {
    let b = -rd.dot(center);
    let c = center.norm_squared() - r * r;
    let h = b * b - c;
    (h >= 0.0).then(|| -b - h.sqrt()).filter(|t| *t > 0.0)
}

/// First hit of a ray from the camera centre along unit `rd` with the
/// capsule spanning `pa..pb`.
fn capsule_hit(rd: &Vec3, pa: &Vec3, pb: &Vec3, r: f64) -> Option<f64> {
    let ba = pb - pa;
    let oa = -pa;
    let baba = ba.dot(&ba);
    let bard = ba.dot(rd);
    let baoa = ba.dot(&oa);
    let rdoa = rd.dot(&oa);
    let oaoa = oa.dot(&oa);
    let a = baba - bard * bard;
    if a > 1e-9 * baba.max(1.0) {
        let b = baba * rdoa - baoa * bard;
        let c = baba * oaoa - baoa * baoa - r * r * baba;
        let h = b * b - a * c;
        if h < 0.0 {
            return None;
        }
        let t = (-b - h.sqrt()) / a;
        let y = baoa + t * bard;
        if y > 0.0 && y < baba {
            return (t > 0.0).then_some(t);
        }
        let cap = if y <= 0.0 { pa } else { pb };
        return sphere_hit(rd, cap, r);
    }
    match (sphere_hit(rd, pa, r), sphere_hit(rd, pb, r)) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    }
}

/// Depth image plus a per-pixel part label (`None` for background).
pub struct RenderedFrame {
    pub frame: DepthFrame,
    pub labels: Vec<Option<BodyPartLabel>>,
}

impl RenderedFrame {
    pub fn label(&self, px: Pixel) -> Option<BodyPartLabel> {
        self.labels[(px.1 * self.frame.width + px.0) as usize]
    }
}

pub fn render_depth(
    pose: &HumanPose,
    camera: &CameraModel,
    body: &BodyModel,
    background_depth_mm: u16,
    timestamp_s: f64,
) -> RenderedFrame {
    let intr = &camera.intrinsics;
    let (w, h) = (intr.width_px, intr.height_px);
    let mut frame = DepthFrame::new(w, h, timestamp_s);
    frame.depth_mm.fill(background_depth_mm);
    let mut labels = vec![None; (w * h) as usize];
    let mut zbuf = vec![f64::INFINITY; (w * h) as usize];

    for (label, center) in pose.iter() {
        let cap = body.capsules.get(&label).copied().unwrap_or(Capsule { radius_mm: 50.0, half_length_mm: 0.0 });
        let axis = Vec3::z() * cap.half_length_mm;
        let pa = camera.extrinsics.to_camera(&(center - axis));
        let pb = camera.extrinsics.to_camera(&(center + axis));
        let r = cap.radius_mm;
        let near = pa.z.min(pb.z) - r;
        if pa.z.max(pb.z) + r <= 0.0 {
            continue;
        }
        let (mut u0, mut u1, mut v0, mut v1) = (0i64, w as i64 - 1, 0i64, h as i64 - 1);
        if near > 1.0 {
            let (ua, va) = project(&pa, intr).expect("in front of camera");
            let (ub, vb) = project(&pb, intr).expect("in front of camera");
            let ru = r * intr.fx_px / near + 1.0;
            let rv = r * intr.fy_px / near + 1.0;
            u0 = u0.max((ua.min(ub) - ru).floor() as i64);
            u1 = u1.min((ua.max(ub) + ru).ceil() as i64);
            v0 = v0.max((va.min(vb) - rv).floor() as i64);
            v1 = v1.min((va.max(vb) + rv).ceil() as i64);
        }
        for v in v0..=v1 {
            for u in u0..=u1 {
                let dir = Vec3::new((u as f64 - intr.cx_px) / intr.fx_px, (v as f64 - intr.cy_px) / intr.fy_px, 1.0);
                let rd = dir.normalize();
                let Some(t) = capsule_hit(&rd, &pa, &pb, r) else { continue };
                let depth = t * rd.z;
                let idx = (v as u32 * w + u as u32) as usize;
                if depth < zbuf[idx] {
                    zbuf[idx] = depth;
                    labels[idx] = Some(label);
                }
            }
        }
    }
    for (i, z) in zbuf.iter().enumerate() {
        if z.is_finite() {
            frame.depth_mm[i] = z.round().clamp(1.0, u16::MAX as f64) as u16;
        }
    }
    RenderedFrame { frame, labels }
}

fn empty_geometry(method: MethodKind) -> Detection {
    match method {
        MethodKind::BodyRecognition | MethodKind::BodySegmentation => {
            Detection::ClassA { region: Region::Mask { pixels: Vec::new() } }
        }
        MethodKind::PoseEstimation => Detection::ClassB { parts: PartGeometry::Keypoints { keypoints: BTreeMap::new() } },
        MethodKind::BodyPartSegmentation => Detection::ClassB { parts: PartGeometry::PartMasks { masks: BTreeMap::new() } },
    }
}

/// Renders the (optionally perturbed) person and emits the detection
/// geometry the method would report for it.
#[allow(clippy::too_many_arguments)]
pub fn render_synthetic_observation<R: Rng + ?Sized>(
    pose: Option<&HumanPose>,
    camera: &CameraModel,
    body: &BodyModel,
    method: MethodKind,
    noise: &NoiseModel,
    rng: &mut R,
    timestamp_s: f64,
    background_depth_mm: u16,
) -> (DepthFrame, Observation) {
    let (failed, offsets) = noise.draws(method.extraction_class(), rng);
    let Some(pose) = pose else {
        let mut frame = DepthFrame::new(camera.intrinsics.width_px, camera.intrinsics.height_px, timestamp_s);
        frame.depth_mm.fill(background_depth_mm);
        return (frame, Observation { timestamp_s, detection: Detection::NoPerson });
    };
    let seen = perturbed(pose, &offsets);
    let rendered = render_depth(&seen, camera, body, background_depth_mm, timestamp_s);
    let (w, h) = (rendered.frame.width, rendered.frame.height);
    let human: Vec<Pixel> =
        (0..h).flat_map(|v| (0..w).map(move |u| Pixel(u, v))).filter(|px| rendered.label(*px).is_some()).collect();

    let detection = if human.is_empty() {
        Detection::NoPerson
    } else if failed {
        empty_geometry(method)
    } else {
        match method {
            MethodKind::BodyRecognition => {
                let (umin, umax) = human.iter().fold((u32::MAX, 0), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
                let (vmin, vmax) = human.iter().fold((u32::MAX, 0), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
                let (w_px, h_px) = (umax - umin + 1, vmax - vmin + 1);
                Detection::ClassA {
                    region: Region::BoundingBox {
                        x_c_px: umin as f64 + w_px as f64 / 2.0,
                        y_c_px: vmin as f64 + h_px as f64 / 2.0,
                        w_px,
                        h_px,
                    },
                }
            }
            MethodKind::BodySegmentation => Detection::ClassA { region: Region::Mask { pixels: human } },
            MethodKind::PoseEstimation => {
                let keypoints = seen
                    .iter()
                    .filter_map(|(label, p)| {
                        let (u, v) = project(&camera.extrinsics.to_camera(&p), &camera.intrinsics)?;
                        let (u, v) = (u.round(), v.round());
                        camera.intrinsics.in_bounds(u, v).then_some((label, Pixel(u as u32, v as u32)))
                    })
                    .collect();
                Detection::ClassB { parts: PartGeometry::Keypoints { keypoints } }
            }
            MethodKind::BodyPartSegmentation => {
                let mut masks: BTreeMap<BodyPartLabel, Vec<Pixel>> = BTreeMap::new();
                for px in human {
                    if let Some(label) = rendered.label(px) {
                        masks.entry(label).or_default().push(px);
                    }
                }
                Detection::ClassB { parts: PartGeometry::PartMasks { masks } }
            }
        }
    };
    (rendered.frame, Observation { timestamp_s, detection })
}

/// Perception shortcut that skips rendering: part-level methods report the
/// scripted part centres, whole-body methods the part closest to
/// `reference_hull`. Noise and dropouts follow the same draws as the
/// rendered path.
pub fn perceive_direct<R: Rng + ?Sized>(
    pose: Option<&HumanPose>,
    camera: &CameraModel,
    class: ExtractionClass,
    noise: &NoiseModel,
    rng: &mut R,
    reference_hull: &ProtectiveHull,
    timestamp_s: f64,
) -> BodyPointSet {
    let (failed, offsets) = noise.draws(class, rng);
    let Some(pose) = pose else {
        return BodyPointSet::empty(timestamp_s, class, DetectionStatus::NoHuman);
    };
    if failed {
        return BodyPointSet::empty(timestamp_s, class, DetectionStatus::Failed);
    }
    let seen = perturbed(pose, &offsets);
    let entry = |label: Option<BodyPartLabel>, p: Vec3| BodyPointEntry {
        label,
        world_mm: p,
        camera_depth_mm: camera.extrinsics.to_camera(&p).z,
        valid: true,
    };
    let entries = match class {
        ExtractionClass::A => {
            let nearest = seen
                .parts
                .iter()
                .min_by(|a, b| point_hull_distance(a, reference_hull).total_cmp(&point_hull_distance(b, reference_hull)))
                .copied()
                .expect("ten parts");
            vec![entry(None, nearest)]
        }
        ExtractionClass::B => seen.iter().map(|(l, p)| entry(Some(l), p)).collect(),
    };
    BodyPointSet { timestamp_s, class, status: DetectionStatus::Detected, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{extract_body_points, ExtractionSettings, MaskReference};
    use crate::sim::human::standing_pose;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn camera() -> CameraModel {
        CameraModel {
            intrinsics: CameraIntrinsics {
                fx_px: 400.0,
                fy_px: 400.0,
                cx_px: 160.0,
                cy_px: 120.0,
                width_px: 320,
                height_px: 240,
            },
            extrinsics: CameraExtrinsics::look_at(Vec3::new(-500.0, 0.0, 1500.0), Vec3::new(2000.0, 0.0, 1100.0), Vec3::z())
                .unwrap(),
        }
    }

    fn pose() -> HumanPose {
        let map = standing_pose(2000.0, 0.0, std::f64::consts::PI, 0.0, 0.5);
        let mut parts = [Vec3::zeros(); 10];
        for (l, p) in map {
            parts[l.index()] = p;
        }
        HumanPose { parts }
    }

    #[test]
    fn capsule_hit_matches_sphere_for_point_capsule() {
        let rd = Vec3::z();
        let c = Vec3::new(0.0, 0.0, 1000.0);
        let t = capsule_hit(&rd, &c, &c, 100.0).unwrap();
        assert!((t - 900.0).abs() < 1e-9);
        let t = capsule_hit(&rd, &(c - Vec3::x() * 50.0), &(c + Vec3::x() * 50.0), 100.0).unwrap();
        assert!((t - 900.0).abs() < 1e-9);
        assert!(capsule_hit(&rd, &Vec3::new(500.0, 0.0, 1000.0), &Vec3::new(500.0, 10.0, 1000.0), 100.0).is_none());
    }

    #[test]
    fn keypoints_recover_part_positions() {
        let cam = camera();
        let truth = pose();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (frame, obs) = render_synthetic_observation(
            Some(&truth),
            &cam,
            &BodyModel::default(),
            MethodKind::PoseEstimation,
            &NoiseModel::none(),
            &mut rng,
            0.0,
            0,
        );
        let settings = ExtractionSettings { roi_px: (1, 1), ..Default::default() };
        let set = extract_body_points(&frame, &obs, &cam.intrinsics, &cam.extrinsics, &settings).unwrap();
        let body = BodyModel::default();
        let mut visible = 0;
        for e in set.valid_points() {
            let label = e.label.unwrap();
            // the ray through the keypoint pixel hits the capsule surface
            // facing the camera, so only the radius along the ray differs
            let err = (e.world_mm - truth.part(label)).norm();
            let footprint = cam.intrinsics.pixel_footprint_mm(e.camera_depth_mm);
            assert!(err <= body.capsules[&label].radius_mm + 2.0 * footprint, "{label}: {err}");
            visible += 1;
        }
        assert!(visible >= 6);
    }

    #[test]
    fn part_masks_label_every_visible_part() {
        let cam = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (frame, obs) = render_synthetic_observation(
            Some(&pose()),
            &cam,
            &BodyModel::default(),
            MethodKind::BodyPartSegmentation,
            &NoiseModel::none(),
            &mut rng,
            0.0,
            0,
        );
        let settings = ExtractionSettings { mask_reference: MaskReference::WorldOrigin, ..Default::default() };
        let set = extract_body_points(&frame, &obs, &cam.intrinsics, &cam.extrinsics, &settings).unwrap();
        assert_eq!(set.status, DetectionStatus::Detected);
        assert!(set.part(BodyPartLabel::Head).is_some_and(|e| e.valid));
        assert!(set.part(BodyPartLabel::Body).is_some_and(|e| e.valid));
    }

    #[test]
    fn failures_and_absence() {
        let cam = camera();
        let always = NoiseModel { failure_rate: 1.0, ..NoiseModel::none() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for method in MethodKind::ALL {
            let (frame, obs) =
                render_synthetic_observation(Some(&pose()), &cam, &BodyModel::default(), method, &always, &mut rng, 0.0, 0);
            let set =
                extract_body_points(&frame, &obs, &cam.intrinsics, &cam.extrinsics, &ExtractionSettings::default()).unwrap();
            assert_eq!(set.status, DetectionStatus::Failed, "{method}");
        }
        let (_, obs) = render_synthetic_observation(
            None,
            &cam,
            &BodyModel::default(),
            MethodKind::BodyRecognition,
            &NoiseModel::none(),
            &mut rng,
            0.0,
            0,
        );
        assert_eq!(obs.detection, Detection::NoPerson);
    }

    #[test]
    fn direct_class_a_picks_part_nearest_to_hull() {
        let cam = camera();
        let hull = ProtectiveHull::new(Vec3::new(-200.0, -200.0, 0.0), Vec3::new(800.0, 200.0, 1000.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let set = perceive_direct(Some(&pose()), &cam, ExtractionClass::A, &NoiseModel::none(), &mut rng, &hull, 0.0);
        let p = set.entries[0].world_mm;
        let best = pose().parts.iter().map(|q| point_hull_distance(q, &hull)).fold(f64::INFINITY, f64::min);
        assert_eq!(point_hull_distance(&p, &hull), best);
    }

    #[test]
    fn clipped_noise_is_bounded() {
        let noise = NoiseModel { sigma_mm: Vec3::new(10.0, 20.0, 30.0), clip_sigma: Some(2.0), failure_rate: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let o = noise.offset(&mut rng);
            assert!(o.x.abs() <= 20.0 && o.y.abs() <= 40.0 && o.z.abs() <= 60.0);
        }
    }
}
