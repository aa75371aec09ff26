use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::body::BodyPartLabel;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Coexistence,
    Collaboration,
    Cooperation,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Coexistence, Phase::Collaboration, Phase::Cooperation];

    pub fn token(self) -> &'static str {
        match self {
            Phase::Coexistence => "coexistence",
            Phase::Collaboration => "collaboration",
            Phase::Cooperation => "cooperation",
        }
    }
}

/// World positions of all ten parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanPose {
    pub parts: [Vec3; 10],
}

impl HumanPose {
    pub fn part(&self, label: BodyPartLabel) -> Vec3 {
        self.parts[label.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (BodyPartLabel, Vec3)> + '_ {
        BodyPartLabel::ALL.into_iter().map(move |l| (l, self.parts[l.index()]))
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        Self { parts: self.parts.map(|p| p + offset) }
    }

    fn lerp(&self, other: &HumanPose, w: f64) -> Self {
        let mut parts = self.parts;
        for (p, q) in parts.iter_mut().zip(other.parts.iter()) {
            *p += (q - *p) * w;
        }
        Self { parts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanKeyframe {
    pub t_s: f64,
    pub parts_mm: BTreeMap<BodyPartLabel, Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpan {
    pub start_s: f64,
    pub end_s: f64,
    pub phase: Phase,
}

/// Piecewise-linear motion of one person. An empty keyframe list means
/// nobody enters the cell; poses hold at the first and last keyframe
/// outside the scripted interval.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanMotionScript {
    pub keyframes: Vec<HumanKeyframe>,
    #[serde(default)]
    pub phases: Vec<PhaseSpan>,
}

impl HumanMotionScript {
    pub fn absent() -> Self {
        Self::default()
    }

    pub fn is_absent(&self) -> bool {
        self.keyframes.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, kf) in self.keyframes.iter().enumerate() {
            if !kf.t_s.is_finite() {
                return Err(Error::Config(format!("human.keyframes[{i}].t_s is not finite")));
            }
            if let Some(missing) = BodyPartLabel::ALL.into_iter().find(|l| !kf.parts_mm.contains_key(l)) {
                return Err(Error::Config(format!("human.keyframes[{i}] is missing body part {missing}")));
            }
            if kf.parts_mm.values().any(|p| p.iter().any(|c| !c.is_finite())) {
                return Err(Error::Config(format!("human.keyframes[{i}] has a non-finite position")));
            }
        }
        for (i, w) in self.keyframes.windows(2).enumerate() {
            if w[1].t_s <= w[0].t_s {
                return Err(Error::Config(format!(
                    "human.keyframes[{}].t_s must be greater than the previous keyframe ({} <= {})",
                    i + 1,
                    w[1].t_s,
                    w[0].t_s
                )));
            }
        }
        for (i, span) in self.phases.iter().enumerate() {
            if !(span.start_s.is_finite() && span.end_s.is_finite() && span.start_s < span.end_s) {
                return Err(Error::Config(format!("human.phases[{i}] must satisfy start_s < end_s")));
            }
        }
        Ok(())
    }

    fn keyframe_pose(kf: &HumanKeyframe) -> HumanPose {
        let mut parts = [Vec3::zeros(); 10];
        for (label, p) in &kf.parts_mm {
            parts[label.index()] = *p;
        }
        HumanPose { parts }
    }

    pub fn pose_at(&self, t_s: f64) -> Option<HumanPose> {
        let kfs = &self.keyframes;
        let first = kfs.first()?;
        if t_s <= first.t_s {
            return Some(Self::keyframe_pose(first));
        }
        let last = kfs.last()?;
        if t_s >= last.t_s {
            return Some(Self::keyframe_pose(last));
        }
        let i = kfs.partition_point(|k| k.t_s <= t_s);
        let (a, b) = (&kfs[i - 1], &kfs[i]);
        let w = (t_s - a.t_s) / (b.t_s - a.t_s);
        Some(Self::keyframe_pose(a).lerp(&Self::keyframe_pose(b), w))
    }

    /// First span containing `t_s`, if any.
    pub fn phase_at(&self, t_s: f64) -> Option<Phase> {
        self.phases.iter().find(|s| s.start_s <= t_s && t_s < s.end_s).map(|s| s.phase)
    }
}

/// A standing person at floor position `(x, y)` facing `heading_rad`,
/// with both arms blended from hanging (`reach = 0`) to stretched forward
/// (`reach = 1`).
pub fn standing_pose(x_mm: f64, y_mm: f64, heading_rad: f64, floor_z_mm: f64, reach: f64) -> BTreeMap<BodyPartLabel, Vec3> {
    use BodyPartLabel::*;
    let r = reach.clamp(0.0, 1.0);
    let fwd = Vec3::new(heading_rad.cos(), heading_rad.sin(), 0.0);
    let left = Vec3::new(-heading_rad.sin(), heading_rad.cos(), 0.0);
    let at = |f: f64, l: f64, h: f64| Vec3::new(x_mm, y_mm, floor_z_mm) + fwd * f + left * l + Vec3::z() * h;
    let mix = |a: f64, b: f64| a + (b - a) * r;
    BTreeMap::from([
        (Head, at(mix(0.0, 60.0), 0.0, mix(1650.0, 1620.0))),
        (Body, at(mix(0.0, 30.0), 0.0, 1300.0)),
        (LeftUpperArm, at(mix(0.0, 180.0), 200.0, mix(1200.0, 1300.0))),
        (RightUpperArm, at(mix(0.0, 180.0), -200.0, mix(1200.0, 1300.0))),
        (LeftLowerArm, at(mix(0.0, 480.0), mix(220.0, 170.0), mix(900.0, 1250.0))),
        (RightLowerArm, at(mix(0.0, 480.0), mix(-220.0, -170.0), mix(900.0, 1250.0))),
        (LeftUpperLeg, at(0.0, 100.0, 650.0)),
        (RightUpperLeg, at(0.0, -100.0, 650.0)),
        (LeftLowerLeg, at(0.0, 100.0, 250.0)),
        (RightLowerLeg, at(0.0, -100.0, 250.0)),
    ])
}
