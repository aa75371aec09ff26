//! Serial-manipulator forward kinematics and the axis-aligned protective hull.
//!
//! All lengths are millimetres, all angles radians. The robot base frame is the
//! world frame.

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// One row of a Denavit-Hartenberg table (standard convention, revolute joint).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhJoint {
    pub a_mm: f64,
    pub alpha_rad: f64,
    pub d_mm: f64,
    #[serde(default)]
    pub theta0_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DhParameterTable {
    pub joints: Vec<DhJoint>,
    /// TCP offset expressed in the last joint frame.
    #[serde(default = "zero_vec")]
    pub tool_offset_mm: Vec3,
}

fn zero_vec() -> Vec3 {
    Vec3::zeros()
}

impl DhParameterTable {
    pub fn new(joints: Vec<DhJoint>, tool_offset_mm: Vec3) -> Result<Self> {
        let table = Self { joints, tool_offset_mm };
        table.validate()?;
        Ok(table)
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::Config("DH table needs at least one joint".into()));
        }
        for (i, j) in self.joints.iter().enumerate() {
            if ![j.a_mm, j.alpha_rad, j.d_mm, j.theta0_rad].iter().all(|v| v.is_finite()) {
                return Err(Error::Config(format!("DH joint {} has a non-finite entry", i + 1)));
            }
        }
        if !self.tool_offset_mm.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("tool offset is not finite".into()));
        }
        Ok(())
    }

    /// A 7-axis table with the link dimensions of a common 820 mm-reach
    /// lightweight arm. Fixture data only; not a manufacturer calibration.
    pub fn example_7dof() -> Self {
        use std::f64::consts::FRAC_PI_2;
        let row = |d_mm: f64, alpha_rad: f64| DhJoint { a_mm: 0.0, alpha_rad, d_mm, theta0_rad: 0.0 };
        Self {
            joints: vec![
                row(360.0, -FRAC_PI_2),
                row(0.0, FRAC_PI_2),
                row(420.0, FRAC_PI_2),
                row(0.0, -FRAC_PI_2),
                row(400.0, -FRAC_PI_2),
                row(0.0, FRAC_PI_2),
                row(126.0, 0.0),
            ],
            tool_offset_mm: Vec3::new(0.0, 0.0, 150.0),
        }
    }
}

/// Joint angles with optional velocities and accelerations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointConfiguration {
    pub angles_rad: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocities_rad_s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accelerations_rad_s2: Option<Vec<f64>>,
}

impl JointConfiguration {
    pub fn new(angles_rad: Vec<f64>) -> Self {
        Self { angles_rad, velocities_rad_s: None, accelerations_rad_s2: None }
    }

    pub fn len(&self) -> usize {
        self.angles_rad.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_rad.is_empty()
    }
}

impl From<Vec<f64>> for JointConfiguration {
    fn from(angles_rad: Vec<f64>) -> Self {
        Self::new(angles_rad)
    }
}

/// Frame origins along the chain: base, every joint frame, then the TCP
/// when the tool offset is non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPoses {
    pub positions: Vec<Vec3>,
}

impl LinkPoses {
    pub fn tcp(&self) -> Vec3 {
        *self.positions.last().expect("link poses are never empty")
    }
}

fn dh_transform(joint: &DhJoint, q: f64) -> Isometry3<f64> {
    let theta = q + joint.theta0_rad;
    let rot_z = Isometry3::from_parts(
        Translation3::new(0.0, 0.0, joint.d_mm),
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta),
    );
    let rot_x = Isometry3::from_parts(
        Translation3::new(joint.a_mm, 0.0, 0.0),
        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), joint.alpha_rad),
    );
    rot_z * rot_x
}

pub fn forward_kinematics(dh: &DhParameterTable, q: &JointConfiguration) -> Result<LinkPoses> {
    forward_kinematics_angles(dh, &q.angles_rad)
}

/// Same as [`forward_kinematics`] on a bare angle slice.
pub fn forward_kinematics_angles(dh: &DhParameterTable, q: &[f64]) -> Result<LinkPoses> {
    if q.len() != dh.dof() {
        return Err(Error::Config(format!("joint configuration has {} angles, DH table has {} joints", q.len(), dh.dof())));
    }
    if let Some(i) = q.iter().position(|v| !v.is_finite()) {
        return Err(Error::Argument(format!("joint angle {} is not finite", i + 1)));
    }
    let mut positions = Vec::with_capacity(dh.dof() + 2);
    positions.push(Vec3::zeros());
    let mut pose = Isometry3::identity();
    for (joint, &angle) in dh.joints.iter().zip(q) {
        pose *= dh_transform(joint, angle);
        positions.push(pose.translation.vector);
    }
    if dh.tool_offset_mm != Vec3::zeros() {
        positions.push(pose.transform_point(&dh.tool_offset_mm.into()).coords);
    }
    Ok(LinkPoses { positions })
}

/// Axis-aligned cuboid enclosing the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtectiveHull {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Padding that was applied on each axis when the hull was built.
    #[serde(default = "zero_vec")]
    pub padding: Vec3,
}

impl ProtectiveHull {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { x_min: min.x, x_max: max.x, y_min: min.y, y_max: max.y, z_min: min.z, z_max: max.z, padding: Vec3::zeros() }
    }

    pub fn min(&self) -> Vec3 {
        Vec3::new(self.x_min, self.y_min, self.z_min)
    }

    pub fn max(&self) -> Vec3 {
        Vec3::new(self.x_max, self.y_max, self.z_max)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (self.x_min..=self.x_max).contains(&p.x)
            && (self.y_min..=self.y_max).contains(&p.y)
            && (self.z_min..=self.z_max).contains(&p.z)
    }

    /// Smallest box containing both hulls.
    pub fn union(&self, other: &ProtectiveHull) -> ProtectiveHull {
        ProtectiveHull {
            x_min: self.x_min.min(other.x_min),
            x_max: self.x_max.max(other.x_max),
            y_min: self.y_min.min(other.y_min),
            y_max: self.y_max.max(other.y_max),
            z_min: self.z_min.min(other.z_min),
            z_max: self.z_max.max(other.z_max),
            padding: self.padding.sup(&other.padding),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.x_min <= self.x_max && self.y_min <= self.y_max && self.z_min <= self.z_max
    }
}

fn check_non_negative(v: &Vec3, what: &str) -> Result<()> {
    if v.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::Argument(format!("{what} must be finite and >= 0 per axis, got {v:?}")));
    }
    Ok(())
}

pub fn compute_protective_hull(links: &LinkPoses, padding: Vec3) -> Result<ProtectiveHull> {
    check_non_negative(&padding, "hull padding")?;
    let (first, rest) =
        links.positions.split_first().ok_or_else(|| Error::Argument("cannot build a hull from zero link positions".into()))?;
    let (lo, hi) = rest.iter().fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    let mut hull = ProtectiveHull::new(lo - padding, hi + padding);
    hull.padding = padding;
    Ok(hull)
}

/// Euclidean distance from `p` to the closed box; zero inside or on the boundary.
pub fn point_hull_distance(p: &Vec3, hull: &ProtectiveHull) -> f64 {
    let axis = |v: f64, lo: f64, hi: f64| (lo - v).max(0.0).max(v - hi);
    let dx = axis(p.x, hull.x_min, hull.x_max);
    let dy = axis(p.y, hull.y_min, hull.y_max);
    let dz = axis(p.z, hull.z_min, hull.z_max);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Moves every face outward by `zd + zr` on its axis.
pub fn inflate_hull(hull: &ProtectiveHull, zd: Vec3, zr: Vec3) -> Result<ProtectiveHull> {
    check_non_negative(&zd, "position uncertainty Z_d")?;
    check_non_negative(&zr, "robot uncertainty Z_r")?;
    let grow = zd + zr;
    Ok(ProtectiveHull {
        x_min: hull.x_min - grow.x,
        x_max: hull.x_max + grow.x,
        y_min: hull.y_min - grow.y,
        y_max: hull.y_max + grow.y,
        z_min: hull.z_min - grow.z,
        z_max: hull.z_max + grow.z,
        padding: hull.padding,
    })
}

/// Convenience: FK followed by hull construction.
pub fn hull_for_configuration(dh: &DhParameterTable, q: &[f64], padding: Vec3) -> Result<ProtectiveHull> {
    compute_protective_hull(&forward_kinematics_angles(dh, q)?, padding)
}
