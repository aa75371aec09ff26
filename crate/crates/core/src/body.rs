use std::fmt;

use serde::{Deserialize, Serialize};

/// Body parts distinguished by part-level localization.
///
/// Serialized names are the short tokens used in trace files and
/// scenario documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BodyPartLabel {
    #[serde(rename = "head")]
    Head,
    #[serde(rename = "body")]
    Body,
    #[serde(rename = "l_upper_arm")]
    LeftUpperArm,
    #[serde(rename = "r_upper_arm")]
    RightUpperArm,
    #[serde(rename = "l_lower_arm")]
    LeftLowerArm,
    #[serde(rename = "r_lower_arm")]
    RightLowerArm,
    #[serde(rename = "l_upper_leg")]
    LeftUpperLeg,
    #[serde(rename = "r_upper_leg")]
    RightUpperLeg,
    #[serde(rename = "l_lower_leg")]
    LeftLowerLeg,
    #[serde(rename = "r_lower_leg")]
    RightLowerLeg,
}

impl BodyPartLabel {
    pub const ALL: [BodyPartLabel; 10] = [
        BodyPartLabel::Head,
        BodyPartLabel::Body,
        BodyPartLabel::LeftUpperArm,
        BodyPartLabel::RightUpperArm,
        BodyPartLabel::LeftLowerArm,
        BodyPartLabel::RightLowerArm,
        BodyPartLabel::LeftUpperLeg,
        BodyPartLabel::RightUpperLeg,
        BodyPartLabel::LeftLowerLeg,
        BodyPartLabel::RightLowerLeg,
    ];

    /// Token used in trace CSV files and config documents.
    pub fn token(self) -> &'static str {
        match self {
            BodyPartLabel::Head => "head",
            BodyPartLabel::Body => "body",
            BodyPartLabel::LeftUpperArm => "l_upper_arm",
            BodyPartLabel::RightUpperArm => "r_upper_arm",
            BodyPartLabel::LeftLowerArm => "l_lower_arm",
            BodyPartLabel::RightLowerArm => "r_lower_arm",
            BodyPartLabel::LeftUpperLeg => "l_upper_leg",
            BodyPartLabel::RightUpperLeg => "r_upper_leg",
            BodyPartLabel::LeftLowerLeg => "l_lower_leg",
            BodyPartLabel::RightLowerLeg => "r_lower_leg",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.token() == token)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BodyPartLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}
