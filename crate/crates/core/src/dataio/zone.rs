use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of gaze zones the classifier distinguishes.
pub const NUM_ZONES: usize = 7;

/// Driver gaze zone. The discriminant is the stable code used in manifests,
/// class indices and confusion matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum GazeZone {
    EyesClosedOrLap = 0,
    Forward = 1,
    LeftMirror = 2,
    Speedometer = 3,
    Radio = 4,
    Rearview = 5,
    RightMirror = 6,
}

impl GazeZone {
    pub const ALL: [GazeZone; NUM_ZONES] = [
        GazeZone::EyesClosedOrLap,
        GazeZone::Forward,
        GazeZone::LeftMirror,
        GazeZone::Speedometer,
        GazeZone::Radio,
        GazeZone::Rearview,
        GazeZone::RightMirror,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: i64) -> Result<Self> {
        usize::try_from(code)
            .ok()
            .and_then(|c| Self::ALL.get(c).copied())
            .ok_or(Error::UnknownZoneCode(code))
    }

    pub fn name(self) -> &'static str {
        match self {
            GazeZone::EyesClosedOrLap => "eyes_closed_or_lap",
            GazeZone::Forward => "forward",
            GazeZone::LeftMirror => "left_mirror",
            GazeZone::Speedometer => "speedometer",
            GazeZone::Radio => "radio",
            GazeZone::Rearview => "rearview",
            GazeZone::RightMirror => "right_mirror",
        }
    }
}

impl fmt::Display for GazeZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lighting {
    Day,
    Night,
}

impl Lighting {
    pub fn as_str(self) -> &'static str {
        match self {
            Lighting::Day => "day",
            Lighting::Night => "night",
        }
    }
}

impl FromStr for Lighting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "day" => Ok(Lighting::Day),
            "night" => Ok(Lighting::Night),
            other => Err(format!("unknown lighting {other:?} (expected day|night)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eyewear {
    WithGlasses,
    WithoutGlasses,
}

impl Eyewear {
    /// Manifest code: `wg` / `ng`.
    pub fn code(self) -> &'static str {
        match self {
            Eyewear::WithGlasses => "wg",
            Eyewear::WithoutGlasses => "ng",
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            Eyewear::WithGlasses => Domain::Y,
            Eyewear::WithoutGlasses => Domain::X,
        }
    }
}

impl FromStr for Eyewear {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "wg" => Ok(Eyewear::WithGlasses),
            "ng" => Ok(Eyewear::WithoutGlasses),
            other => Err(format!("unknown eyewear code {other:?} (expected wg|ng)")),
        }
    }
}

/// Translation domain: `X` holds eye crops without glasses, `Y` with glasses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    X,
    Y,
}

/// One of the four stored capture conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CaptureCondition {
    pub lighting: Lighting,
    pub eyewear: Eyewear,
}

impl CaptureCondition {
    pub const ALL: [CaptureCondition; 4] = [
        CaptureCondition { lighting: Lighting::Day, eyewear: Eyewear::WithoutGlasses },
        CaptureCondition { lighting: Lighting::Night, eyewear: Eyewear::WithoutGlasses },
        CaptureCondition { lighting: Lighting::Day, eyewear: Eyewear::WithGlasses },
        CaptureCondition { lighting: Lighting::Night, eyewear: Eyewear::WithGlasses },
    ];

    pub fn new(lighting: Lighting, eyewear: Eyewear) -> Self {
        Self { lighting, eyewear }
    }

    pub fn label(self) -> String {
        format!("{}_{}", self.lighting.as_str(), self.eyewear.code())
    }
}

impl fmt::Display for CaptureCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The nine training/validation condition sets of the capture-condition grid:
/// the four stored conditions followed by five derived unions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConditionSet {
    DayNoGlasses,
    NightNoGlasses,
    DayGlasses,
    NightGlasses,
    NoGlasses,
    Glasses,
    Day,
    Night,
    All,
}

impl ConditionSet {
    pub const ALL: [ConditionSet; 9] = [
        ConditionSet::DayNoGlasses,
        ConditionSet::NightNoGlasses,
        ConditionSet::DayGlasses,
        ConditionSet::NightGlasses,
        ConditionSet::NoGlasses,
        ConditionSet::Glasses,
        ConditionSet::Day,
        ConditionSet::Night,
        ConditionSet::All,
    ];

    pub fn contains(self, c: CaptureCondition) -> bool {
        use Eyewear::*;
        use Lighting::*;
        match self {
            ConditionSet::DayNoGlasses => c == CaptureCondition::new(Day, WithoutGlasses),
            ConditionSet::NightNoGlasses => c == CaptureCondition::new(Night, WithoutGlasses),
            ConditionSet::DayGlasses => c == CaptureCondition::new(Day, WithGlasses),
            ConditionSet::NightGlasses => c == CaptureCondition::new(Night, WithGlasses),
            ConditionSet::NoGlasses => c.eyewear == WithoutGlasses,
            ConditionSet::Glasses => c.eyewear == WithGlasses,
            ConditionSet::Day => c.lighting == Day,
            ConditionSet::Night => c.lighting == Night,
            ConditionSet::All => true,
        }
    }

    /// Row/column label: a letter `a`-`i` and a short description.
    pub fn label(self) -> &'static str {
        match self {
            ConditionSet::DayNoGlasses => "a:day_ng",
            ConditionSet::NightNoGlasses => "b:night_ng",
            ConditionSet::DayGlasses => "c:day_wg",
            ConditionSet::NightGlasses => "d:night_wg",
            ConditionSet::NoGlasses => "e:ng",
            ConditionSet::Glasses => "f:wg",
            ConditionSet::Day => "g:day",
            ConditionSet::Night => "h:night",
            ConditionSet::All => "i:all",
        }
    }
}
