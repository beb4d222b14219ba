//! Session data model: boards, strokes, sketches, avatars, draw tokens and
//! the per-avatar pie-menu selection machine.

mod sketch;
mod state;

pub use sketch::{
    Color, Primitive, PrimitiveKind, RenderedPrimitive, RenderedSketch, RenderedStroke, Sketch3D,
    SketchTransform, Stroke,
};
pub use state::{
    Avatar, Board, BoardKind, DrawToken, GazeTrack, OpenStroke, Pending, SceneError, Selection,
    SessionState, TelepathyLink, MERGE_DISTANCE_M, MERGE_WINDOW_MS, SCALE_GESTURE_MAX,
    SCALE_GESTURE_MIN, SELECTION_INFLATE_M,
};

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! numeric_id {
    ($name:ident, $prefix:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

numeric_id!(BoardId, "board#");
numeric_id!(SketchId, "sketch#");
numeric_id!(StrokeId, "stroke#");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AvatarId(pub String);

impl AvatarId {
    pub fn new(id: impl Into<String>) -> Self {
        AvatarId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AvatarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<String> for AvatarId {
    fn from(s: String) -> Self {
        AvatarId(s)
    }
}

impl From<&str> for AvatarId {
    fn from(s: &str) -> Self {
        AvatarId(s.to_owned())
    }
}

/// Spatial arrangement of participants and boards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigKind {
    SideBySide,
    Mirrored,
    EyesFree,
}

impl ConfigKind {
    pub const ALL: [ConfigKind; 3] = [ConfigKind::SideBySide, ConfigKind::Mirrored, ConfigKind::EyesFree];

    pub fn as_str(self) -> &'static str {
        match self {
            ConfigKind::SideBySide => "side_by_side",
            ConfigKind::Mirrored => "mirrored",
            ConfigKind::EyesFree => "eyes_free",
        }
    }
}

impl std::str::FromStr for ConfigKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConfigKind::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown configuration `{s}` (expected side_by_side, mirrored or eyes_free)"))
    }
}

impl fmt::Display for ConfigKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TelepathyMode {
    Windowed,
    ImmersiveFirst,
    ImmersiveThird,
}

impl TelepathyMode {
    pub const ALL: [TelepathyMode; 3] =
        [TelepathyMode::Windowed, TelepathyMode::ImmersiveFirst, TelepathyMode::ImmersiveThird];
}

/// The six pie-menu slots, counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationKind {
    Delete,
    MoveAway,
    Copy,
    Scale,
    Rotate,
    Move,
}

impl OperationKind {
    /// Slot order around the menu, counterclockwise from the first slot.
    pub const PIE_ORDER: [OperationKind; 6] = [
        OperationKind::Delete,
        OperationKind::MoveAway,
        OperationKind::Copy,
        OperationKind::Scale,
        OperationKind::Rotate,
        OperationKind::Move,
    ];

    /// Menu slot index, counterclockwise.
    pub fn slot(self) -> usize {
        Self::PIE_ORDER.iter().position(|k| *k == self).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests;
