use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geometry::{finite_f64, Pose, Ray, Vec3};
use crate::scene::{
    AvatarId, BoardId, Color, ConfigKind, OperationKind, Primitive, SessionState, StrokeId, TelepathyMode,
};

/// One protocol unit. On the wire this is a single JSON object
/// `{"kind", "payload", "sender", "seq", "ts"}`; `payload` is omitted for
/// kinds without one.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    /// Relay-assigned position in the total order; 0 until sequenced.
    pub seq: u64,
    /// Relay-assigned session time in milliseconds; 0 until sequenced.
    pub ts: u64,
    pub sender: AvatarId,
    pub body: Body,
}

impl Message {
    pub fn new(sender: impl Into<AvatarId>, body: Body) -> Message {
        Message { seq: 0, ts: 0, sender: sender.into(), body }
    }

    pub fn kind(&self) -> &'static str {
        self.body.kind()
    }

    pub(crate) fn to_value(&self) -> Result<Value, serde_json::Error> {
        let mut value = serde_json::to_value(&self.body)?;
        let map = value.as_object_mut().expect("adjacently tagged enums serialize to objects");
        map.insert("seq".into(), self.seq.into());
        map.insert("ts".into(), self.ts.into());
        map.insert("sender".into(), Value::String(self.sender.0.clone()));
        Ok(value)
    }
}

/// Message kinds and their payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", deny_unknown_fields)]
pub enum Body {
    /// First message on a connection; `sender` is the requested avatar id.
    Hello { name: String },
    /// Reply to an accepted `Hello`, carrying the state as of its `seq`.
    Welcome { snapshot: SessionState },
    /// Reply to a refused `Hello`; the relay closes the connection after it.
    Reject { reason: String },
    /// An input was refused; `at_seq` is the last sequenced event at the
    /// time. Sent only to the originator, never sequenced.
    Nack { at_seq: u64, refused: String, reason: String },
    /// An avatar left (sequenced by the relay on disconnect or eviction).
    Goodbye,
    AvatarUpdate { head: Pose, left_hand: Pose, right_hand: Pose },
    /// `stroke` is filled in by the relay with the id the stroke receives.
    StrokeBegin {
        board: BoardId,
        color: Color,
        #[serde(serialize_with = "finite_f64")]
        width: f64,
        stroke: Option<StrokeId>,
    },
    /// `stroke: None` addresses the sender's open stroke; the relay always
    /// sequences the resolved id.
    StrokePoints { stroke: Option<StrokeId>, points: Vec<Vec3> },
    StrokeEnd { stroke: Option<StrokeId> },
    SketchOp(SketchOp),
    DrawRequest { board: BoardId },
    /// Issued by the relay only.
    DrawGrant { board: BoardId, holder: AvatarId },
    DrawRelease { board: BoardId },
    ConfigSwitch { config: ConfigKind },
    TelepathySet { observee: Option<AvatarId>, mode: TelepathyMode },
    Snapshot { state: SessionState },
    Heartbeat,
}

/// Pie-menu traffic for one avatar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum SketchOp {
    Select { ray: Ray },
    Deselect,
    Choose { slot: OperationKind },
    Update { hand: Pose },
    Commit,
    /// Places a parametric solid as a new sketch (needs the draw token).
    SpawnPrimitive { board: BoardId, primitive: Primitive },
}

impl Body {
    pub const KINDS: [&'static str; 17] = [
        "Hello",
        "Welcome",
        "Reject",
        "Nack",
        "Goodbye",
        "AvatarUpdate",
        "StrokeBegin",
        "StrokePoints",
        "StrokeEnd",
        "SketchOp",
        "DrawRequest",
        "DrawGrant",
        "DrawRelease",
        "ConfigSwitch",
        "TelepathySet",
        "Snapshot",
        "Heartbeat",
    ];

    pub fn kind(&self) -> &'static str {
        match self {
            Body::Hello { .. } => "Hello",
            Body::Welcome { .. } => "Welcome",
            Body::Reject { .. } => "Reject",
            Body::Nack { .. } => "Nack",
            Body::Goodbye => "Goodbye",
            Body::AvatarUpdate { .. } => "AvatarUpdate",
            Body::StrokeBegin { .. } => "StrokeBegin",
            Body::StrokePoints { .. } => "StrokePoints",
            Body::StrokeEnd { .. } => "StrokeEnd",
            Body::SketchOp(_) => "SketchOp",
            Body::DrawRequest { .. } => "DrawRequest",
            Body::DrawGrant { .. } => "DrawGrant",
            Body::DrawRelease { .. } => "DrawRelease",
            Body::ConfigSwitch { .. } => "ConfigSwitch",
            Body::TelepathySet { .. } => "TelepathySet",
            Body::Snapshot { .. } => "Snapshot",
            Body::Heartbeat => "Heartbeat",
        }
    }
}
