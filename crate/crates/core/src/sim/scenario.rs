//! Scenario files: who joins, and what each participant does on which tick.

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Vec3};
use crate::scene::{AvatarId, BoardId, ConfigKind, OperationKind, Primitive, TelepathyMode};

fn default_boards() -> u32 {
    1
}
fn default_tick_ms() -> u64 {
    50
}
fn default_delay() -> u64 {
    1
}
fn default_check_every() -> u64 {
    10
}
fn default_chunk() -> usize {
    4
}
fn default_steps() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Drives link jitter; scripted actions are fixed by the file.
    #[serde(default)]
    pub seed: u64,
    /// Ticks during which scripts run; the harness then drains to quiescence.
    pub duration_ticks: u64,
    #[serde(default = "default_boards")]
    pub boards: u32,
    #[serde(default = "default_config")]
    pub config: ConfigKind,
    #[serde(default = "default_tick_ms")]
    pub tick_ms: u64,
    /// One-way latency of every link, in ticks.
    #[serde(default = "default_delay")]
    pub link_delay_ticks: u64,
    /// Extra random per-message latency, `0..=jitter_ticks`. Links stay FIFO.
    #[serde(default)]
    pub jitter_ticks: u64,
    /// Spacing of the replica-versus-relay and composition checks.
    #[serde(default = "default_check_every")]
    pub check_every_ticks: u64,
    pub clients: Vec<ClientScript>,
}

fn default_config() -> ConfigKind {
    ConfigKind::SideBySide
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientScript {
    pub id: AvatarId,
    #[serde(default)]
    pub name: Option<String>,
    pub actions: Vec<TimedAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedAction {
    pub at: u64,
    #[serde(flatten)]
    pub action: Action,
}

/// Scripted behaviour. Board coordinates `u`, `v` are normalized
/// (`[-0.5, 0.5]`, right and up); stroke points are board-local meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "do", rename_all = "snake_case", deny_unknown_fields)]
#[allow(clippy::large_enum_variant)]
pub enum Action {
    Join,
    /// Says Goodbye and closes.
    Leave,
    /// Drops the link. A silent client just stops talking and is left for
    /// the relay to evict.
    Disconnect {
        #[serde(default)]
        silent: bool,
    },
    SetPose {
        #[serde(default)]
        head: Option<Pose>,
        #[serde(default)]
        left_hand: Option<Pose>,
        #[serde(default)]
        right_hand: Option<Pose>,
    },
    /// Translates head and hands together.
    Walk { by: Vec3 },
    /// Turns the head toward a point on a board.
    Look { board: BoardId, u: f64, v: f64 },
    RequestToken { board: BoardId },
    ReleaseToken { board: BoardId },
    Draw {
        board: BoardId,
        points: Vec<Vec3>,
        #[serde(default = "default_chunk")]
        points_per_message: usize,
    },
    /// Points at a board location and selects whatever is hit.
    Select { board: BoardId, u: f64, v: f64 },
    Deselect,
    /// Opens `op` on the current selection and drags the right hand from
    /// `from` to `to` (offsets from the sketch center) in `steps`, then
    /// commits. Delete only chooses.
    Operate {
        op: OperationKind,
        from: Vec3,
        to: Vec3,
        #[serde(default = "default_steps")]
        steps: u32,
    },
    Spawn { board: BoardId, primitive: Primitive },
    SwitchConfig { config: ConfigKind },
    Telepathy {
        #[serde(default)]
        observee: Option<AvatarId>,
        mode: TelepathyMode,
    },
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Number of scripted actions across all clients.
    pub fn action_count(&self) -> usize {
        self.clients.iter().map(|c| c.actions.len()).sum()
    }
}
