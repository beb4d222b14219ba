use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    AvatarId, BoardId, Color, ConfigKind, OperationKind, Primitive, Sketch3D, SketchId,
    SketchTransform, Stroke, StrokeId, TelepathyMode,
};
use crate::canonical;
use crate::geometry::{aabb_gap, finite_f64, ray_aabb, Frame, Pose, Ray, Vec3};
use crate::view::gaze;

/// Strokes started within this window of a sketch's last stroke may join it.
pub const MERGE_WINDOW_MS: u64 = 1_000;
/// ... provided their bounds come within this distance of the sketch's.
pub const MERGE_DISTANCE_M: f64 = 0.10;
/// Pick boxes are grown by this much on every side.
pub const SELECTION_INFLATE_M: f64 = 0.01;
pub const SCALE_GESTURE_MIN: f64 = 0.01;
pub const SCALE_GESTURE_MAX: f64 = 100.0;
const SCALE_TOTAL_MIN: f64 = 1e-6;
const SCALE_TOTAL_MAX: f64 = 1e6;

// Room layout, meters.
const VERTICAL_BOARD_SIZE: (f64, f64) = (2.0, 1.5);
const BOARD_CENTER_HEIGHT: f64 = 1.5;
const ROW_DISTANCE: f64 = 1.5;
const SEAT_SPACING: f64 = 0.8;
const SEATS_PER_ROW: u32 = 4;
const HEAD_HEIGHT: f64 = 1.6;
const DESK_HEIGHT: f64 = 1.0;
const DESK_REACH: f64 = 0.45;
const DESK_SIZE: (f64, f64) = (0.6, 0.45);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SceneError {
    #[error("unknown avatar `{0}`")]
    UnknownAvatar(AvatarId),
    #[error("avatar `{0}` already present")]
    DuplicateAvatar(AvatarId),
    #[error("unknown board {0}")]
    UnknownBoard(BoardId),
    #[error("board {0} does not accept drawing")]
    NotDrawable(BoardId),
    #[error("unknown stroke {0}")]
    UnknownStroke(StrokeId),
    #[error("unknown sketch {0}")]
    UnknownSketch(SketchId),
    #[error("`{avatar}` does not hold the draw token for {board}")]
    NoDrawLock { avatar: AvatarId, board: BoardId },
    #[error("`{0}` already has an open stroke")]
    StrokeAlreadyOpen(AvatarId),
    #[error("`{0}` has no open stroke")]
    NoOpenStroke(AvatarId),
    #[error("stroke {0} is closed")]
    StrokeClosed(StrokeId),
    #[error("stroke {stroke} belongs to `{author}`")]
    AuthorMismatch { stroke: StrokeId, author: AvatarId },
    #[error("stroke {0} has no points")]
    EmptyStroke(StrokeId),
    #[error("sketch {0} has no content")]
    EmptySketch(SketchId),
    #[error("invalid content: {0}")]
    InvalidContent(String),
    #[error("`{0}` already holds or awaits the token for {1}")]
    AlreadyQueued(AvatarId, BoardId),
    #[error("`{0}` does not hold the token for {1}")]
    NotHolder(AvatarId, BoardId),
    #[error("token for {board} cannot go to `{avatar}`")]
    GrantOutOfOrder { board: BoardId, avatar: AvatarId },
    #[error("`{0}` has no sketch selected")]
    NotSelected(AvatarId),
    #[error("`{0}` has no operation in progress")]
    NotActive(AvatarId),
    #[error("`{0}` must finish the current operation first")]
    OperationInProgress(AvatarId),
    #[error("an avatar cannot observe itself")]
    SelfObservation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Avatar {
    pub id: AvatarId,
    pub name: String,
    pub head: Pose,
    pub left_hand: Pose,
    pub right_hand: Pose,
    /// Join order; decides the spawn seat.
    pub slot: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BoardKind {
    VerticalShared,
    /// A private desk surface showing a flattened copy of `duplicates`.
    HorizontalPrivate { owner: AvatarId, duplicates: BoardId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Board {
    pub id: BoardId,
    pub pose: Pose,
    #[serde(serialize_with = "finite_f64")]
    pub width: f64,
    #[serde(serialize_with = "finite_f64")]
    pub height: f64,
    pub kind: BoardKind,
    pub sketches: Vec<Sketch3D>,
}

impl Board {
    pub fn is_vertical(&self) -> bool {
        matches!(self.kind, BoardKind::VerticalShared)
    }

    pub fn owner(&self) -> Option<&AvatarId> {
        match &self.kind {
            BoardKind::HorizontalPrivate { owner, .. } => Some(owner),
            BoardKind::VerticalShared => None,
        }
    }

    pub fn plane(&self) -> crate::geometry::Plane {
        crate::geometry::Plane::from_pose(&self.pose)
    }

    /// Normalized board coordinates (u right, v up, each in [-0.5, 0.5]) of
    /// a world point, ignoring depth.
    pub fn normalized_coords(&self, world: Vec3) -> (f64, f64) {
        let local = self.pose.to_local_point(world);
        (local.x / self.width, local.y / self.height)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawToken {
    pub holder: Option<AvatarId>,
    pub queue: VecDeque<AvatarId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenStroke {
    pub author: AvatarId,
    pub board: BoardId,
    pub stroke: Stroke,
    pub started_ms: u64,
}

/// Gesture result not yet committed. Translation is in world space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pending {
    pub translation: Vec3,
    #[serde(serialize_with = "finite_f64")]
    pub rotation: f64,
    #[serde(serialize_with = "finite_f64")]
    pub scale: f64,
}

impl Default for Pending {
    fn default() -> Self {
        Pending { translation: Vec3::ZERO, rotation: 0.0, scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Idle,
    /// Pie menu open on `sketch`.
    Selected { sketch: SketchId },
    OperationActive {
        sketch: SketchId,
        op: OperationKind,
        /// Hand pose when the slot was chosen.
        anchor: Pose,
        /// Head forward when the slot was chosen (depth axis for move-away).
        viewer_forward: Vec3,
        /// World center of the sketch when the slot was chosen.
        center: Vec3,
        pending: Pending,
    },
}

impl Selection {
    pub fn sketch(&self) -> Option<SketchId> {
        match self {
            Selection::Idle => None,
            Selection::Selected { sketch } | Selection::OperationActive { sketch, .. } => Some(*sketch),
        }
    }
}

/// Damped record of which vertical board an avatar is looking at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GazeTrack {
    pub board: Option<BoardId>,
    pub candidate: Option<BoardId>,
    pub streak: u32,
}

impl GazeTrack {
    /// Feeds one instantaneous evaluation. A different board must win
    /// `gaze::HYSTERESIS_EVALUATIONS` evaluations in a row to take over.
    pub fn observe(&mut self, raw: Option<BoardId>) -> Option<BoardId> {
        match (self.board, raw) {
            (None, _) => {
                self.board = raw;
                self.candidate = None;
                self.streak = 0;
            }
            (Some(cur), Some(r)) if cur == r => {
                self.candidate = None;
                self.streak = 0;
            }
            (Some(_), None) => {}
            (Some(_), Some(r)) => {
                if self.candidate == Some(r) {
                    self.streak += 1;
                } else {
                    self.candidate = Some(r);
                    self.streak = 1;
                }
                if self.streak >= gaze::HYSTERESIS_EVALUATIONS {
                    self.board = Some(r);
                    self.candidate = None;
                    self.streak = 0;
                }
            }
        }
        self.board
    }
}

/// The shared, replicated session. Mutated only by applying relay-sequenced
/// events; every method validates before touching anything, so an `Err`
/// leaves the state unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    /// Sequence number of the last applied event.
    pub seq: u64,
    pub now_ms: u64,
    pub next_id: u64,
    pub next_slot: u32,
    pub config: ConfigKind,
    pub avatars: BTreeMap<AvatarId, Avatar>,
    pub boards: Vec<Board>,
    pub telepathy: BTreeMap<AvatarId, TelepathyLink>,
    pub draw_locks: BTreeMap<BoardId, DrawToken>,
    pub open_strokes: BTreeMap<StrokeId, OpenStroke>,
    pub selections: BTreeMap<AvatarId, Selection>,
    pub gaze: BTreeMap<AvatarId, GazeTrack>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelepathyLink {
    pub observee: AvatarId,
    pub mode: TelepathyMode,
}

impl SessionState {
    /// Fresh session with `vertical_boards` shared boards (at least one)
    /// arranged on the walls of a square room.
    pub fn new(vertical_boards: u32, config: ConfigKind) -> SessionState {
        let mut state = SessionState {
            seq: 0,
            now_ms: 0,
            next_id: 1,
            next_slot: 0,
            config,
            avatars: BTreeMap::new(),
            boards: Vec::new(),
            telepathy: BTreeMap::new(),
            draw_locks: BTreeMap::new(),
            open_strokes: BTreeMap::new(),
            selections: BTreeMap::new(),
            gaze: BTreeMap::new(),
        };
        let n = vertical_boards.max(1);
        let room_center = Vec3::new(0.0, BOARD_CENTER_HEIGHT, ROW_DISTANCE);
        for k in 0..n {
            let yaw = std::f64::consts::TAU * f64::from(k) / f64::from(n.max(4));
            let frame = Frame::yawed(yaw);
            let id = BoardId(state.fresh_id());
            state.boards.push(Board {
                id,
                pose: Pose::new(room_center - frame.forward * ROW_DISTANCE, frame),
                width: VERTICAL_BOARD_SIZE.0,
                height: VERTICAL_BOARD_SIZE.1,
                kind: BoardKind::VerticalShared,
                sketches: Vec::new(),
            });
            state.draw_locks.insert(id, DrawToken::default());
        }
        state
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn hash(&self) -> String {
        canonical::content_hash(self).expect("session state is always serializable")
    }

    pub fn advance_clock(&mut self, now_ms: u64) {
        self.now_ms = self.now_ms.max(now_ms);
    }

    pub fn board(&self, id: BoardId) -> Result<&Board, SceneError> {
        self.boards.iter().find(|b| b.id == id).ok_or(SceneError::UnknownBoard(id))
    }

    fn board_index(&self, id: BoardId) -> Result<usize, SceneError> {
        self.boards.iter().position(|b| b.id == id).ok_or(SceneError::UnknownBoard(id))
    }

    pub fn vertical_boards(&self) -> impl Iterator<Item = &Board> {
        self.boards.iter().filter(|b| b.is_vertical())
    }

    pub fn avatar(&self, id: &AvatarId) -> Result<&Avatar, SceneError> {
        self.avatars.get(id).ok_or_else(|| SceneError::UnknownAvatar(id.clone()))
    }

    fn sketch_location(&self, id: SketchId) -> Result<(usize, usize), SceneError> {
        self.boards
            .iter()
            .enumerate()
            .find_map(|(bi, b)| b.sketches.iter().position(|s| s.id == id).map(|si| (bi, si)))
            .ok_or(SceneError::UnknownSketch(id))
    }

    pub fn sketch(&self, id: SketchId) -> Result<(&Board, &Sketch3D), SceneError> {
        let (bi, si) = self.sketch_location(id)?;
        let board = &self.boards[bi];
        Ok((board, &board.sketches[si]))
    }

    pub fn sketch_count(&self) -> usize {
        self.boards.iter().map(|b| b.sketches.len()).sum()
    }

    pub fn selection(&self, avatar: &AvatarId) -> Selection {
        self.selections.get(avatar).cloned().unwrap_or_default()
    }

    pub fn gaze_board(&self, avatar: &AvatarId) -> Option<BoardId> {
        self.gaze.get(avatar).and_then(|g| g.board)
    }

    /// Default spawn pose for a join slot: rows facing the first board.
    pub fn seat_pose(slot: u32) -> (Pose, Pose, Pose) {
        let col = f64::from(slot % SEATS_PER_ROW) - f64::from(SEATS_PER_ROW - 1) / 2.0;
        let row = f64::from(slot / SEATS_PER_ROW);
        let base = Vec3::new(col * SEAT_SPACING, HEAD_HEIGHT, ROW_DISTANCE + row * SEAT_SPACING);
        let facing = Vec3::new(0.0, 0.0, -1.0);
        let pose = |offset: Vec3| Pose::looking(base + offset, facing).expect("constant frame");
        (pose(Vec3::ZERO), pose(Vec3::new(-0.25, -0.5, -0.3)), pose(Vec3::new(0.25, -0.5, -0.3)))
    }

    // ---- membership -------------------------------------------------------

    pub fn join(&mut self, id: &AvatarId, name: &str) -> Result<(), SceneError> {
        if self.avatars.contains_key(id) {
            return Err(SceneError::DuplicateAvatar(id.clone()));
        }
        let slot = self.next_slot;
        self.next_slot += 1;
        let (head, left_hand, right_hand) = Self::seat_pose(slot);
        self.avatars.insert(
            id.clone(),
            Avatar { id: id.clone(), name: name.to_owned(), head, left_hand, right_hand, slot },
        );

        // Private desk in front of the seat, duplicating the first board.
        let duplicates = self.boards.iter().find(|b| b.is_vertical()).map(|b| b.id).expect("one vertical board");
        let desk_frame = Frame::new(Vec3::X, Vec3::new(0.0, 0.0, -1.0), Vec3::Y).expect("constant frame");
        let desk_center = Vec3::new(head.position.x, DESK_HEIGHT, head.position.z - DESK_REACH);
        let desk_id = BoardId(self.fresh_id());
        self.boards.push(Board {
            id: desk_id,
            pose: Pose::new(desk_center, desk_frame),
            width: DESK_SIZE.0,
            height: DESK_SIZE.1,
            kind: BoardKind::HorizontalPrivate { owner: id.clone(), duplicates },
            sketches: Vec::new(),
        });
        self.selections.insert(id.clone(), Selection::Idle);
        self.refresh_gaze(id);
        Ok(())
    }

    /// Removes an avatar and everything tied to it: its desk, tokens and
    /// queue slots, open strokes, selection and telepathy links in either
    /// direction. Returns the boards whose token became free.
    pub fn leave(&mut self, id: &AvatarId) -> Result<Vec<BoardId>, SceneError> {
        if !self.avatars.contains_key(id) {
            return Err(SceneError::UnknownAvatar(id.clone()));
        }
        let mut freed = Vec::new();
        for (board, token) in self.draw_locks.iter_mut() {
            token.queue.retain(|a| a != id);
            if token.holder.as_ref() == Some(id) {
                token.holder = None;
                freed.push(*board);
            }
        }
        self.close_strokes_of(id, None);
        self.avatars.remove(id);
        self.boards.retain(|b| b.owner() != Some(id));
        self.selections.remove(id);
        self.gaze.remove(id);
        self.telepathy.remove(id);
        self.telepathy.retain(|_, link| &link.observee != id);
        Ok(freed)
    }

    pub fn set_avatar_pose(
        &mut self,
        id: &AvatarId,
        head: Pose,
        left_hand: Pose,
        right_hand: Pose,
    ) -> Result<(), SceneError> {
        let avatar = self.avatars.get_mut(id).ok_or_else(|| SceneError::UnknownAvatar(id.clone()))?;
        avatar.head = head;
        avatar.left_hand = left_hand;
        avatar.right_hand = right_hand;
        self.refresh_gaze(id);
        Ok(())
    }

    fn refresh_gaze(&mut self, id: &AvatarId) {
        let Some(avatar) = self.avatars.get(id) else { return };
        let raw = gaze::instant_gaze_board(&avatar.head, self.boards.iter());
        self.gaze.entry(id.clone()).or_default().observe(raw);
    }

    pub fn set_config(&mut self, config: ConfigKind) {
        self.config = config;
    }

    pub fn set_telepathy(
        &mut self,
        observer: &AvatarId,
        observee: Option<&AvatarId>,
        mode: TelepathyMode,
    ) -> Result<(), SceneError> {
        self.avatar(observer)?;
        match observee {
            None => {
                self.telepathy.remove(observer);
            }
            Some(target) => {
                if target == observer {
                    return Err(SceneError::SelfObservation);
                }
                self.avatar(target)?;
                self.telepathy
                    .insert(observer.clone(), TelepathyLink { observee: target.clone(), mode });
            }
        }
        Ok(())
    }

    // ---- draw tokens ------------------------------------------------------

    fn token(&self, board: BoardId) -> Result<&DrawToken, SceneError> {
        self.board(board)?;
        self.draw_locks.get(&board).ok_or(SceneError::NotDrawable(board))
    }

    pub fn holds_draw_lock(&self, avatar: &AvatarId, board: BoardId) -> bool {
        self.draw_locks.get(&board).and_then(|t| t.holder.as_ref()) == Some(avatar)
    }

    /// Appends `avatar` to the board's wait queue. Granting is a separate
    /// event (see [`SessionState::grant_draw`]).
    pub fn request_draw(&mut self, avatar: &AvatarId, board: BoardId) -> Result<(), SceneError> {
        self.avatar(avatar)?;
        let token = self.token(board)?;
        if token.holder.as_ref() == Some(avatar) || token.queue.contains(avatar) {
            return Err(SceneError::AlreadyQueued(avatar.clone(), board));
        }
        self.draw_locks.get_mut(&board).expect("checked").queue.push_back(avatar.clone());
        Ok(())
    }

    /// Who should receive the token next, if it is free and someone waits.
    pub fn next_grant(&self, board: BoardId) -> Option<AvatarId> {
        let token = self.draw_locks.get(&board)?;
        match token.holder {
            None => token.queue.front().cloned(),
            Some(_) => None,
        }
    }

    pub fn grant_draw(&mut self, board: BoardId, holder: &AvatarId) -> Result<(), SceneError> {
        if self.next_grant(board).as_ref() != Some(holder) {
            self.token(board)?;
            return Err(SceneError::GrantOutOfOrder { board, avatar: holder.clone() });
        }
        let token = self.draw_locks.get_mut(&board).expect("checked");
        token.queue.pop_front();
        token.holder = Some(holder.clone());
        Ok(())
    }

    /// Frees the token and closes the releaser's open strokes on that board.
    pub fn release_draw(&mut self, avatar: &AvatarId, board: BoardId) -> Result<(), SceneError> {
        let token = self.token(board)?;
        if token.holder.as_ref() != Some(avatar) {
            return Err(SceneError::NotHolder(avatar.clone(), board));
        }
        self.close_strokes_of(avatar, Some(board));
        self.draw_locks.get_mut(&board).expect("checked").holder = None;
        Ok(())
    }

    // ---- strokes ------------------------------------------------------------

    pub fn open_stroke_of(&self, avatar: &AvatarId) -> Option<StrokeId> {
        self.open_strokes.iter().find(|(_, s)| &s.author == avatar).map(|(id, _)| *id)
    }

    pub fn begin_stroke(
        &mut self,
        avatar: &AvatarId,
        board: BoardId,
        color: Color,
        width: f64,
    ) -> Result<StrokeId, SceneError> {
        self.avatar(avatar)?;
        self.token(board)?;
        if !self.holds_draw_lock(avatar, board) {
            return Err(SceneError::NoDrawLock { avatar: avatar.clone(), board });
        }
        if self.open_stroke_of(avatar).is_some() {
            return Err(SceneError::StrokeAlreadyOpen(avatar.clone()));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(SceneError::InvalidContent(format!("stroke width {width}")));
        }
        let id = StrokeId(self.fresh_id());
        self.open_strokes.insert(
            id,
            OpenStroke {
                author: avatar.clone(),
                board,
                stroke: Stroke { id, points: Vec::new(), color, width },
                started_ms: self.now_ms,
            },
        );
        Ok(id)
    }

    fn open_stroke_for(&self, avatar: &AvatarId, stroke: StrokeId) -> Result<&OpenStroke, SceneError> {
        let open = match self.open_strokes.get(&stroke) {
            Some(open) => open,
            None if self.stroke_exists(stroke) => return Err(SceneError::StrokeClosed(stroke)),
            None => return Err(SceneError::UnknownStroke(stroke)),
        };
        if &open.author != avatar {
            return Err(SceneError::AuthorMismatch { stroke, author: open.author.clone() });
        }
        Ok(open)
    }

    fn stroke_exists(&self, stroke: StrokeId) -> bool {
        self.boards
            .iter()
            .flat_map(|b| b.sketches.iter())
            .flat_map(|s| s.strokes.iter())
            .any(|s| s.id == stroke)
    }

    pub fn append_stroke_points(
        &mut self,
        avatar: &AvatarId,
        stroke: StrokeId,
        points: &[Vec3],
    ) -> Result<(), SceneError> {
        self.open_stroke_for(avatar, stroke)?;
        if let Some(bad) = points.iter().find(|p| !p.is_finite()) {
            return Err(SceneError::InvalidContent(format!("non-finite point {bad:?}")));
        }
        self.open_strokes.get_mut(&stroke).expect("checked").stroke.points.extend_from_slice(points);
        Ok(())
    }

    /// Closes the stroke and files it into a sketch: merged into a nearby,
    /// recently drawn sketch on the same board, or wrapped in a new one.
    pub fn end_stroke(&mut self, avatar: &AvatarId, stroke: StrokeId) -> Result<SketchId, SceneError> {
        if self.open_stroke_for(avatar, stroke)?.stroke.points.is_empty() {
            return Err(SceneError::EmptyStroke(stroke));
        }
        let open = self.open_strokes.remove(&stroke).expect("checked");
        Ok(self.file_stroke(open))
    }

    fn close_strokes_of(&mut self, avatar: &AvatarId, board: Option<BoardId>) {
        let ids: Vec<StrokeId> = self
            .open_strokes
            .iter()
            .filter(|(_, s)| &s.author == avatar && board.is_none_or(|b| b == s.board))
            .map(|(id, _)| *id)
            .collect();
        for id in ids {
            let open = self.open_strokes.remove(&id).expect("listed");
            if !open.stroke.points.is_empty() {
                self.file_stroke(open);
            }
        }
    }

    fn file_stroke(&mut self, open: OpenStroke) -> SketchId {
        let bi = self.board_index(open.board).expect("open strokes reference live boards");
        let now = self.now_ms;
        let board_pose = self.boards[bi].pose;
        let stroke_bounds = open
            .stroke
            .points
            .iter()
            .map(|p| board_pose.to_world_point(*p))
            .fold(None, |acc: Option<(Vec3, Vec3)>, w| {
                Some(acc.map_or((w, w), |(lo, hi)| (lo.component_min(w), hi.component_max(w))))
            })
            .expect("non-empty stroke");

        let target = self.boards[bi]
            .sketches
            .iter()
            .filter(|s| open.started_ms.saturating_sub(s.last_stroke_ms) <= MERGE_WINDOW_MS)
            .filter_map(|s| {
                let (lo, hi) = s.world_bounds(&board_pose).ok()?;
                let gap = aabb_gap(stroke_bounds.0, stroke_bounds.1, lo, hi);
                (gap <= MERGE_DISTANCE_M).then_some((gap, s.id))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id);

        let board = &mut self.boards[bi];
        match target {
            Some(id) => {
                let sketch = board.sketches.iter_mut().find(|s| s.id == id).expect("found above");
                let mut stroke = open.stroke;
                for p in stroke.points.iter_mut() {
                    *p = sketch.transform.invert(*p);
                }
                stroke.width /= sketch.transform.scale;
                sketch.strokes.push(stroke);
                sketch.last_stroke_ms = now;
                id
            }
            None => {
                let id = SketchId(self.next_id);
                self.next_id += 1;
                let lo = board_pose.to_local_point(stroke_bounds.0);
                let hi = board_pose.to_local_point(stroke_bounds.1);
                let pivot = local_bounds_center(&open.stroke.points).unwrap_or((lo + hi) * 0.5);
                self.boards[bi].sketches.push(Sketch3D {
                    id,
                    board: open.board,
                    strokes: vec![open.stroke],
                    primitives: Vec::new(),
                    transform: SketchTransform::identity(pivot),
                    last_stroke_ms: now,
                });
                id
            }
        }
    }

    /// Places a parametric solid as a new sketch. Needs the draw token.
    pub fn spawn_primitive(
        &mut self,
        avatar: &AvatarId,
        board: BoardId,
        primitive: Primitive,
    ) -> Result<SketchId, SceneError> {
        self.avatar(avatar)?;
        self.token(board)?;
        if !self.holds_draw_lock(avatar, board) {
            return Err(SceneError::NoDrawLock { avatar: avatar.clone(), board });
        }
        primitive.validate()?;
        let bi = self.board_index(board)?;
        let id = SketchId(self.fresh_id());
        let now = self.now_ms;
        self.boards[bi].sketches.push(Sketch3D {
            id,
            board,
            strokes: Vec::new(),
            primitives: vec![primitive],
            transform: SketchTransform::identity(primitive.center),
            last_stroke_ms: now,
        });
        Ok(id)
    }

    // ---- selection and the pie menu ----------------------------------------

    pub fn sketch_bbox(&self, id: SketchId) -> Result<(Vec3, Vec3), SceneError> {
        let (board, sketch) = self.sketch(id)?;
        sketch.world_bounds(&board.pose)
    }

    /// Nearest sketch whose inflated world box the ray enters; ties go to the
    /// lower sketch id.
    pub fn pick(&self, ray: &Ray) -> Option<SketchId> {
        let inflate = Vec3::new(SELECTION_INFLATE_M, SELECTION_INFLATE_M, SELECTION_INFLATE_M);
        self.boards
            .iter()
            .flat_map(|b| b.sketches.iter().map(move |s| (b, s)))
            .filter_map(|(b, s)| {
                let (lo, hi) = s.world_bounds(&b.pose).ok()?;
                ray_aabb(ray, lo - inflate, hi + inflate).map(|t| (t, s.id))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
    }

    pub fn select_sketch(&mut self, avatar: &AvatarId, ray: &Ray) -> Result<Option<SketchId>, SceneError> {
        self.avatar(avatar)?;
        if matches!(self.selection(avatar), Selection::OperationActive { .. }) {
            return Err(SceneError::OperationInProgress(avatar.clone()));
        }
        let hit = self.pick(ray);
        let next = match hit {
            Some(sketch) => Selection::Selected { sketch },
            None => Selection::Idle,
        };
        self.selections.insert(avatar.clone(), next);
        Ok(hit)
    }

    pub fn deselect(&mut self, avatar: &AvatarId) -> Result<(), SceneError> {
        self.avatar(avatar)?;
        self.selections.insert(avatar.clone(), Selection::Idle);
        Ok(())
    }

    pub fn choose_operation(&mut self, avatar: &AvatarId, op: OperationKind) -> Result<(), SceneError> {
        let who = self.avatar(avatar)?;
        let Selection::Selected { sketch } = self.selection(avatar) else {
            return Err(SceneError::NotSelected(avatar.clone()));
        };
        if op == OperationKind::Delete {
            let (bi, si) = self.sketch_location(sketch)?;
            self.boards[bi].sketches.remove(si);
            for sel in self.selections.values_mut() {
                if sel.sketch() == Some(sketch) {
                    *sel = Selection::Idle;
                }
            }
            return Ok(());
        }
        let (board, s) = self.sketch(sketch)?;
        let center = board.pose.to_world_point(s.transform.center());
        let active = Selection::OperationActive {
            sketch,
            op,
            anchor: who.right_hand,
            viewer_forward: who.head.frame.forward,
            center,
            pending: Pending::default(),
        };
        self.selections.insert(avatar.clone(), active);
        Ok(())
    }

    /// Recomputes the pending transform from the anchor to `hand`.
    pub fn update_operation(&mut self, avatar: &AvatarId, hand: Pose) -> Result<(), SceneError> {
        self.avatar(avatar)?;
        let Selection::OperationActive { sketch, op, anchor, viewer_forward, center, .. } = self.selection(avatar)
        else {
            return Err(SceneError::NotActive(avatar.clone()));
        };
        let (board, _) = self.sketch(sketch)?;
        let pending = gesture_pending(op, &anchor, &hand, viewer_forward, center, board.pose.frame.up);
        if let Some(Selection::OperationActive { pending: p, .. }) = self.selections.get_mut(avatar) {
            *p = pending;
        }
        Ok(())
    }

    /// Applies the pending transform and returns to `Selected` on the same
    /// sketch. For copy, the returned id is the new clone.
    pub fn commit_operation(&mut self, avatar: &AvatarId) -> Result<Option<SketchId>, SceneError> {
        self.avatar(avatar)?;
        let Selection::OperationActive { sketch, op, pending, .. } = self.selection(avatar) else {
            return Err(SceneError::NotActive(avatar.clone()));
        };
        let (bi, si) = self.sketch_location(sketch)?;
        let local_delta = self.boards[bi].pose.frame.to_local(pending.translation);
        let mut created = None;
        match op {
            OperationKind::Delete => unreachable!("delete never becomes active"),
            OperationKind::Move | OperationKind::MoveAway => {
                self.boards[bi].sketches[si].transform.translation += local_delta;
            }
            OperationKind::Rotate => {
                self.boards[bi].sketches[si].transform.rotation += pending.rotation;
            }
            OperationKind::Scale => {
                let t = &mut self.boards[bi].sketches[si].transform;
                t.scale = (t.scale * pending.scale).clamp(SCALE_TOTAL_MIN, SCALE_TOTAL_MAX);
            }
            OperationKind::Copy => {
                let mut clone = self.boards[bi].sketches[si].clone();
                clone.id = SketchId(self.fresh_id());
                for stroke in clone.strokes.iter_mut() {
                    stroke.id = StrokeId(self.fresh_id());
                }
                clone.transform.translation += local_delta;
                clone.last_stroke_ms = 0;
                created = Some(clone.id);
                self.boards[bi].sketches.push(clone);
            }
        }
        self.selections.insert(avatar.clone(), Selection::Selected { sketch });
        Ok(created)
    }

    /// Where the copy would land: the selected sketch's box shifted by the
    /// pending translation. Only defined during an active copy.
    pub fn ghost_bbox(&self, avatar: &AvatarId) -> Option<(Vec3, Vec3)> {
        match self.selection(avatar) {
            Selection::OperationActive { sketch, op: OperationKind::Copy, pending, .. } => {
                let (lo, hi) = self.sketch_bbox(sketch).ok()?;
                Some((lo + pending.translation, hi + pending.translation))
            }
            _ => None,
        }
    }

    /// Structural invariants every reachable state satisfies. Returns the
    /// first violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (board, token) in &self.draw_locks {
            if let Some(h) = &token.holder {
                if token.queue.contains(h) {
                    return Err(format!("{board}: holder `{h}` is also queued"));
                }
            }
            let mut seen = std::collections::BTreeSet::new();
            if let Some(dup) = token.queue.iter().find(|a| !seen.insert(*a)) {
                return Err(format!("{board}: `{dup}` queued twice"));
            }
        }
        for open in self.open_strokes.values() {
            if !self.holds_draw_lock(&open.author, open.board) {
                return Err(format!("open stroke {} by `{}` without token", open.stroke.id, open.author));
            }
        }
        for (avatar, sel) in &self.selections {
            if let Some(s) = sel.sketch() {
                if self.sketch(s).is_err() {
                    return Err(format!("`{avatar}` selects deleted {s}"));
                }
            }
        }
        for (observer, link) in &self.telepathy {
            if observer == &link.observee {
                return Err(format!("`{observer}` observes itself"));
            }
        }
        for board in &self.boards {
            if let BoardKind::HorizontalPrivate { owner, .. } = &board.kind {
                if !self.avatars.contains_key(owner) {
                    return Err(format!("{} owned by departed `{owner}`", board.id));
                }
            }
            for s in &board.sketches {
                if s.transform.scale.is_nan() || s.transform.scale <= 0.0 {
                    return Err(format!("{} has non-positive scale", s.id));
                }
            }
        }
        Ok(())
    }
}

fn local_bounds_center(points: &[Vec3]) -> Option<Vec3> {
    let first = *points.first()?;
    let (lo, hi) = points.iter().fold((first, first), |(lo, hi), p| (lo.component_min(*p), hi.component_max(*p)));
    Some((lo + hi) * 0.5)
}

/// Gesture math: move/copy follow the hand 1:1, move-away keeps only the
/// component along the viewer's forward axis, rotate takes the yaw the hand
/// sweeps around the sketch center (about the board's up axis), scale takes
/// the ratio of hand distances from the center.
fn gesture_pending(
    op: OperationKind,
    anchor: &Pose,
    hand: &Pose,
    viewer_forward: Vec3,
    center: Vec3,
    up: Vec3,
) -> Pending {
    let delta = hand.position - anchor.position;
    match op {
        OperationKind::Move | OperationKind::Copy => Pending { translation: delta, ..Pending::default() },
        OperationKind::MoveAway => {
            Pending { translation: viewer_forward * delta.dot(viewer_forward), ..Pending::default() }
        }
        OperationKind::Rotate => {
            let flat = |v: Vec3| v - up * v.dot(up);
            let a = flat(anchor.position - center);
            let b = flat(hand.position - center);
            let rotation = if a.norm() < 1e-9 || b.norm() < 1e-9 {
                0.0
            } else {
                up.dot(a.cross(b)).atan2(a.dot(b))
            };
            Pending { rotation, ..Pending::default() }
        }
        OperationKind::Scale => {
            let from = anchor.position.distance(center);
            let to = hand.position.distance(center);
            let ratio = if from < 1e-9 { 1.0 } else { to / from };
            Pending { scale: ratio.clamp(SCALE_GESTURE_MIN, SCALE_GESTURE_MAX), ..Pending::default() }
        }
        OperationKind::Delete => Pending::default(),
    }
}
