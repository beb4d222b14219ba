//! Per-viewer scene composition.
//!
//! Every function here is a pure function of a [`SessionState`] snapshot, so
//! any client can compose any participant's view locally from the shared
//! poses; telepathy needs no extra traffic.

pub mod gaze;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::geometry::{reflect_pose, Pose, Vec3};
use crate::scene::{
    Avatar, AvatarId, Board, BoardId, BoardKind, ConfigKind, RenderedSketch, SessionState, Sketch3D,
    TelepathyMode,
};

/// Third-person telepathy camera offset in the observee's head frame.
pub const THIRD_PERSON_BACK_M: f64 = 0.5;
pub const THIRD_PERSON_UP_M: f64 = 0.3;
/// Windowed telepathy panel offset in the observer's head frame.
pub const WINDOW_AHEAD_M: f64 = 0.4;
pub const WINDOW_UP_M: f64 = 0.12;
pub const WINDOW_LEFT_M: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ViewError {
    #[error("unknown viewer `{0}`")]
    UnknownViewer(AvatarId),
    #[error("unknown observee `{0}`")]
    UnknownObservee(AvatarId),
    #[error("an avatar cannot observe itself")]
    SelfObservation,
    #[error("board {0} is not horizontal")]
    NotHorizontal(BoardId),
    #[error("board {0} is not vertical")]
    NotVertical(BoardId),
    #[error("normalized coordinate ({0}, {1}) outside [-0.5, 0.5]")]
    OutOfBounds(f64, f64),
    #[error("sketch is not on board {0}")]
    ForeignSketch(BoardId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarPlacement {
    pub head: Pose,
    pub left_hand: Pose,
    pub right_hand: Pose,
    /// Board whose plane this avatar was mirrored across, if any.
    pub mirrored_across: Option<BoardId>,
}

impl AvatarPlacement {
    fn raw(a: &Avatar) -> Self {
        AvatarPlacement { head: a.head, left_hand: a.left_hand, right_hand: a.right_hand, mirrored_across: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardView {
    pub pose: Pose,
    pub width: f64,
    pub height: f64,
    pub kind: BoardKind,
    /// Content projected onto the board plane.
    pub flattened: bool,
    pub sketches: Vec<RenderedSketch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelepathyWindow {
    pub observee: AvatarId,
    /// Where the panel floats, in world space.
    pub anchor: Pose,
    pub camera: Pose,
    pub scene: ViewerScene,
}

/// What one participant sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewerScene {
    pub viewer: AvatarId,
    pub config: ConfigKind,
    pub camera: Pose,
    pub avatars: BTreeMap<AvatarId, AvatarPlacement>,
    pub boards: BTreeMap<BoardId, BoardView>,
    pub telepathy_window: Option<Box<TelepathyWindow>>,
}

impl ViewerScene {
    pub fn hash(&self) -> String {
        canonical::content_hash(self).expect("scenes are always serializable")
    }

    /// Hash of the board views only.
    pub fn content_hash(&self) -> String {
        canonical::content_hash(&self.boards).expect("scenes are always serializable")
    }
}

fn viewer<'a>(state: &'a SessionState, id: &AvatarId) -> Result<&'a Avatar, ViewError> {
    state.avatars.get(id).ok_or_else(|| ViewError::UnknownViewer(id.clone()))
}

fn full_view(board: &Board) -> BoardView {
    BoardView {
        pose: board.pose,
        width: board.width,
        height: board.height,
        kind: board.kind.clone(),
        flattened: false,
        sketches: board.sketches.iter().map(Sketch3D::render).collect(),
    }
}

fn vertical_views(state: &SessionState) -> BTreeMap<BoardId, BoardView> {
    state.vertical_boards().map(|b| (b.id, full_view(b))).collect()
}

fn base_scene(state: &SessionState, who: &Avatar) -> ViewerScene {
    ViewerScene {
        viewer: who.id.clone(),
        config: state.config,
        camera: who.head,
        avatars: state.avatars.values().map(|a| (a.id.clone(), AvatarPlacement::raw(a))).collect(),
        boards: vertical_views(state),
        telepathy_window: None,
    }
}

/// Everyone at their synchronized pose; shared boards as-is.
pub fn compose_side_by_side(state: &SessionState, viewer_id: &AvatarId) -> Result<ViewerScene, ViewError> {
    Ok(base_scene(state, viewer(state, viewer_id)?))
}

/// The viewer stays put; every other avatar is reflected across the plane
/// of the board that avatar is looking at. Board content is never
/// reflected.
pub fn compose_mirrored(state: &SessionState, viewer_id: &AvatarId) -> Result<ViewerScene, ViewError> {
    let me = viewer(state, viewer_id)?;
    let mut scene = base_scene(state, me);
    for (id, placement) in scene.avatars.iter_mut() {
        if id == viewer_id {
            continue;
        }
        let Some(board) = state.gaze_board(id).and_then(|b| state.board(b).ok()) else { continue };
        let plane = board.plane();
        placement.head = reflect_pose(&placement.head, &plane);
        placement.left_hand = reflect_pose(&placement.left_hand, &plane);
        placement.right_hand = reflect_pose(&placement.right_hand, &plane);
        placement.mirrored_across = Some(board.id);
    }
    Ok(scene)
}

/// Side-by-side placement plus the viewer's own desk, which carries a
/// flattened copy of the board it duplicates. Other people's desks are
/// left out.
pub fn compose_eyes_free(state: &SessionState, viewer_id: &AvatarId) -> Result<ViewerScene, ViewError> {
    let me = viewer(state, viewer_id)?;
    let mut scene = base_scene(state, me);
    for desk in state.boards.iter().filter(|b| b.owner() == Some(viewer_id)) {
        let BoardKind::HorizontalPrivate { duplicates, .. } = &desk.kind else { continue };
        let Ok(source) = state.board(*duplicates) else { continue };
        let (sx, sy) = (desk.width / source.width, desk.height / source.height);
        let sketches = source.sketches.iter().map(|s| s.render().flattened().rescaled(sx, sy)).collect();
        scene.boards.insert(
            desk.id,
            BoardView {
                pose: desk.pose,
                width: desk.width,
                height: desk.height,
                kind: desk.kind.clone(),
                flattened: true,
                sketches,
            },
        );
    }
    Ok(scene)
}

/// Composition for the active configuration, ignoring telepathy.
pub fn compose_config(state: &SessionState, viewer_id: &AvatarId) -> Result<ViewerScene, ViewError> {
    match state.config {
        ConfigKind::SideBySide => compose_side_by_side(state, viewer_id),
        ConfigKind::Mirrored => compose_mirrored(state, viewer_id),
        ConfigKind::EyesFree => compose_eyes_free(state, viewer_id),
    }
}

/// Full composition: configuration first, then the viewer's telepathy
/// setting, if any.
///
/// Immersive modes compose the observee's perspective (so under mirroring
/// the observee is the unmirrored one) and drop the observer's own avatar.
/// Windowed mode keeps the main scene and attaches the observee's
/// perspective as a floating panel.
pub fn compose_view(state: &SessionState, viewer_id: &AvatarId) -> Result<ViewerScene, ViewError> {
    let me = viewer(state, viewer_id)?;
    let Some(link) = state.telepathy.get(viewer_id) else {
        return compose_config(state, viewer_id);
    };
    compose_with_telepathy(state, me, &link.observee, link.mode)
}

/// Like [`compose_view`] but with an explicit observee and mode instead of
/// the one stored in the state.
pub fn compose_with_telepathy(
    state: &SessionState,
    observer: &Avatar,
    observee_id: &AvatarId,
    mode: TelepathyMode,
) -> Result<ViewerScene, ViewError> {
    if observee_id == &observer.id {
        return Err(ViewError::SelfObservation);
    }
    let observee = state.avatars.get(observee_id).ok_or_else(|| ViewError::UnknownObservee(observee_id.clone()))?;
    match mode {
        TelepathyMode::Windowed => {
            let mut scene = compose_config(state, &observer.id)?;
            let f = observer.head.frame;
            let anchor = Pose::new(
                observer.head.position + f.forward * WINDOW_AHEAD_M + f.up * WINDOW_UP_M - f.right * WINDOW_LEFT_M,
                f,
            );
            scene.telepathy_window = Some(Box::new(TelepathyWindow {
                observee: observee_id.clone(),
                anchor,
                camera: observee.head,
                scene: compose_config(state, observee_id)?,
            }));
            Ok(scene)
        }
        TelepathyMode::ImmersiveFirst | TelepathyMode::ImmersiveThird => {
            let mut scene = compose_config(state, observee_id)?;
            scene.viewer = observer.id.clone();
            scene.avatars.remove(&observer.id);
            scene.camera = match mode {
                TelepathyMode::ImmersiveThird => third_person_camera(&observee.head),
                _ => observee.head,
            };
            Ok(scene)
        }
    }
}

pub fn third_person_camera(head: &Pose) -> Pose {
    let f = head.frame;
    Pose::new(head.position - f.forward * THIRD_PERSON_BACK_M + f.up * THIRD_PERSON_UP_M, f)
}

/// Mouse-and-display mapping from a desk to a shared board. Both boards are
/// addressed in normalized coordinates (u right, v forward on the desk / up
/// on the board), so the desk's physical size drops out.
pub fn map_horizontal_to_vertical(u: f64, v: f64, desk: &Board, board: &Board) -> Result<Vec3, ViewError> {
    if !matches!(desk.kind, BoardKind::HorizontalPrivate { .. }) {
        return Err(ViewError::NotHorizontal(desk.id));
    }
    if !board.is_vertical() {
        return Err(ViewError::NotVertical(board.id));
    }
    let inside = |c: f64| c.is_finite() && (-0.5..=0.5).contains(&c);
    if !(inside(u) && inside(v)) {
        return Err(ViewError::OutOfBounds(u, v));
    }
    Ok(board.pose.to_world_point(Vec3::new(u * board.width, v * board.height, 0.0)))
}

/// Sketch geometry projected onto its board plane.
pub fn flatten(sketch: &Sketch3D, board: &Board) -> Result<RenderedSketch, ViewError> {
    if sketch.board != board.id {
        return Err(ViewError::ForeignSketch(board.id));
    }
    Ok(sketch.render().flattened())
}

#[cfg(test)]
mod tests;
