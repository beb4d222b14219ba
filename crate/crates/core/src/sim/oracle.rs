//! Independent reference checks used by the harness. Nothing here calls the
//! geometry or token code it is checking.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::geometry::{Pose, Vec3};
use crate::protocol::{Body, Message, SketchOp};
use crate::scene::{AvatarId, BoardId, BoardKind, SessionState, StrokeId};
use crate::view::{self, ViewerScene};

type Mat3 = [[f64; 3]; 3];

/// Householder matrix `I - 2 n n^T` for a unit normal.
pub fn householder(n: Vec3) -> Mat3 {
    let v = [n.x, n.y, n.z];
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = f64::from(u8::from(i == j)) - 2.0 * v[i] * v[j];
        }
    }
    m
}

pub fn mat_vec(m: &Mat3, p: Vec3) -> Vec3 {
    let v = [p.x, p.y, p.z];
    let row = |r: &[f64; 3]| r[0] * v[0] + r[1] * v[1] + r[2] * v[2];
    Vec3::new(row(&m[0]), row(&m[1]), row(&m[2]))
}

/// Reflection of a point across the plane through `origin` with unit
/// normal `n`, as an affine matrix map.
pub fn reflect_point(p: Vec3, origin: Vec3, n: Vec3) -> Vec3 {
    mat_vec(&householder(n), p - origin) + origin
}

/// Expected mirrored pose: position and forward/up reflected, right
/// rebuilt so the frame stays right-handed.
pub fn reflect_pose(pose: &Pose, origin: Vec3, n: Vec3) -> (Vec3, Vec3, Vec3, Vec3) {
    let h = householder(n);
    let forward = mat_vec(&h, pose.frame.forward);
    let up = mat_vec(&h, pose.frame.up);
    (reflect_point(pose.position, origin, n), up.cross(forward), up, forward)
}

fn pose_err(p: &Pose, expected: (Vec3, Vec3, Vec3, Vec3)) -> f64 {
    [
        p.position.max_abs_diff(expected.0),
        p.frame.right.max_abs_diff(expected.1),
        p.frame.up.max_abs_diff(expected.2),
        p.frame.forward.max_abs_diff(expected.3),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Checks every participant's composed scene in `state`. Returns failure
/// descriptions keyed by check name; an empty result means all held.
pub fn check_compositions(state: &SessionState, tol: f64) -> Vec<(&'static str, String)> {
    let mut failures = Vec::new();
    for viewer in state.avatars.keys() {
        let scene = match view::compose_config(state, viewer) {
            Ok(s) => s,
            Err(e) => {
                failures.push(("composition", format!("{viewer}: {e}")));
                continue;
            }
        };
        check_privacy(state, viewer, &scene, &mut failures);
        check_content(state, &scene, &mut failures);
        if state.config == crate::scene::ConfigKind::Mirrored {
            check_mirroring(state, viewer, &scene, tol, &mut failures);
        }
    }
    for (observer, link) in &state.telepathy {
        let Ok(full) = view::compose_view(state, observer) else {
            failures.push(("telepathy", format!("{observer}: composition failed")));
            continue;
        };
        let Ok(own) = view::compose_config(state, &link.observee) else { continue };
        match link.mode {
            crate::scene::TelepathyMode::Windowed => {
                let ok = full.telepathy_window.as_ref().is_some_and(|w| w.scene.hash() == own.hash());
                if !ok {
                    failures.push(("telepathy", format!("{observer} window differs from {}'s view", link.observee)));
                }
            }
            _ => {
                let mut expected = own;
                expected.viewer = observer.clone();
                expected.avatars.remove(observer);
                if full.boards != expected.boards || full.avatars != expected.avatars {
                    failures.push(("telepathy", format!("{observer} immersive view differs from {}'s", link.observee)));
                }
            }
        }
    }
    failures
}

fn check_privacy(state: &SessionState, viewer: &AvatarId, scene: &ViewerScene, out: &mut Vec<(&'static str, String)>) {
    for (id, b) in &scene.boards {
        if let BoardKind::HorizontalPrivate { owner, .. } = &b.kind {
            if owner != viewer {
                out.push(("privacy", format!("{viewer} sees {owner}'s desk {id}")));
            }
        }
    }
    let expected_desks = state.boards.iter().filter(|b| b.owner() == Some(viewer)).count();
    let shown = scene.boards.values().filter(|b| !matches!(b.kind, BoardKind::VerticalShared)).count();
    if state.config == crate::scene::ConfigKind::EyesFree && shown != expected_desks {
        out.push(("privacy", format!("{viewer} desk count {shown}, expected {expected_desks}")));
    }
}

/// Shared boards must look the same in every configuration.
fn check_content(state: &SessionState, scene: &ViewerScene, out: &mut Vec<(&'static str, String)>) {
    for board in state.vertical_boards() {
        let Some(shown) = scene.boards.get(&board.id) else {
            out.push(("content", format!("{} missing from {}'s view", board.id, scene.viewer)));
            continue;
        };
        let same = shown.pose == board.pose
            && shown.sketches.len() == board.sketches.len()
            && shown.sketches.iter().zip(&board.sketches).all(|(r, s)| *r == s.render());
        if !same {
            out.push(("content", format!("{} altered in {}'s view", board.id, scene.viewer)));
        }
    }
}

fn check_mirroring(
    state: &SessionState,
    viewer: &AvatarId,
    scene: &ViewerScene,
    tol: f64,
    out: &mut Vec<(&'static str, String)>,
) {
    for (id, avatar) in &state.avatars {
        let Some(placed) = scene.avatars.get(id) else {
            out.push(("mirroring", format!("{id} missing from {viewer}'s view")));
            continue;
        };
        let raw = (avatar.head.position, avatar.head.frame.right, avatar.head.frame.up, avatar.head.frame.forward);
        let expected = match (id == viewer, state.gaze.get(id).and_then(|g| g.board)) {
            (false, Some(b)) => match state.boards.iter().find(|x| x.id == b) {
                Some(board) => reflect_pose(&avatar.head, board.pose.position, board.pose.frame.forward),
                None => raw,
            },
            _ => raw,
        };
        let err = pose_err(&placed.head, expected);
        if err > tol {
            out.push(("mirroring", format!("{id} in {viewer}'s view off by {err:e}")));
        }
    }
}

/// Replays the sequenced journal against its own model of draw tokens.
#[derive(Debug, Default)]
pub struct LockMonitor {
    holders: BTreeMap<BoardId, AvatarId>,
    queues: BTreeMap<BoardId, VecDeque<(AvatarId, u64)>>,
    stroke_boards: BTreeMap<StrokeId, BoardId>,
    /// Boards freed by a departure with someone waiting.
    awaiting_regrant: BTreeSet<BoardId>,
    last_seq: u64,
    pub grants: Vec<GrantRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct GrantRecord {
    pub seq: u64,
    pub board: BoardId,
    pub holder: AvatarId,
    /// Seq of the request this grant answers.
    pub requested_at: u64,
}

impl LockMonitor {
    /// Feeds one relay batch; returns violations. A token freed by a
    /// departure must be re-granted within the same batch.
    pub fn observe(&mut self, batch: &[Message]) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        for m in batch {
            if m.seq != self.last_seq + 1 {
                v.push(("ledger", format!("seq jumped from {} to {}", self.last_seq, m.seq)));
            }
            self.last_seq = m.seq;
            self.event(m, &mut v);
        }
        for board in std::mem::take(&mut self.awaiting_regrant) {
            if !self.holders.contains_key(&board) && self.queues.get(&board).is_some_and(|q| !q.is_empty()) {
                v.push(("token", format!("{board} freed by departure but not re-granted")));
            }
        }
        v
    }

    fn require_holder(&self, who: &AvatarId, board: BoardId, what: &str, v: &mut Vec<(&'static str, String)>) {
        if self.holders.get(&board) != Some(who) {
            v.push(("token", format!("{what} by {who} on {board} without the token")));
        }
    }

    fn event(&mut self, m: &Message, v: &mut Vec<(&'static str, String)>) {
        let who = &m.sender;
        match &m.body {
            Body::DrawRequest { board } => self.queues.entry(*board).or_default().push_back((who.clone(), m.seq)),
            Body::DrawGrant { board, holder } => {
                if let Some(h) = self.holders.get(board) {
                    v.push(("token", format!("{board} granted to {holder} while {h} holds it")));
                }
                match self.queues.entry(*board).or_default().pop_front() {
                    Some((first, requested_at)) if &first == holder => {
                        self.grants.push(GrantRecord { seq: m.seq, board: *board, holder: holder.clone(), requested_at });
                    }
                    other => v.push(("token", format!("{board} granted to {holder}, queue head was {other:?}"))),
                }
                self.holders.insert(*board, holder.clone());
            }
            Body::DrawRelease { board } => {
                self.require_holder(who, *board, "release", v);
                self.holders.remove(board);
            }
            Body::Goodbye => {
                for q in self.queues.values_mut() {
                    q.retain(|(a, _)| a != who);
                }
                let freed: Vec<BoardId> =
                    self.holders.iter().filter(|(_, h)| *h == who).map(|(b, _)| *b).collect();
                for b in freed {
                    self.holders.remove(&b);
                    self.awaiting_regrant.insert(b);
                }
            }
            Body::StrokeBegin { board, stroke, .. } => {
                self.require_holder(who, *board, "stroke", v);
                match stroke {
                    Some(id) => {
                        self.stroke_boards.insert(*id, *board);
                    }
                    None => v.push(("ledger", format!("seq {} stroke without id", m.seq))),
                }
            }
            Body::StrokePoints { stroke, .. } | Body::StrokeEnd { stroke } => {
                match stroke.and_then(|s| self.stroke_boards.get(&s).copied()) {
                    Some(board) => self.require_holder(who, board, "stroke", v),
                    None => v.push(("ledger", format!("seq {} names unknown stroke {stroke:?}", m.seq))),
                }
            }
            Body::SketchOp(SketchOp::SpawnPrimitive { board, .. }) => self.require_holder(who, *board, "spawn", v),
            _ => {}
        }
    }

    pub fn holder(&self, board: BoardId) -> Option<&AvatarId> {
        self.holders.get(&board)
    }
}
