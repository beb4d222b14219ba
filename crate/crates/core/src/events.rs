//! Applying sequenced messages to a [`SessionState`]. The relay and every
//! replica run exactly this code, which is what makes their states agree.

use thiserror::Error;

use crate::protocol::{Body, Message, SketchOp};
use crate::scene::{BoardId, SceneError, SessionState, SketchId, StrokeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyError {
    #[error("expected seq {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("`{0}` messages are not state events")]
    NotAnEvent(&'static str),
    #[error("stroke id mismatch: sequenced {sequenced}, derived {derived}")]
    StrokeIdMismatch { sequenced: StrokeId, derived: StrokeId },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// What an applied event produced, when it produced something new.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    None,
    StrokeOpened(StrokeId),
    SketchCreated(SketchId),
    /// Draw tokens left free by a departure.
    TokensFreed(Vec<BoardId>),
}

/// Whether a message kind mutates session state when sequenced.
pub fn is_state_event(body: &Body) -> bool {
    !matches!(
        body,
        Body::Welcome { .. } | Body::Reject { .. } | Body::Nack { .. } | Body::Snapshot { .. } | Body::Heartbeat
    )
}

/// Applies `msg` as the next event. On error the state is untouched.
pub fn apply(state: &mut SessionState, msg: &Message) -> Result<Effect, ApplyError> {
    if !is_state_event(&msg.body) {
        return Err(ApplyError::NotAnEvent(msg.kind()));
    }
    if msg.seq != state.seq + 1 {
        return Err(ApplyError::OutOfOrder { expected: state.seq + 1, got: msg.seq });
    }
    let clock = state.now_ms;
    state.advance_clock(msg.ts);
    match apply_body(state, msg) {
        Ok(effect) => {
            state.seq = msg.seq;
            Ok(effect)
        }
        Err(e) => {
            state.now_ms = clock;
            Err(e)
        }
    }
}

fn apply_body(state: &mut SessionState, msg: &Message) -> Result<Effect, ApplyError> {
    let who = &msg.sender;
    let effect = match &msg.body {
        Body::Hello { name } => {
            state.join(who, name)?;
            Effect::None
        }
        Body::Goodbye => Effect::TokensFreed(state.leave(who)?),
        Body::AvatarUpdate { head, left_hand, right_hand } => {
            state.set_avatar_pose(who, *head, *left_hand, *right_hand)?;
            Effect::None
        }
        Body::StrokeBegin { board, color, width, stroke } => {
            let derived = peek_next_stroke_id(state);
            if let Some(seqd) = stroke {
                if *seqd != derived {
                    return Err(ApplyError::StrokeIdMismatch { sequenced: *seqd, derived });
                }
            }
            Effect::StrokeOpened(state.begin_stroke(who, *board, *color, *width)?)
        }
        Body::StrokePoints { stroke, points } => {
            let id = resolve_stroke(state, msg, *stroke)?;
            state.append_stroke_points(who, id, points)?;
            Effect::None
        }
        Body::StrokeEnd { stroke } => {
            let id = resolve_stroke(state, msg, *stroke)?;
            Effect::SketchCreated(state.end_stroke(who, id)?)
        }
        Body::SketchOp(op) => match op {
            SketchOp::Select { ray } => {
                state.select_sketch(who, ray)?;
                Effect::None
            }
            SketchOp::Deselect => {
                state.deselect(who)?;
                Effect::None
            }
            SketchOp::Choose { slot } => {
                state.choose_operation(who, *slot)?;
                Effect::None
            }
            SketchOp::Update { hand } => {
                state.update_operation(who, *hand)?;
                Effect::None
            }
            SketchOp::Commit => match state.commit_operation(who)? {
                Some(id) => Effect::SketchCreated(id),
                None => Effect::None,
            },
            SketchOp::SpawnPrimitive { board, primitive } => {
                Effect::SketchCreated(state.spawn_primitive(who, *board, *primitive)?)
            }
        },
        Body::DrawRequest { board } => {
            state.request_draw(who, *board)?;
            Effect::None
        }
        Body::DrawGrant { board, holder } => {
            state.grant_draw(*board, holder)?;
            Effect::None
        }
        Body::DrawRelease { board } => {
            state.release_draw(who, *board)?;
            Effect::None
        }
        Body::ConfigSwitch { config } => {
            state.avatar(who)?;
            state.set_config(*config);
            Effect::None
        }
        Body::TelepathySet { observee, mode } => {
            state.set_telepathy(who, observee.as_ref(), *mode)?;
            Effect::None
        }
        Body::Welcome { .. } | Body::Reject { .. } | Body::Nack { .. } | Body::Snapshot { .. } | Body::Heartbeat => {
            unreachable!("filtered by is_state_event")
        }
    };
    Ok(effect)
}

/// Id the next `begin_stroke` will hand out.
pub fn peek_next_stroke_id(state: &SessionState) -> StrokeId {
    StrokeId(state.next_id)
}

fn resolve_stroke(state: &SessionState, msg: &Message, stroke: Option<StrokeId>) -> Result<StrokeId, ApplyError> {
    match stroke {
        Some(id) => Ok(id),
        None => state.open_stroke_of(&msg.sender).ok_or_else(|| SceneError::NoOpenStroke(msg.sender.clone()).into()),
    }
}
