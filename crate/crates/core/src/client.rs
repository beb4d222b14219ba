//! Client-side mirror of the session, fed by relay output.

use thiserror::Error;

use crate::events::{self, ApplyError};
use crate::protocol::{Body, Message};
use crate::scene::{AvatarId, SessionState};
use crate::view::{self, ViewError, ViewerScene};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplicaError {
    #[error("event {0} arrived before Welcome")]
    NotJoined(u64),
    #[error("sequence gap: expected {expected}, got {got}")]
    Gap { expected: u64, got: u64 },
    #[error("relay event {seq} does not apply locally: {source}")]
    Diverged { seq: u64, source: ApplyError },
    #[error("join rejected: {0}")]
    Rejected(String),
}

/// What a handled message meant to the client.
#[derive(Debug, Clone, PartialEq)]
pub enum Received {
    Joined,
    Applied(u64),
    /// One of our inputs was refused.
    Refused { refused: String, reason: String },
    Ignored,
}

#[derive(Debug, Clone)]
pub struct Replica {
    id: AvatarId,
    state: Option<SessionState>,
    refusals: u64,
}

impl Replica {
    pub fn new(id: impl Into<AvatarId>) -> Replica {
        Replica { id: id.into(), state: None, refusals: 0 }
    }

    pub fn id(&self) -> &AvatarId {
        &self.id
    }

    pub fn state(&self) -> Option<&SessionState> {
        self.state.as_ref()
    }

    pub fn is_joined(&self) -> bool {
        self.state.is_some()
    }

    pub fn seq(&self) -> u64 {
        self.state.as_ref().map_or(0, |s| s.seq)
    }

    pub fn hash(&self) -> Option<String> {
        self.state.as_ref().map(SessionState::hash)
    }

    pub fn refusals(&self) -> u64 {
        self.refusals
    }

    /// This client's composed view of the current replica state.
    pub fn view(&self) -> Option<Result<ViewerScene, ViewError>> {
        self.state.as_ref().map(|s| view::compose_view(s, &self.id))
    }

    pub fn handle(&mut self, msg: &Message) -> Result<Received, ReplicaError> {
        match &msg.body {
            Body::Welcome { snapshot } => {
                self.state = Some(snapshot.clone());
                Ok(Received::Joined)
            }
            Body::Reject { reason } => Err(ReplicaError::Rejected(reason.clone())),
            Body::Nack { refused, reason, .. } => {
                self.refusals += 1;
                Ok(Received::Refused { refused: refused.clone(), reason: reason.clone() })
            }
            Body::Heartbeat | Body::Snapshot { .. } => Ok(Received::Ignored),
            _ => {
                let state = self.state.as_mut().ok_or(ReplicaError::NotJoined(msg.seq))?;
                if msg.seq != state.seq + 1 {
                    return Err(ReplicaError::Gap { expected: state.seq + 1, got: msg.seq });
                }
                events::apply(state, msg).map_err(|source| ReplicaError::Diverged { seq: msg.seq, source })?;
                Ok(Received::Applied(msg.seq))
            }
        }
    }
}
