//! The sequencing relay.
//!
//! [`Relay`] holds no sockets and no clock: transports feed it connection
//! events and decoded messages with the current session time and forward
//! whatever it returns. [`net`] wraps it in a TCP/WebSocket server.

pub mod net;

use std::collections::BTreeMap;

use crate::events::{self, ApplyError, Effect};
use crate::protocol::{Body, Message};
use crate::scene::{AvatarId, BoardId, ConfigKind, SessionState};

/// Connections silent for longer than this are evicted.
pub const EVICTION_TIMEOUT_MS: u64 = 10_000;
/// Sender id the relay uses for messages it originates.
pub const RELAY_SENDER: &str = "relay";
const MAX_AVATAR_ID_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConnId(pub u64);

impl std::fmt::Display for ConnId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "conn#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Outbound {
    Send(ConnId, Message),
    /// Close after flushing anything queued before it.
    Close(ConnId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayConfig {
    pub boards: u32,
    pub config: ConfigKind,
    pub eviction_timeout_ms: u64,
}

impl Default for RelayConfig {
    fn default() -> Self {
        RelayConfig { boards: 1, config: ConfigKind::SideBySide, eviction_timeout_ms: EVICTION_TIMEOUT_MS }
    }
}

#[derive(Debug, Clone)]
struct Conn {
    avatar: Option<AvatarId>,
    last_heard_ms: u64,
}

/// Authoritative session plus connection bookkeeping.
#[derive(Debug)]
pub struct Relay {
    state: SessionState,
    conns: BTreeMap<ConnId, Conn>,
    /// Latest unsequenced pose per connection; flushed on tick.
    pending_avatar: BTreeMap<ConnId, Message>,
    journal: Vec<Message>,
    eviction_timeout_ms: u64,
    now_ms: u64,
}

impl Relay {
    pub fn new(cfg: RelayConfig) -> Relay {
        Relay {
            state: SessionState::new(cfg.boards, cfg.config),
            conns: BTreeMap::new(),
            pending_avatar: BTreeMap::new(),
            journal: Vec::new(),
            eviction_timeout_ms: cfg.eviction_timeout_ms,
            now_ms: 0,
        }
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn hash(&self) -> String {
        self.state.hash()
    }

    /// Sequenced events since the last call, in order.
    pub fn take_journal(&mut self) -> Vec<Message> {
        std::mem::take(&mut self.journal)
    }

    /// Whether any received input still awaits sequencing.
    pub fn has_pending(&self) -> bool {
        !self.pending_avatar.is_empty()
    }

    pub fn connection_count(&self) -> usize {
        self.conns.len()
    }

    pub fn avatar_of(&self, conn: ConnId) -> Option<&AvatarId> {
        self.conns.get(&conn).and_then(|c| c.avatar.as_ref())
    }

    fn clock(&mut self, now_ms: u64) -> u64 {
        self.now_ms = self.now_ms.max(now_ms).max(self.state.now_ms);
        self.now_ms
    }

    pub fn connect(&mut self, conn: ConnId, now_ms: u64) {
        let now = self.clock(now_ms);
        self.conns.insert(conn, Conn { avatar: None, last_heard_ms: now });
    }

    /// Handles one decoded message from `conn`.
    pub fn receive(&mut self, conn: ConnId, mut msg: Message, now_ms: u64) -> Vec<Outbound> {
        let now = self.clock(now_ms);
        let mut out = Vec::new();
        let Some(c) = self.conns.get_mut(&conn) else { return out };
        c.last_heard_ms = now;
        let Some(avatar) = c.avatar.clone() else {
            self.handshake(conn, msg, &mut out);
            return out;
        };
        msg.sender = avatar;
        match msg.body {
            Body::Heartbeat => {}
            Body::AvatarUpdate { .. } => {
                self.pending_avatar.insert(conn, msg);
            }
            Body::Goodbye => {
                self.pending_avatar.remove(&conn);
                self.depart(conn, &mut out);
                out.push(Outbound::Close(conn));
            }
            Body::Hello { .. }
            | Body::Welcome { .. }
            | Body::Reject { .. }
            | Body::Nack { .. }
            | Body::Snapshot { .. }
            | Body::DrawGrant { .. } => {
                let reason = format!("`{}` is not accepted from clients here", msg.kind());
                out.push(self.nack(conn, msg.kind(), reason));
            }
            _ => {
                self.flush_avatar(conn, &mut out);
                self.sequence(Some(conn), msg, &mut out);
            }
        }
        out
    }

    /// A frame from `conn` could not be decoded. `fatal` closes the
    /// connection (the stream cannot be resynchronized).
    pub fn malformed(&mut self, conn: ConnId, error: &str, fatal: bool, now_ms: u64) -> Vec<Outbound> {
        let now = self.clock(now_ms);
        let mut out = Vec::new();
        if let Some(c) = self.conns.get_mut(&conn) {
            c.last_heard_ms = now;
            out.push(self.nack(conn, "<undecodable>", error.to_owned()));
            if fatal {
                out.extend(self.disconnect(conn, now));
                out.push(Outbound::Close(conn));
            }
        }
        out
    }

    /// The transport lost `conn`.
    pub fn disconnect(&mut self, conn: ConnId, now_ms: u64) -> Vec<Outbound> {
        self.clock(now_ms);
        let mut out = Vec::new();
        self.pending_avatar.remove(&conn);
        self.depart(conn, &mut out);
        out
    }

    /// Periodic work: sequences coalesced poses and evicts silent
    /// connections.
    pub fn tick(&mut self, now_ms: u64) -> Vec<Outbound> {
        let now = self.clock(now_ms);
        let mut out = Vec::new();
        for (_, msg) in std::mem::take(&mut self.pending_avatar) {
            self.sequence(None, msg, &mut out);
        }
        let stale: Vec<ConnId> = self
            .conns
            .iter()
            .filter(|(_, c)| now.saturating_sub(c.last_heard_ms) > self.eviction_timeout_ms)
            .map(|(id, _)| *id)
            .collect();
        for conn in stale {
            log::info!("evicting silent {conn}");
            self.depart(conn, &mut out);
            out.push(Outbound::Close(conn));
        }
        out
    }

    fn handshake(&mut self, conn: ConnId, msg: Message, out: &mut Vec<Outbound>) {
        let Body::Hello { .. } = msg.body else {
            self.reject(conn, format!("expected Hello, got {}", msg.kind()), out);
            return;
        };
        let id = &msg.sender;
        let problem = if id.as_str().is_empty() || id.as_str().len() > MAX_AVATAR_ID_LEN {
            Some(format!("avatar id must be 1..={MAX_AVATAR_ID_LEN} bytes"))
        } else if id.as_str() == RELAY_SENDER {
            Some(format!("`{RELAY_SENDER}` is reserved"))
        } else if self.state.avatars.contains_key(id) {
            Some(format!("avatar `{id}` is already connected"))
        } else {
            None
        };
        if let Some(reason) = problem {
            self.reject(conn, reason, out);
            return;
        }
        let seq = self.sequence(None, msg.clone(), out);
        let Some(seq) = seq else {
            self.reject(conn, "join refused".into(), out);
            return;
        };
        let welcome = Message {
            seq,
            ts: self.now_ms,
            sender: RELAY_SENDER.into(),
            body: Body::Welcome { snapshot: self.state.clone() },
        };
        out.push(Outbound::Send(conn, welcome));
        if let Some(c) = self.conns.get_mut(&conn) {
            c.avatar = Some(msg.sender);
        }
    }

    fn depart(&mut self, conn: ConnId, out: &mut Vec<Outbound>) {
        let Some(c) = self.conns.remove(&conn) else { return };
        if let Some(avatar) = c.avatar {
            self.sequence(None, Message::new(avatar, Body::Goodbye), out);
        }
    }

    fn flush_avatar(&mut self, conn: ConnId, out: &mut Vec<Outbound>) {
        if let Some(msg) = self.pending_avatar.remove(&conn) {
            self.sequence(None, msg, out);
        }
    }

    /// Assigns the next seq, applies and broadcasts. Refusals are nacked to
    /// `origin`. Returns the seq on success. Any token freed or requested
    /// is granted right away.
    fn sequence(&mut self, origin: Option<ConnId>, mut msg: Message, out: &mut Vec<Outbound>) -> Option<u64> {
        msg.seq = self.state.seq + 1;
        msg.ts = self.now_ms;
        self.resolve_stroke(&mut msg);
        match events::apply(&mut self.state, &msg) {
            Ok(effect) => {
                if let (Effect::StrokeOpened(id), Body::StrokeBegin { stroke, .. }) = (&effect, &mut msg.body) {
                    *stroke = Some(*id);
                }
                let seq = msg.seq;
                self.broadcast(&msg, out);
                self.journal.push(msg);
                let boards: Vec<BoardId> = self.state.draw_locks.keys().copied().collect();
                for board in boards {
                    self.grant_if_free(board, out);
                }
                Some(seq)
            }
            Err(e) => {
                log::debug!("refused {} from {}: {e}", msg.kind(), msg.sender);
                if let Some(conn) = origin {
                    out.push(self.nack(conn, msg.kind(), e.to_string()));
                }
                debug_assert!(!matches!(e, ApplyError::OutOfOrder { .. }));
                None
            }
        }
    }

    fn grant_if_free(&mut self, board: BoardId, out: &mut Vec<Outbound>) {
        if let Some(holder) = self.state.next_grant(board) {
            let grant = Message::new(RELAY_SENDER, Body::DrawGrant { board, holder });
            self.sequence(None, grant, out);
        }
    }

    /// Sequenced stroke traffic always names its stroke.
    fn resolve_stroke(&self, msg: &mut Message) {
        if let Body::StrokePoints { stroke: s @ None, .. } | Body::StrokeEnd { stroke: s @ None } = &mut msg.body {
            *s = self.state.open_stroke_of(&msg.sender);
        }
    }

    fn broadcast(&self, msg: &Message, out: &mut Vec<Outbound>) {
        for (id, c) in &self.conns {
            if c.avatar.is_some() {
                out.push(Outbound::Send(*id, msg.clone()));
            }
        }
    }

    fn nack(&self, conn: ConnId, refused: &str, reason: String) -> Outbound {
        let body = Body::Nack { at_seq: self.state.seq, refused: refused.to_owned(), reason };
        Outbound::Send(conn, Message { seq: 0, ts: self.now_ms, sender: RELAY_SENDER.into(), body })
    }

    fn reject(&mut self, conn: ConnId, reason: String, out: &mut Vec<Outbound>) {
        self.conns.remove(&conn);
        let msg = Message { seq: 0, ts: self.now_ms, sender: RELAY_SENDER.into(), body: Body::Reject { reason } };
        out.push(Outbound::Send(conn, msg));
        out.push(Outbound::Close(conn));
    }
}
