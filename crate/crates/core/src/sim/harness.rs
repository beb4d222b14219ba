//! Lock-step simulation: scripted clients, a virtual network with
//! per-link latency, the real relay, and checks after every tick.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::oracle::{self, LockMonitor};
use super::report::{EvictionRecord, VerificationReport};
use super::scenario::{Action, ClientScript, Scenario, TimedAction};
use super::transport::{Carrier, Direction, TransportKind};
use crate::client::{Received, Replica};
use crate::geometry::{Pose, Ray, Vec3};
use crate::protocol::{self, Body, FrameDecoder, Message, SketchOp};
use crate::relay::{ConnId, Outbound, Relay, RelayConfig, EVICTION_TIMEOUT_MS};
use crate::scene::{AvatarId, Color, OperationKind, SessionState};

/// Clients send a heartbeat this often, in ticks.
pub const HEARTBEAT_EVERY_TICKS: u64 = 40;
/// Replicas must match the relay this many ticks after quiescence.
pub const CONVERGENCE_WINDOW_TICKS: u64 = 2;
const COMPOSITION_TOLERANCE: f64 = 1e-9;
const STROKE_WIDTH: f64 = 0.01;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("transport failure: {0}")]
    Io(#[from] std::io::Error),
}

enum PacketKind {
    Open,
    Frame { bytes: Vec<u8>, heartbeat: bool },
    Close,
}

struct Packet {
    due: u64,
    conn: ConnId,
    kind: PacketKind,
}

#[derive(Default)]
struct Link {
    queue: VecDeque<Packet>,
    decoder: FrameDecoder,
    last_due: u64,
}

impl Link {
    fn busy(&self) -> bool {
        self.queue.iter().any(|p| !matches!(p.kind, PacketKind::Frame { heartbeat: true, .. }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Offline,
    Online,
    Silent { since_ms: u64 },
}

struct SimClient {
    id: AvatarId,
    name: String,
    actions: Vec<TimedAction>,
    cursor: usize,
    replica: Replica,
    conn: Option<ConnId>,
    mode: Mode,
    head: Pose,
    left: Pose,
    right: Pose,
    up: Link,
    down: Link,
}

impl SimClient {
    fn new(script: &ClientScript) -> SimClient {
        let actions = script.actions.clone();
        let (head, left, right) = SessionState::seat_pose(0);
        SimClient {
            id: script.id.clone(),
            name: script.name.clone().unwrap_or_else(|| script.id.to_string()),
            actions,
            cursor: 0,
            replica: Replica::new(script.id.clone()),
            conn: None,
            mode: Mode::Offline,
            head,
            left,
            right,
            up: Link::default(),
            down: Link::default(),
        }
    }

    fn online(&self) -> bool {
        self.mode == Mode::Online && self.conn.is_some()
    }
}

/// Network timing shared by all links.
struct Net {
    delay: u64,
    jitter: u64,
    rng: ChaCha8Rng,
}

impl Net {
    fn schedule(&mut self, link: &mut Link, now: u64, conn: ConnId, kind: PacketKind) {
        let extra = if self.jitter > 0 { self.rng.gen_range(0..=self.jitter) } else { 0 };
        let due = (now + self.delay + extra).max(link.last_due);
        link.last_due = due;
        link.queue.push_back(Packet { due, conn, kind });
    }
}

struct Sim {
    scenario: Scenario,
    clients: Vec<SimClient>,
    relay: Relay,
    net: Net,
    carrier: Carrier,
    conn_owner: BTreeMap<ConnId, usize>,
    next_conn: u64,
    monitor: LockMonitor,
    /// Recent relay states by seq, for checking lagging replicas.
    history: VecDeque<(u64, SessionState)>,
    report: VerificationReport,
    tick: u64,
}

/// Runs a scenario to quiescence and reports what the checks found.
pub fn run(scenario: &Scenario, transport: TransportKind) -> Result<VerificationReport, SimError> {
    validate(scenario)?;
    let mut sim = Sim::new(scenario.clone(), transport)?;
    sim.run();
    Ok(sim.report)
}

fn validate(s: &Scenario) -> Result<(), SimError> {
    if s.tick_ms == 0 {
        return Err(SimError::Invalid("tick_ms must be positive".into()));
    }
    if s.check_every_ticks == 0 {
        return Err(SimError::Invalid("check_every_ticks must be positive".into()));
    }
    if s.boards == 0 {
        return Err(SimError::Invalid("boards must be at least 1".into()));
    }
    let invalid = |msg: String| Err(SimError::Invalid(msg));
    let mut ids = std::collections::BTreeSet::new();
    for c in &s.clients {
        if !ids.insert(&c.id) {
            return invalid(format!("duplicate client id `{}`", c.id));
        }
    }
    for c in &s.clients {
        if let Some(w) = c.actions.windows(2).find(|w| w[1].at < w[0].at) {
            return invalid(format!("client `{}`: action at tick {} follows tick {}", c.id, w[1].at, w[0].at));
        }
        for a in &c.actions {
            let board = match &a.action {
                Action::Look { board, .. }
                | Action::RequestToken { board }
                | Action::ReleaseToken { board }
                | Action::Draw { board, .. }
                | Action::Select { board, .. }
                | Action::Spawn { board, .. } => Some(*board),
                Action::Telepathy { observee: Some(o), .. } if !ids.contains(o) => {
                    return invalid(format!("client `{}`: telepathy observee `{o}` is not declared", c.id));
                }
                _ => None,
            };
            if let Some(b) = board.filter(|b| !(1..=u64::from(s.boards)).contains(&b.0)) {
                return invalid(format!("client `{}`: board {b} is not one of the {} shared boards", c.id, s.boards));
            }
        }
    }
    Ok(())
}

impl Sim {
    fn new(scenario: Scenario, transport: TransportKind) -> Result<Sim, SimError> {
        let relay = Relay::new(RelayConfig {
            boards: scenario.boards,
            config: scenario.config,
            eviction_timeout_ms: EVICTION_TIMEOUT_MS,
        });
        let report = VerificationReport {
            seed: scenario.seed,
            transport,
            clients: scenario.clients.len(),
            actions: scenario.action_count(),
            tick_ms: scenario.tick_ms,
            ticks_run: 0,
            events_sequenced: 0,
            frames_up: 0,
            frames_down: 0,
            refusals: BTreeMap::new(),
            refused_kinds: BTreeMap::new(),
            sequenced_kinds: BTreeMap::new(),
            quiescent_tick: None,
            converged_tick: None,
            convergence_lag_ticks: None,
            max_replica_lag_events: 0,
            relay_hash: String::new(),
            client_hashes: BTreeMap::new(),
            grants: Vec::new(),
            evictions: Vec::new(),
            checks: BTreeMap::new(),
            violation_count: 0,
            violations: Vec::new(),
            passed: false,
        };
        Ok(Sim {
            clients: scenario.clients.iter().map(SimClient::new).collect(),
            relay,
            net: Net {
                delay: scenario.link_delay_ticks,
                jitter: scenario.jitter_ticks,
                rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            },
            carrier: Carrier::new(transport)?,
            conn_owner: BTreeMap::new(),
            next_conn: 1,
            monitor: LockMonitor::default(),
            history: VecDeque::new(),
            report,
            tick: 0,
            scenario,
        })
    }

    fn now_ms(&self) -> u64 {
        self.tick * self.scenario.tick_ms
    }

    fn run(&mut self) {
        let duration = self.scenario.duration_ticks;
        // Long enough for a silent client to be evicted and everything to
        // settle afterwards.
        let cap = duration + 2 * EVICTION_TIMEOUT_MS / self.scenario.tick_ms + 200;
        let mut quiescent = None;
        let mut converged = None;
        while self.tick <= cap {
            let scripted = self.tick < duration;
            if let Err(e) = self.step(scripted) {
                self.report.tally("transport", true);
                self.report.violate(self.tick, "transport", e.to_string());
                break;
            }
            if !scripted && quiescent.is_none() && self.inputs_idle() {
                quiescent = Some(self.tick);
            }
            if let Some(q) = quiescent {
                if converged.is_none() && self.converged() {
                    converged = Some(self.tick);
                }
                if converged.is_some() || self.tick >= q + CONVERGENCE_WINDOW_TICKS {
                    break;
                }
            }
            self.tick += 1;
        }
        self.finish(quiescent, converged);
    }

    fn step(&mut self, scripted: bool) -> std::io::Result<()> {
        if scripted {
            self.run_scripts()?;
        }
        self.heartbeats();
        self.relay_inbound()?;
        let out = self.relay.tick(self.now_ms());
        self.route(out);
        self.deliver_downlinks()?;
        self.after_tick();
        Ok(())
    }

    // ---- clients -----------------------------------------------------------

    fn run_scripts(&mut self) -> std::io::Result<()> {
        for i in 0..self.clients.len() {
            while let Some(a) = self.clients[i].actions.get(self.clients[i].cursor) {
                if a.at > self.tick {
                    break;
                }
                let action = a.action.clone();
                self.clients[i].cursor += 1;
                self.perform(i, action)?;
            }
        }
        Ok(())
    }

    fn emit(&mut self, i: usize, body: Body) {
        let c = &mut self.clients[i];
        let Some(conn) = c.conn else { return };
        if c.mode != Mode::Online {
            return;
        }
        let heartbeat = matches!(body, Body::Heartbeat);
        let bytes = protocol::encode(&Message::new(c.id.clone(), body)).expect("client messages are encodable");
        self.net.schedule(&mut c.up, self.tick, conn, PacketKind::Frame { bytes, heartbeat });
    }

    fn emit_pose(&mut self, i: usize) {
        let c = &self.clients[i];
        let body = Body::AvatarUpdate { head: c.head, left_hand: c.left, right_hand: c.right };
        self.emit(i, body);
    }

    fn board_point(&self, i: usize, board: crate::scene::BoardId, u: f64, v: f64) -> Option<Vec3> {
        let b = self.clients[i].replica.state()?.board(board).ok()?;
        Some(b.pose.to_world_point(Vec3::new(u * b.width, v * b.height, 0.0)))
    }

    fn perform(&mut self, i: usize, action: Action) -> std::io::Result<()> {
        let mode = self.clients[i].mode;
        if matches!(mode, Mode::Silent { .. }) {
            return Ok(());
        }
        if mode == Mode::Offline && action != Action::Join {
            return Ok(());
        }
        match action {
            Action::Join => {
                if mode != Mode::Offline {
                    return Ok(());
                }
                let conn = ConnId(self.next_conn);
                self.next_conn += 1;
                self.conn_owner.insert(conn, i);
                self.carrier.open(i)?;
                let c = &mut self.clients[i];
                c.conn = Some(conn);
                c.mode = Mode::Online;
                c.replica = Replica::new(c.id.clone());
                self.net.schedule(&mut c.up, self.tick, conn, PacketKind::Open);
                let name = c.name.clone();
                self.emit(i, Body::Hello { name });
            }
            Action::Leave => {
                self.emit(i, Body::Goodbye);
                self.close_client(i);
            }
            Action::Disconnect { silent: false } => self.close_client(i),
            Action::Disconnect { silent: true } => {
                let now = self.now_ms();
                self.clients[i].mode = Mode::Silent { since_ms: now };
            }
            Action::SetPose { head, left_hand, right_hand } => {
                let c = &mut self.clients[i];
                c.head = head.unwrap_or(c.head);
                c.left = left_hand.unwrap_or(c.left);
                c.right = right_hand.unwrap_or(c.right);
                self.emit_pose(i);
            }
            Action::Walk { by } => {
                let c = &mut self.clients[i];
                for p in [&mut c.head, &mut c.left, &mut c.right] {
                    p.position += by;
                }
                self.emit_pose(i);
            }
            Action::Look { board, u, v } => {
                if let Some(target) = self.board_point(i, board, u, v) {
                    let c = &mut self.clients[i];
                    if let Ok(head) = Pose::looking(c.head.position, target - c.head.position) {
                        c.head = head;
                    }
                }
                self.emit_pose(i);
            }
            Action::RequestToken { board } => self.emit(i, Body::DrawRequest { board }),
            Action::ReleaseToken { board } => self.emit(i, Body::DrawRelease { board }),
            Action::Draw { board, points, points_per_message } => {
                self.emit(i, Body::StrokeBegin { board, color: Color::BLACK, width: STROKE_WIDTH, stroke: None });
                for chunk in points.chunks(points_per_message.max(1)) {
                    self.emit(i, Body::StrokePoints { stroke: None, points: chunk.to_vec() });
                }
                self.emit(i, Body::StrokeEnd { stroke: None });
            }
            Action::Select { board, u, v } => {
                let origin = self.clients[i].head.position;
                let ray = self
                    .board_point(i, board, u, v)
                    .and_then(|t| Ray::towards(origin, t).ok())
                    .unwrap_or_else(|| self.clients[i].head.forward_ray());
                self.emit(i, Body::SketchOp(SketchOp::Select { ray }));
            }
            Action::Deselect => self.emit(i, Body::SketchOp(SketchOp::Deselect)),
            Action::Operate { op, from, to, steps } => self.operate(i, op, from, to, steps),
            Action::Spawn { board, primitive } => {
                self.emit(i, Body::SketchOp(SketchOp::SpawnPrimitive { board, primitive }))
            }
            Action::SwitchConfig { config } => self.emit(i, Body::ConfigSwitch { config }),
            Action::Telepathy { observee, mode } => self.emit(i, Body::TelepathySet { observee, mode }),
        }
        Ok(())
    }

    fn operate(&mut self, i: usize, op: OperationKind, from: Vec3, to: Vec3, steps: u32) {
        let c = &self.clients[i];
        let center = c
            .replica
            .state()
            .and_then(|s| {
                let sketch = s.selection(&c.id).sketch()?;
                let (board, sk) = s.sketch(sketch).ok()?;
                Some(board.pose.to_world_point(sk.transform.center()))
            })
            .unwrap_or(c.head.position + c.head.frame.forward);
        self.clients[i].right.position = center + from;
        self.emit_pose(i);
        self.emit(i, Body::SketchOp(SketchOp::Choose { slot: op }));
        if op == OperationKind::Delete {
            return;
        }
        let steps = steps.max(1);
        for k in 1..=steps {
            let hand = center + from.lerp(to, f64::from(k) / f64::from(steps));
            self.clients[i].right.position = hand;
            self.emit_pose(i);
            let hand = self.clients[i].right;
            self.emit(i, Body::SketchOp(SketchOp::Update { hand }));
        }
        self.emit(i, Body::SketchOp(SketchOp::Commit));
    }

    fn close_client(&mut self, i: usize) {
        let c = &mut self.clients[i];
        if let Some(conn) = c.conn.take() {
            self.net.schedule(&mut c.up, self.tick, conn, PacketKind::Close);
        }
        c.mode = Mode::Offline;
    }

    fn heartbeats(&mut self) {
        if !self.tick.is_multiple_of(HEARTBEAT_EVERY_TICKS) {
            return;
        }
        for i in 0..self.clients.len() {
            if self.clients[i].online() {
                self.emit(i, Body::Heartbeat);
            }
        }
    }

    // ---- relay side ----------------------------------------------------------

    fn relay_inbound(&mut self) -> std::io::Result<()> {
        let now = self.now_ms();
        for i in 0..self.clients.len() {
            while self.clients[i].up.queue.front().is_some_and(|p| p.due <= self.tick) {
                let packet = self.clients[i].up.queue.pop_front().expect("checked");
                let out = match packet.kind {
                    PacketKind::Open => {
                        self.relay.connect(packet.conn, now);
                        Vec::new()
                    }
                    PacketKind::Close => self.relay.disconnect(packet.conn, now),
                    PacketKind::Frame { bytes, .. } => {
                        self.report.frames_up += 1;
                        let arrived = self.carrier.carry(i, Direction::Up, &bytes)?;
                        let link = &mut self.clients[i].up;
                        link.decoder.push(&arrived);
                        let mut out = Vec::new();
                        for item in link.decoder.drain_messages() {
                            match item {
                                Ok(msg) => out.extend(self.relay.receive(packet.conn, msg, now)),
                                Err(e) => {
                                    self.report.violate(self.tick, "codec", format!("uplink {i}: {e}"));
                                    out.extend(self.relay.malformed(packet.conn, &e.to_string(), false, now));
                                }
                            }
                        }
                        out
                    }
                };
                self.route(out);
            }
        }
        Ok(())
    }

    fn route(&mut self, out: Vec<Outbound>) {
        for o in out {
            let (conn, kind) = match o {
                Outbound::Send(conn, msg) => {
                    let bytes = protocol::encode(&msg).expect("relay messages are encodable");
                    (conn, PacketKind::Frame { bytes, heartbeat: false })
                }
                Outbound::Close(conn) => (conn, PacketKind::Close),
            };
            if let Some(&i) = self.conn_owner.get(&conn) {
                self.net.schedule(&mut self.clients[i].down, self.tick, conn, kind);
            }
        }
    }

    fn deliver_downlinks(&mut self) -> std::io::Result<()> {
        for i in 0..self.clients.len() {
            while self.clients[i].down.queue.front().is_some_and(|p| p.due <= self.tick) {
                let packet = self.clients[i].down.queue.pop_front().expect("checked");
                let current = self.clients[i].conn == Some(packet.conn);
                match packet.kind {
                    PacketKind::Close => {
                        if current || matches!(self.clients[i].mode, Mode::Silent { .. }) {
                            let c = &mut self.clients[i];
                            c.conn = None;
                            c.mode = Mode::Offline;
                        }
                    }
                    PacketKind::Open => {}
                    PacketKind::Frame { bytes, .. } => {
                        self.report.frames_down += 1;
                        let arrived = self.carrier.carry(i, Direction::Down, &bytes)?;
                        let link = &mut self.clients[i].down;
                        link.decoder.push(&arrived);
                        let msgs = link.decoder.drain_messages();
                        if !(current && self.clients[i].mode == Mode::Online) {
                            continue;
                        }
                        for item in msgs {
                            match item {
                                Ok(msg) => self.client_receive(i, &msg),
                                Err(e) => self.report.violate(self.tick, "codec", format!("downlink {i}: {e}")),
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn client_receive(&mut self, i: usize, msg: &Message) {
        let c = &mut self.clients[i];
        match c.replica.handle(msg) {
            Ok(Received::Joined) => {
                if let Some(me) = c.replica.state().and_then(|s| s.avatars.get(&c.id)) {
                    c.head = me.head;
                    c.left = me.left_hand;
                    c.right = me.right_hand;
                }
            }
            Ok(Received::Refused { refused, .. }) => {
                *self.report.refusals.entry(c.id.clone()).or_default() += 1;
                *self.report.refused_kinds.entry(refused).or_default() += 1;
            }
            Ok(_) => {}
            Err(e) => {
                let id = c.id.clone();
                self.report.tally("replica", true);
                self.report.violate_for(self.tick, "replica", Some(msg.seq), Some(&id), e.to_string());
            }
        }
    }

    // ---- checks --------------------------------------------------------------

    fn after_tick(&mut self) {
        let batch = self.relay.take_journal();
        self.report.events_sequenced += batch.len() as u64;
        for m in &batch {
            *self.report.sequenced_kinds.entry(kind_label(&m.body)).or_default() += 1;
        }
        if !batch.is_empty() {
            self.record_evictions(&batch);
            let failures = self.monitor.observe(&batch);
            self.report.tally("token", !failures.is_empty());
            for (check, detail) in failures {
                self.report.violate(self.tick, check, detail);
            }
            let state = self.relay.state();
            self.history.push_back((state.seq, state.clone()));
            let keep = (self.scenario.link_delay_ticks + self.scenario.jitter_ticks + 3) as usize;
            while self.history.len() > keep {
                self.history.pop_front();
            }
        }
        if self.tick.is_multiple_of(self.scenario.check_every_ticks) {
            self.periodic_checks();
        }
    }

    fn record_evictions(&mut self, batch: &[Message]) {
        for (pos, m) in batch.iter().enumerate() {
            if !matches!(m.body, Body::Goodbye) {
                continue;
            }
            let Some(client) = self.clients.iter().find(|c| c.id == m.sender) else { continue };
            let Mode::Silent { since_ms } = client.mode else { continue };
            // The monitor has not seen this batch yet, so grants earlier in
            // it are replayed here.
            let mut held: Vec<_> = self
                .relay
                .state()
                .draw_locks
                .keys()
                .copied()
                .filter(|b| self.monitor.holder(*b) == Some(&m.sender))
                .collect();
            for g in &batch[..pos] {
                match &g.body {
                    Body::DrawGrant { board, holder } if *holder == m.sender && !held.contains(board) => {
                        held.push(*board)
                    }
                    Body::DrawRelease { board } if g.sender == m.sender => held.retain(|b| b != board),
                    _ => {}
                }
            }
            let regranted_at_ms = batch[pos + 1..]
                .iter()
                .find(|g| matches!(&g.body, Body::DrawGrant { board, .. } if held.contains(board)))
                .map(|g| g.ts);
            self.report.evictions.push(EvictionRecord {
                avatar: m.sender.clone(),
                silent_at_ms: since_ms,
                evicted_at_ms: m.ts,
                held,
                regranted_at_ms,
            });
        }
    }

    fn periodic_checks(&mut self) {
        let state = self.relay.state();
        let inv = state.check_invariants();
        self.report.tally("invariants", inv.is_err());
        if let Err(e) = inv {
            self.report.violate(self.tick, "invariants", e);
        }
        let failures = oracle::check_compositions(self.relay.state(), COMPOSITION_TOLERANCE);
        self.report.tally("composition", !failures.is_empty());
        for (check, detail) in failures {
            self.report.violate(self.tick, check, detail);
        }
        let relay_seq = self.relay.state().seq;
        let mut mismatches = Vec::new();
        for c in self.clients.iter().filter(|c| c.online()) {
            let Some(rs) = c.replica.state() else { continue };
            self.report.max_replica_lag_events = self.report.max_replica_lag_events.max(relay_seq - rs.seq);
            let Some((_, expected)) = self.history.iter().find(|(seq, _)| *seq == rs.seq) else { continue };
            if rs != expected {
                let detail = format!("expected state hash {}, replica has {}", expected.hash(), rs.hash());
                mismatches.push((rs.seq, c.id.clone(), detail));
            }
        }
        self.report.tally("replica_prefix", !mismatches.is_empty());
        for (seq, id, detail) in mismatches {
            self.report.violate_for(self.tick, "replica_prefix", Some(seq), Some(&id), detail);
        }
    }

    fn inputs_idle(&self) -> bool {
        !self.relay.has_pending()
            && self.clients.iter().all(|c| !c.up.busy() && !matches!(c.mode, Mode::Silent { .. }))
    }

    fn converged(&self) -> bool {
        let relay = self.relay.state();
        self.clients
            .iter()
            .filter(|c| c.online())
            .all(|c| c.replica.state().is_some_and(|s| s.seq == relay.seq && s == relay))
    }

    fn finish(&mut self, quiescent: Option<u64>, converged: Option<u64>) {
        self.report.ticks_run = self.tick + 1;
        self.report.quiescent_tick = quiescent;
        self.report.converged_tick = converged;
        self.report.relay_hash = self.relay.hash();
        self.report.grants = std::mem::take(&mut self.monitor.grants);
        let relay_hash = self.report.relay_hash.clone();
        let mut diverged = Vec::new();
        for c in self.clients.iter().filter(|c| c.online()) {
            let h = c.replica.hash().unwrap_or_default();
            if h != relay_hash {
                diverged.push((c.replica.seq(), c.id.clone(), h.clone()));
            }
            self.report.client_hashes.insert(c.id.clone(), h);
        }
        self.report.convergence_lag_ticks = converged.zip(quiescent).map(|(c, q)| c - q);
        let ok = quiescent.is_some() && converged.is_some() && diverged.is_empty();
        self.report.tally("convergence", !ok);
        if quiescent.is_none() {
            self.report.violate(self.tick, "convergence", "session never went quiet".into());
        } else if converged.is_none() && diverged.is_empty() {
            let detail = format!("not converged within {CONVERGENCE_WINDOW_TICKS} ticks of quiescence");
            self.report.violate(self.tick, "convergence", detail);
        }
        for (seq, id, h) in diverged {
            let detail = format!("expected relay hash {relay_hash}, replica has {h}");
            self.report.violate_for(self.tick, "convergence", Some(seq), Some(&id), detail);
        }
        self.report.passed = self.report.violation_count == 0;
    }
}

fn kind_label(body: &Body) -> String {
    match body {
        Body::SketchOp(op) => format!("SketchOp.{}", sketch_op_name(op)),
        other => other.kind().to_owned(),
    }
}

fn sketch_op_name(op: &SketchOp) -> &'static str {
    match op {
        SketchOp::Select { .. } => "select",
        SketchOp::Deselect => "deselect",
        SketchOp::Choose { .. } => "choose",
        SketchOp::Update { .. } => "update",
        SketchOp::Commit => "commit",
        SketchOp::SpawnPrimitive { .. } => "spawn_primitive",
    }
}
