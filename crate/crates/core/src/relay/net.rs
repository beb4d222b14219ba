//! TCP and WebSocket front end for [`Relay`].
//!
//! Both transports share one port. A connection whose first bytes are
//! `GET ` is upgraded to a WebSocket and carries exactly one wire frame
//! (length prefix included) per binary message; anything else is a raw
//! stream of wire frames. One thread owns the relay; per-connection
//! threads only move bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use tungstenite::Message as WsMessage;

use super::{ConnId, Outbound, Relay, RelayConfig};
use crate::protocol::{self, DecodeError, FrameDecoder, Message};

const POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub relay: RelayConfig,
    pub tick_hz: u32,
    /// Event log: one canonical JSON line per sequenced event.
    pub log_path: Option<PathBuf>,
}

#[allow(clippy::large_enum_variant)]
enum Event {
    Opened(ConnId, Sender<Outgoing>),
    Frame(ConnId, Message),
    Malformed(ConnId, String, bool),
    Closed(ConnId),
}

enum Outgoing {
    Frame(Vec<u8>),
    Close,
}

/// A bound, not yet running server.
pub struct RelayServer {
    listener: TcpListener,
    config: ServerConfig,
}

/// Handle to a running server. Dropping it does not stop the server; call
/// [`ServerHandle::shutdown`].
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads {
            let _ = t.join();
        }
    }

    /// Blocks until the server stops (it only does on shutdown or error).
    pub fn wait(self) {
        for t in self.threads {
            let _ = t.join();
        }
    }
}

impl RelayServer {
    pub fn bind(addr: &str, config: ServerConfig) -> io::Result<RelayServer> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        Ok(RelayServer { listener, config })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn spawn(self) -> io::Result<ServerHandle> {
        let addr = self.listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let log = match &self.config.log_path {
            Some(p) => Some(BufWriter::new(File::create(p)?)),
            None => None,
        };
        let (tx, rx) = mpsc::channel();
        let relay = Relay::new(self.config.relay);
        let tick = Duration::from_secs_f64(1.0 / f64::from(self.config.tick_hz.max(1)));
        let loop_stop = stop.clone();
        let event_loop = thread::Builder::new()
            .name("relay-loop".into())
            .spawn(move || run_loop(relay, rx, tick, log, loop_stop))?;
        let accept_stop = stop.clone();
        let listener = self.listener;
        let acceptor = thread::Builder::new()
            .name("relay-accept".into())
            .spawn(move || accept_loop(listener, tx, accept_stop))?;
        log::info!("relay listening on {addr}");
        Ok(ServerHandle { addr, stop, threads: vec![event_loop, acceptor] })
    }
}

fn accept_loop(listener: TcpListener, tx: Sender<Event>, stop: Arc<AtomicBool>) {
    let next = AtomicU64::new(1);
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let conn = ConnId(next.fetch_add(1, Ordering::SeqCst));
                log::debug!("{conn} from {peer}");
                let tx = tx.clone();
                let stop = stop.clone();
                let _ = thread::Builder::new().name(format!("relay-{conn}")).spawn(move || {
                    if let Err(e) = serve(conn, stream, tx.clone(), stop) {
                        log::debug!("{conn}: {e}");
                    }
                    let _ = tx.send(Event::Closed(conn));
                });
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
}

fn serve(conn: ConnId, stream: TcpStream, tx: Sender<Event>, stop: Arc<AtomicBool>) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let mut head = [0u8; 4];
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let n = peek_full(&stream, &mut head)?;
    if n == 4 && &head == b"GET " {
        serve_websocket(conn, stream, tx, stop)
    } else {
        serve_stream(conn, stream, tx, stop)
    }
}

fn peek_full(stream: &TcpStream, buf: &mut [u8]) -> io::Result<usize> {
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        let n = stream.peek(buf)?;
        if n == buf.len() || n == 0 || Instant::now() > deadline {
            return Ok(n);
        }
        thread::sleep(Duration::from_millis(1));
    }
}

fn serve_stream(conn: ConnId, stream: TcpStream, tx: Sender<Event>, stop: Arc<AtomicBool>) -> io::Result<()> {
    let (out_tx, out_rx) = mpsc::channel();
    if tx.send(Event::Opened(conn, out_tx)).is_err() {
        return Ok(());
    }
    let mut writer = stream.try_clone()?;
    let write_stop = stop.clone();
    let writer_thread = thread::spawn(move || {
        loop {
            match out_rx.recv_timeout(POLL * 10) {
                Ok(Outgoing::Frame(bytes)) => {
                    if writer.write_all(&bytes).is_err() {
                        break;
                    }
                }
                Ok(Outgoing::Close) | Err(RecvTimeoutError::Disconnected) => break,
                Err(RecvTimeoutError::Timeout) if write_stop.load(Ordering::SeqCst) => break,
                Err(RecvTimeoutError::Timeout) => {}
            }
        }
        let _ = writer.shutdown(Shutdown::Both);
    });

    let mut reader = stream;
    reader.set_read_timeout(Some(POLL * 10))?;
    let mut decoder = FrameDecoder::new();
    let mut buf = vec![0u8; 64 * 1024];
    let result = loop {
        if stop.load(Ordering::SeqCst) {
            break Ok(());
        }
        match reader.read(&mut buf) {
            Ok(0) => break Ok(()),
            Ok(n) => {
                decoder.push(&buf[..n]);
                while let Some(item) = decoder.next_message() {
                    let event = match item {
                        Ok(m) => Event::Frame(conn, m),
                        Err(e) => {
                            let fatal = matches!(e, DecodeError::FrameTooLarge { .. });
                            Event::Malformed(conn, e.to_string(), fatal)
                        }
                    };
                    if tx.send(event).is_err() {
                        break;
                    }
                }
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => break Err(e),
        }
    };
    let _ = writer_thread.join();
    result
}

fn serve_websocket(conn: ConnId, stream: TcpStream, tx: Sender<Event>, stop: Arc<AtomicBool>) -> io::Result<()> {
    let mut ws = tungstenite::accept(stream).map_err(|e| io::Error::new(ErrorKind::InvalidData, e.to_string()))?;
    ws.get_ref().set_read_timeout(Some(POLL))?;
    let (out_tx, out_rx) = mpsc::channel();
    if tx.send(Event::Opened(conn, out_tx)).is_err() {
        return Ok(());
    }
    loop {
        if stop.load(Ordering::SeqCst) {
            let _ = ws.close(None);
            return Ok(());
        }
        loop {
            match out_rx.try_recv() {
                Ok(Outgoing::Frame(bytes)) => {
                    ws.send(WsMessage::Binary(bytes)).map_err(ws_err)?;
                }
                Ok(Outgoing::Close) | Err(mpsc::TryRecvError::Disconnected) => {
                    let _ = ws.close(None);
                    let _ = ws.flush();
                    return Ok(());
                }
                Err(mpsc::TryRecvError::Empty) => break,
            }
        }
        match ws.read() {
            Ok(WsMessage::Binary(bytes)) => {
                let event = match protocol::decode(&bytes) {
                    Ok(m) => Event::Frame(conn, m),
                    Err(e) => Event::Malformed(conn, e.to_string(), false),
                };
                if tx.send(event).is_err() {
                    return Ok(());
                }
            }
            Ok(WsMessage::Close(_)) => return Ok(()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(ws_err(e)),
        }
    }
}

fn ws_err(e: tungstenite::Error) -> io::Error {
    io::Error::other(e.to_string())
}

fn run_loop(
    mut relay: Relay,
    rx: Receiver<Event>,
    tick: Duration,
    mut log: Option<BufWriter<File>>,
    stop: Arc<AtomicBool>,
) {
    let start = Instant::now();
    let now_ms = || start.elapsed().as_millis() as u64;
    let mut outs: HashMap<ConnId, Sender<Outgoing>> = HashMap::new();
    let mut next_tick = Instant::now() + tick;
    while !stop.load(Ordering::SeqCst) {
        let wait = next_tick.saturating_duration_since(Instant::now()).min(POLL * 5);
        let out = match rx.recv_timeout(wait) {
            Ok(Event::Opened(conn, sender)) => {
                outs.insert(conn, sender);
                relay.connect(conn, now_ms());
                Vec::new()
            }
            Ok(Event::Frame(conn, msg)) => relay.receive(conn, msg, now_ms()),
            Ok(Event::Malformed(conn, err, fatal)) => relay.malformed(conn, &err, fatal, now_ms()),
            Ok(Event::Closed(conn)) => {
                outs.remove(&conn);
                relay.disconnect(conn, now_ms())
            }
            Err(RecvTimeoutError::Timeout) => Vec::new(),
            Err(RecvTimeoutError::Disconnected) => break,
        };
        dispatch(out, &mut outs);
        if Instant::now() >= next_tick {
            next_tick += tick;
            let out = relay.tick(now_ms());
            dispatch(out, &mut outs);
        }
        if let Some(w) = log.as_mut() {
            if let Err(e) = write_journal(w, relay.take_journal()) {
                log::error!("event log write failed: {e}");
            }
        } else {
            relay.take_journal();
        }
    }
    for (_, sender) in outs {
        let _ = sender.send(Outgoing::Close);
    }
}

fn dispatch(out: Vec<Outbound>, outs: &mut HashMap<ConnId, Sender<Outgoing>>) {
    for o in out {
        match o {
            Outbound::Send(conn, msg) => match protocol::encode(&msg) {
                Ok(bytes) => {
                    if let Some(s) = outs.get(&conn) {
                        let _ = s.send(Outgoing::Frame(bytes));
                    }
                }
                Err(e) => log::error!("dropping unencodable {}: {e}", msg.kind()),
            },
            Outbound::Close(conn) => {
                if let Some(s) = outs.remove(&conn) {
                    let _ = s.send(Outgoing::Close);
                }
            }
        }
    }
}

fn write_journal(w: &mut BufWriter<File>, journal: Vec<Message>) -> io::Result<()> {
    if journal.is_empty() {
        return Ok(());
    }
    for msg in journal {
        let line = protocol::encode_payload(&msg).map_err(|e| io::Error::new(ErrorKind::InvalidData, e))?;
        w.write_all(&line)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}
