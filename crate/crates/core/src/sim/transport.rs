//! How frame bytes move between a simulated client and the relay.
//!
//! Timing always comes from the virtual network; the transport only decides
//! whether bytes are handed over in memory or pushed through a real
//! loopback TCP connection first.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    InProcess,
    #[serde(alias = "loopback_socket")]
    Socket,
}

impl std::str::FromStr for TransportKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in_process" => Ok(TransportKind::InProcess),
            "socket" | "loopback_socket" => Ok(TransportKind::Socket),
            other => Err(format!("unknown transport `{other}` (expected in_process or socket)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// Largest single write before the matching read drains it; keeps the
/// same-thread write/read pairing clear of full socket buffers.
const SOCKET_CHUNK: usize = 16 * 1024;

pub(crate) enum Carrier {
    InProcess,
    Socket { listener: TcpListener, pairs: BTreeMap<usize, (TcpStream, TcpStream)> },
}

impl Carrier {
    pub(crate) fn new(kind: TransportKind) -> io::Result<Carrier> {
        Ok(match kind {
            TransportKind::InProcess => Carrier::InProcess,
            TransportKind::Socket => Carrier::Socket { listener: TcpListener::bind("127.0.0.1:0")?, pairs: BTreeMap::new() },
        })
    }

    /// Opens the link for `client`, replacing any previous one.
    pub(crate) fn open(&mut self, client: usize) -> io::Result<()> {
        if let Carrier::Socket { listener, pairs } = self {
            let client_end = TcpStream::connect(listener.local_addr()?)?;
            let (server_end, _) = listener.accept()?;
            client_end.set_nodelay(true)?;
            server_end.set_nodelay(true)?;
            pairs.insert(client, (client_end, server_end));
        }
        Ok(())
    }

    /// Moves `bytes` across the link and returns what arrived.
    pub(crate) fn carry(&mut self, client: usize, dir: Direction, bytes: &[u8]) -> io::Result<Vec<u8>> {
        match self {
            Carrier::InProcess => Ok(bytes.to_vec()),
            Carrier::Socket { pairs, .. } => {
                let (c, s) = pairs
                    .get_mut(&client)
                    .ok_or_else(|| io::Error::new(io::ErrorKind::NotConnected, "link not open"))?;
                let (tx, rx) = match dir {
                    Direction::Up => (c, s),
                    Direction::Down => (s, c),
                };
                let mut out = vec![0u8; bytes.len()];
                for (src, dst) in bytes.chunks(SOCKET_CHUNK).zip(out.chunks_mut(SOCKET_CHUNK)) {
                    tx.write_all(src)?;
                    rx.read_exact(dst)?;
                }
                Ok(out)
            }
        }
    }
}
