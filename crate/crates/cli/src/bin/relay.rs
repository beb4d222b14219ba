//! Runs the relay on a TCP port; WebSocket clients connect to the same port.

use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::Parser;
use mirrorboard::relay::net::{RelayServer, ServerConfig};
use mirrorboard::{ConfigKind, RelayConfig};

#[derive(Debug, Parser)]
#[command(version, about = "Sequencing relay for shared-board sessions")]
struct Args {
    /// Address to listen on.
    #[arg(long, env = "COLLAB_LISTEN", default_value = "127.0.0.1:7700")]
    listen: String,
    /// Number of shared vertical boards.
    #[arg(long, env = "COLLAB_BOARDS", default_value_t = 1)]
    boards: u32,
    /// Initial configuration: side_by_side, mirrored or eyes_free.
    #[arg(long, env = "COLLAB_CONFIG", default_value = "side_by_side")]
    config: ConfigKind,
    /// Relay ticks per second (avatar updates are batched per tick).
    #[arg(long = "tick-hz", env = "COLLAB_TICK_HZ", default_value_t = 20)]
    tick_hz: u32,
    /// Append every sequenced event to this file, one JSON object per line.
    #[arg(long, env = "COLLAB_LOG")]
    log: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    ensure!(args.boards >= 1, "--boards must be at least 1");
    ensure!((1..=1000).contains(&args.tick_hz), "--tick-hz must be between 1 and 1000");
    let config = ServerConfig {
        relay: RelayConfig { boards: args.boards, config: args.config, ..RelayConfig::default() },
        tick_hz: args.tick_hz,
        log_path: args.log,
    };
    let server = RelayServer::bind(&args.listen, config).with_context(|| format!("binding {}", args.listen))?;
    let handle = server.spawn().context("starting relay")?;
    // Scripts read this line to learn the port when listening on :0.
    println!("listening on {}", handle.local_addr());
    handle.wait();
    Ok(())
}
