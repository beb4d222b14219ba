use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Duration;

use mirrorboard::protocol::{encode, FrameDecoder};
use mirrorboard::{Body, ConfigKind, Message};
use serde_json::Value;

fn scenario_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/two_boards.json")
}

fn sim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sim"))
}

fn read_report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_a_passing_deterministic_report() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let status = sim().arg("run").arg(scenario_path()).arg("--report").arg(out).output().unwrap().status;
        assert!(status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let r = read_report(&a);
    assert_eq!(r["passed"], true);
    assert_eq!(r["violation_count"], 0);
    assert_eq!(r["evictions"][0]["avatar"], "ben");
}

#[test]
fn socket_transport_reaches_the_same_state() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("in_process.json");
    let b = dir.path().join("socket.json");
    let ok = sim().arg("run").arg(scenario_path()).arg("--report").arg(&a).output().unwrap().status;
    let ok2 = sim().arg("run").arg(scenario_path()).args(["--transport", "socket", "--report"]).arg(&b).output().unwrap().status;
    assert!(ok.success() && ok2.success());
    let (ra, rb) = (read_report(&a), read_report(&b));
    assert_eq!(ra["relay_hash"], rb["relay_hash"]);
    assert_eq!(rb["transport"], "socket");
}

#[test]
fn seed_flag_overrides_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let status = sim().arg("run").arg(scenario_path()).args(["--seed", "99", "--report"]).arg(&out).output().unwrap().status;
    assert!(status.success());
    assert_eq!(read_report(&out)["seed"], 99);
}

#[test]
fn fuzz_passes_and_reports() {
    let output = sim().args(["fuzz", "--clients", "4", "--events", "300", "--seed", "8"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "{stdout}");
    assert!(stdout.contains("PASSED"));
    assert!(stdout.contains("300 actions"));
}

#[test]
fn bad_input_exits_with_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"duration_ticks": 5, "clients": [], "bogus": 1}"#).unwrap();
    let out = sim().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    let missing = sim().arg("run").arg(dir.path().join("nope.json")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let transport = sim().arg("run").arg(scenario_path()).args(["--transport", "carrier_pigeon"]).output().unwrap();
    assert!(!transport.status.success());
}

#[test]
fn relay_binary_serves_clients_and_honours_env_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let mut child = Command::new(env!("CARGO_BIN_EXE_relay"))
        .args(["--listen", "127.0.0.1:0", "--config", "mirrored", "--tick-hz", "50", "--log"])
        .arg(&log)
        .env("COLLAB_BOARDS", "3")
        .env("RUST_LOG", "warn")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_owned();

    let mut stream = TcpStream::connect(&addr).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    stream.write_all(&encode(&Message::new("zoe", Body::Hello { name: "Zoe".into() })).unwrap()).unwrap();
    let mut decoder = FrameDecoder::new();
    let mut buf = [0u8; 4096];
    let welcome = loop {
        let n = stream.read(&mut buf).unwrap();
        assert!(n > 0, "relay closed the connection");
        decoder.push(&buf[..n]);
        if let Some(m) = decoder.next_message() {
            break m.unwrap();
        }
    };
    // The event loop writes the log right after sequencing the Hello.
    std::thread::sleep(Duration::from_millis(100));
    child.kill().unwrap();
    child.wait().unwrap();

    let Body::Welcome { snapshot } = welcome.body else { panic!("expected Welcome, got {}", welcome.kind()) };
    assert_eq!(snapshot.vertical_boards().count(), 3);
    assert_eq!(snapshot.config, ConfigKind::Mirrored);
    let logged = std::fs::read_to_string(&log).unwrap();
    assert_eq!(logged.lines().count(), 1);
    let event: Value = serde_json::from_str(logged.lines().next().unwrap()).unwrap();
    assert_eq!(event["kind"], "Hello");
    assert_eq!(event["seq"], 1);
}

#[test]
fn relay_rejects_invalid_flags() {
    let out = Command::new(env!("CARGO_BIN_EXE_relay")).args(["--config", "upside_down"]).output().unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_relay")).env("COLLAB_TICK_HZ", "0").output().unwrap();
    assert!(!out.status.success());
}
