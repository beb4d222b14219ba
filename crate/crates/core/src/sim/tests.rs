use super::*;
use crate::geometry::Vec3;
use crate::scene::{AvatarId, BoardId, OperationKind};

fn at(at: u64, action: Action) -> TimedAction {
    TimedAction { at, action }
}

fn two_clients(actions_a: Vec<TimedAction>, actions_b: Vec<TimedAction>) -> Scenario {
    Scenario {
        seed: 1,
        duration_ticks: 80,
        boards: 1,
        config: crate::scene::ConfigKind::Mirrored,
        tick_ms: 50,
        link_delay_ticks: 1,
        jitter_ticks: 0,
        check_every_ticks: 5,
        clients: vec![
            ClientScript { id: AvatarId::new("a"), name: None, actions: actions_a },
            ClientScript { id: AvatarId::new("b"), name: None, actions: actions_b },
        ],
    }
}

#[test]
fn scripted_session_converges() {
    let board = BoardId(1);
    let points = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.1, 0.05, 0.0), Vec3::new(0.2, 0.0, 0.0)];
    let s = two_clients(
        vec![
            at(0, Action::Join),
            at(3, Action::RequestToken { board }),
            at(6, Action::Draw { board, points, points_per_message: 2 }),
            at(9, Action::ReleaseToken { board }),
            at(12, Action::Select { board, u: 0.05, v: 0.0 }),
            at(15, Action::Operate { op: OperationKind::Move, from: Vec3::ZERO, to: Vec3::new(0.1, 0.0, 0.0), steps: 3 }),
        ],
        vec![at(1, Action::Join), at(10, Action::Walk { by: Vec3::new(0.2, 0.0, 0.0) })],
    );
    let r = run(&s, TransportKind::InProcess).unwrap();
    assert!(r.passed, "{}", r.to_json());
    assert_eq!(r.client_hashes.len(), 2);
    assert!(r.client_hashes.values().all(|h| *h == r.relay_hash));
    assert!(r.convergence_lag_ticks.unwrap() <= CONVERGENCE_WINDOW_TICKS);
    assert_eq!(r.grants.len(), 1);
    assert_eq!(r.refusals.values().sum::<u64>(), 0);
}

#[test]
fn socket_transport_matches_in_process() {
    let s = fuzz_scenario(5, 3, 150);
    let a = run(&s, TransportKind::InProcess).unwrap();
    let b = run(&s, TransportKind::Socket).unwrap();
    assert!(a.passed, "{}", a.to_json());
    assert_eq!(a.relay_hash, b.relay_hash);
    assert_eq!(a.events_sequenced, b.events_sequenced);
    assert_eq!(a.frames_down, b.frames_down);
}

#[test]
fn runs_are_deterministic() {
    let s = fuzz_scenario(9, 4, 300);
    let a = run(&s, TransportKind::InProcess).unwrap();
    let b = run(&s, TransportKind::InProcess).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn silent_holder_is_evicted_and_token_moves_on() {
    let board = BoardId(1);
    let s = two_clients(
        vec![at(0, Action::Join), at(2, Action::RequestToken { board }), at(6, Action::Disconnect { silent: true })],
        vec![at(1, Action::Join), at(4, Action::RequestToken { board })],
    );
    let r = run(&s, TransportKind::InProcess).unwrap();
    assert!(r.passed, "{}", r.to_json());
    assert_eq!(r.evictions.len(), 1);
    let e = &r.evictions[0];
    assert_eq!(e.held, vec![board]);
    assert_eq!(e.regranted_at_ms, Some(e.evicted_at_ms));
    assert!(e.evicted_at_ms - e.silent_at_ms <= crate::relay::EVICTION_TIMEOUT_MS + 2 * 2_000);
    assert_eq!(r.grants.last().unwrap().holder, AvatarId::new("b"));
}

#[test]
fn token_scenarios_hold_the_token_invariants() {
    for seed in 0..5 {
        let r = run(&token_scenario(seed), TransportKind::InProcess).unwrap();
        assert!(r.passed, "seed {seed}: {}", r.to_json());
        assert_eq!(r.evictions.len(), 1, "seed {seed}");
    }
}

#[test]
fn scenario_json_round_trip_and_validation() {
    let s = fuzz_scenario(2, 2, 20);
    let text = serde_json::to_string(&s).unwrap();
    assert_eq!(Scenario::from_json(&text).unwrap(), s);
    let mut dup = s.clone();
    dup.clients[1].id = dup.clients[0].id.clone();
    assert!(matches!(run(&dup, TransportKind::InProcess), Err(SimError::Invalid(_))));
    let parsed = Scenario::from_json(
        r#"{"duration_ticks": 5, "clients": [{"id": "x", "actions": [{"at": 0, "do": "join"}]}]}"#,
    )
    .unwrap();
    assert_eq!(parsed.tick_ms, 50);
    assert_eq!(parsed.clients[0].actions[0].action, Action::Join);
}

#[test]
fn joins_alone_converge() {
    let clients = (0..4)
        .map(|k| ClientScript { id: AvatarId::new(format!("p{k}")), name: None, actions: vec![at(0, Action::Join)] })
        .collect();
    let s = Scenario { clients, duration_ticks: 1, ..two_clients(vec![], vec![]) };
    let r = run(&s, TransportKind::InProcess).unwrap();
    assert!(r.passed, "{}", r.to_json());
    assert_eq!(r.client_hashes.len(), 4);
    assert_eq!(r.events_sequenced, 4);
}

#[test]
fn invalid_scenarios_are_rejected() {
    let board = BoardId(1);
    let cases = [
        two_clients(vec![at(5, Action::Join), at(2, Action::Leave)], vec![]),
        two_clients(vec![at(0, Action::Join), at(1, Action::RequestToken { board: BoardId(9) })], vec![]),
        two_clients(
            vec![at(0, Action::Join), at(1, Action::Telepathy { observee: Some(AvatarId::new("zed")), mode: crate::scene::TelepathyMode::Windowed })],
            vec![],
        ),
        Scenario { boards: 0, ..two_clients(vec![at(0, Action::Join), at(1, Action::RequestToken { board })], vec![]) },
        Scenario { tick_ms: 0, ..two_clients(vec![], vec![]) },
    ];
    for s in cases {
        assert!(matches!(run(&s, TransportKind::InProcess), Err(SimError::Invalid(_))), "{s:?}");
    }
}

#[test]
fn transport_names_parse() {
    assert_eq!("socket".parse::<TransportKind>().unwrap(), TransportKind::Socket);
    assert_eq!("loopback_socket".parse::<TransportKind>().unwrap(), TransportKind::Socket);
    assert_eq!("in_process".parse::<TransportKind>().unwrap(), TransportKind::InProcess);
    assert!("udp".parse::<TransportKind>().is_err());
}
