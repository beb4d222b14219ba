//! Seeded scenario generators for fuzzing and token stress runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{Action, ClientScript, Scenario, TimedAction};
use crate::geometry::Vec3;
use crate::scene::{AvatarId, BoardId, Color, ConfigKind, OperationKind, Primitive, PrimitiveKind, TelepathyMode};

/// Board-local spots where fuzzed strokes land, so selections hit them.
const HOTSPOTS: [(f64, f64); 4] = [(-0.5, 0.3), (0.4, 0.3), (-0.4, -0.35), (0.5, -0.3)];
const BOARD_SIZE: (f64, f64) = (2.0, 1.5);

fn stroke_at<R: Rng>(rng: &mut R, (x, y): (f64, f64)) -> Vec<Vec3> {
    let n = rng.gen_range(2..12);
    let dx = rng.gen_range(-0.1..0.1);
    let dy = rng.gen_range(-0.1..0.1);
    (0..n)
        .map(|k| {
            let t = f64::from(k) / f64::from(n - 1);
            Vec3::new(x + dx * t, y + dy * t, 0.0)
        })
        .collect()
}

fn hotspot_uv((x, y): (f64, f64)) -> (f64, f64) {
    (x / BOARD_SIZE.0, y / BOARD_SIZE.1)
}

fn small_offset<R: Rng>(rng: &mut R, r: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-r..r), rng.gen_range(-r..r), rng.gen_range(-r..r))
}

/// One weighted random step of a fuzz script.
fn fuzz_step<R: Rng>(rng: &mut R, boards: u32, others: &[AvatarId]) -> Vec<Action> {
    let board = BoardId(rng.gen_range(1..=u64::from(boards)));
    let spot = *HOTSPOTS.choose(rng).expect("non-empty");
    match rng.gen_range(0..100) {
        0..=24 => vec![Action::Walk { by: small_offset(rng, 0.05) }],
        25..=34 => {
            let (u, v) = (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            vec![Action::Look { board, u, v }]
        }
        35..=44 => vec![Action::RequestToken { board }],
        45..=49 => vec![Action::ReleaseToken { board }],
        50..=64 => {
            let points = stroke_at(rng, spot);
            vec![Action::Draw { board, points, points_per_message: rng.gen_range(1..6) }]
        }
        65..=74 => {
            let (u, v) = hotspot_uv(spot);
            vec![Action::Select { board, u, v }]
        }
        75..=84 => {
            let op = *OperationKind::PIE_ORDER.choose(rng).expect("non-empty");
            let from = small_offset(rng, 0.2);
            let to = from + small_offset(rng, 0.3);
            vec![Action::Operate { op, from, to, steps: rng.gen_range(1..4) }]
        }
        85..=86 => vec![Action::Deselect],
        87..=89 => {
            let kind = *[PrimitiveKind::Cube, PrimitiveKind::Sphere, PrimitiveKind::Cylinder]
                .choose(rng)
                .expect("non-empty");
            let d = rng.gen_range(0.05..0.3);
            let primitive = Primitive {
                kind,
                center: Vec3::new(spot.0, spot.1, d / 2.0),
                dimensions: Vec3::new(d, d, d),
                color: Color::BLACK,
            };
            vec![Action::Spawn { board, primitive }]
        }
        90..=92 => vec![Action::SwitchConfig { config: *ConfigKind::ALL.choose(rng).expect("non-empty") }],
        93..=96 => {
            let observee = if rng.gen_bool(0.8) { others.choose(rng).cloned() } else { None };
            let mode = *TelepathyMode::ALL.choose(rng).expect("non-empty");
            vec![Action::Telepathy { observee, mode }]
        }
        _ => vec![Action::Leave, Action::Join],
    }
}

/// A mixed workload: `clients` participants sharing `events` scripted
/// actions, roughly one per client per tick, over two boards.
pub fn fuzz_scenario(seed: u64, clients: usize, events: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boards = 2;
    let ids: Vec<AvatarId> = (0..clients).map(|k| AvatarId::new(format!("c{k}"))).collect();
    let mut scripts: Vec<ClientScript> = ids
        .iter()
        .enumerate()
        .map(|(k, id)| ClientScript {
            id: id.clone(),
            name: None,
            actions: vec![TimedAction { at: k as u64, action: Action::Join }],
        })
        .collect();
    let mut remaining = events.saturating_sub(clients);
    let mut clock = vec![clients as u64 + 2; clients];
    while remaining > 0 {
        let k = rng.gen_range(0..clients.max(1));
        let others: Vec<AvatarId> = ids.iter().filter(|o| **o != ids[k]).cloned().collect();
        for action in fuzz_step(&mut rng, boards, &others).into_iter().take(remaining) {
            // Rejoining needs the Goodbye to have gone through.
            let gap = if action == Action::Join { 4 } else { rng.gen_range(0..3) };
            clock[k] += gap;
            scripts[k].actions.push(TimedAction { at: clock[k], action });
            remaining -= 1;
        }
    }
    let duration = clock.iter().copied().max().unwrap_or(0) + 1;
    Scenario {
        seed,
        duration_ticks: duration,
        boards,
        config: ConfigKind::SideBySide,
        tick_ms: 50,
        link_delay_ticks: 1,
        jitter_ticks: 0,
        check_every_ticks: 10,
        clients: scripts,
    }
}

/// Four clients contending for two boards with jittery links. One early
/// token holder goes silent while others wait, and the run is long enough
/// for the relay to evict it.
pub fn token_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boards = 2u32;
    let ids: Vec<AvatarId> = (0..4).map(|k| AvatarId::new(format!("t{k}"))).collect();
    let mut scripts: Vec<ClientScript> = ids
        .iter()
        .map(|id| ClientScript {
            id: id.clone(),
            name: None,
            actions: vec![TimedAction { at: rng.gen_range(0..3), action: Action::Join }],
        })
        .collect();
    let silent = rng.gen_range(0..4);
    let silent_board = BoardId(rng.gen_range(1..=u64::from(boards)));
    // The victim asks first so it is the holder when it falls silent.
    scripts[silent].actions.push(TimedAction { at: 4, action: Action::RequestToken { board: silent_board } });
    scripts[silent].actions.push(TimedAction { at: 14, action: Action::Disconnect { silent: true } });

    for (k, script) in scripts.iter_mut().enumerate() {
        if k == silent {
            continue;
        }
        let mut t = 8 + rng.gen_range(0..4);
        for _ in 0..rng.gen_range(4..9) {
            let board = if rng.gen_bool(0.5) { silent_board } else { BoardId(rng.gen_range(1..=u64::from(boards))) };
            script.actions.push(TimedAction { at: t, action: Action::RequestToken { board } });
            t += rng.gen_range(1..4);
            let spot = *HOTSPOTS.choose(&mut rng).expect("non-empty");
            let points = stroke_at(&mut rng, spot);
            script.actions.push(TimedAction { at: t, action: Action::Draw { board, points, points_per_message: 3 } });
            t += rng.gen_range(0..3);
            if rng.gen_bool(0.8) {
                script.actions.push(TimedAction { at: t, action: Action::ReleaseToken { board } });
            }
            t += rng.gen_range(1..6);
            if rng.gen_bool(0.1) {
                script.actions.push(TimedAction { at: t, action: Action::Disconnect { silent: false } });
                t += rng.gen_range(1..5);
                script.actions.push(TimedAction { at: t, action: Action::Join });
                t += 3;
            }
        }
    }
    let last = scripts.iter().flat_map(|s| s.actions.iter().map(|a| a.at)).max().unwrap_or(0);
    Scenario {
        seed,
        duration_ticks: last + 1,
        boards,
        config: ConfigKind::SideBySide,
        tick_ms: 50,
        link_delay_ticks: 1,
        jitter_ticks: 2,
        check_every_ticks: 10,
        clients: scripts,
    }
}
