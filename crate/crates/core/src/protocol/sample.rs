//! Seeded random messages covering every kind, for fuzzing the codec.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Body, Message, SketchOp};
use crate::geometry::{Frame, Pose, Ray, Vec3};
use crate::scene::{
    AvatarId, BoardId, Color, ConfigKind, OperationKind, Primitive, PrimitiveKind, SessionState, StrokeId,
    TelepathyMode,
};

/// Float spanning many magnitudes, signs and a few exact values.
pub fn random_f64<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    match rng.gen_range(0..6) {
        0 => 0.0,
        1 => *[1.0, -1.0, 0.5, 1e-300, -2.5e300, 0.1].choose(rng).expect("non-empty"),
        2 => rng.gen_range(-1.0..1.0),
        3 => rng.gen_range(-1e6..1e6),
        4 => rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-30..30)),
        _ => f64::from_bits(rng.gen::<u64>() & 0x7fef_ffff_ffff_ffff),
    }
}

pub fn random_vec3<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::new(random_f64(rng), random_f64(rng), random_f64(rng))
}

fn unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if let Some(n) = v.normalized().filter(|_| v.norm() > 1e-3) {
            return n;
        }
    }
}

pub fn random_pose<R: Rng + ?Sized>(rng: &mut R) -> Pose {
    let position = Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
    loop {
        if let Ok(frame) = Frame::look(unit(rng), unit(rng)) {
            return Pose::new(position, frame);
        }
    }
}

fn avatar<R: Rng + ?Sized>(rng: &mut R) -> AvatarId {
    const NAMES: [&str; 6] = ["a", "b", "carol", "d-4", "\u{e9}l\u{e8}ve", "x\"y\\z"];
    AvatarId::new(*NAMES.choose(rng).expect("non-empty"))
}

fn text<R: Rng + ?Sized>(rng: &mut R) -> String {
    let len = rng.gen_range(0..12);
    (0..len).map(|_| *['a', 'Z', ' ', '\n', '"', '\u{2603}', '\u{1F600}', '\\'].choose(rng).expect("non-empty")).collect()
}

fn color<R: Rng + ?Sized>(rng: &mut R) -> Color {
    Color::new(rng.gen(), rng.gen(), rng.gen()).expect("unit interval")
}

/// A small but populated session: joined avatars, a queued token and a
/// sketch.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R) -> SessionState {
    let config = *ConfigKind::ALL.choose(rng).expect("non-empty");
    let mut s = SessionState::new(rng.gen_range(1..4), config);
    let board = s.boards[0].id;
    let a = AvatarId::new("a");
    let b = AvatarId::new("b");
    s.join(&a, "A").expect("fresh");
    s.join(&b, "B").expect("fresh");
    s.request_draw(&a, board).expect("fresh");
    s.grant_draw(board, &a).expect("queued");
    s.request_draw(&b, board).expect("fresh");
    let stroke = s.begin_stroke(&a, board, color(rng), 0.01).expect("holder");
    let points: Vec<Vec3> =
        (0..rng.gen_range(1..6)).map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.7..0.7), 0.0)).collect();
    s.append_stroke_points(&a, stroke, &points).expect("open");
    if rng.gen_bool(0.5) {
        s.end_stroke(&a, stroke).expect("non-empty");
    }
    s
}

pub fn random_body<R: Rng + ?Sized>(rng: &mut R) -> Body {
    let board = BoardId(rng.gen_range(0..100));
    let stroke = |rng: &mut R| rng.gen_bool(0.5).then(|| StrokeId(rng.gen()));
    match rng.gen_range(0..Body::KINDS.len() + 5) {
        0 => Body::Hello { name: text(rng) },
        1 => Body::Welcome { snapshot: random_state(rng) },
        2 => Body::Reject { reason: text(rng) },
        3 => Body::Nack { at_seq: rng.gen(), refused: text(rng), reason: text(rng) },
        4 => Body::Goodbye,
        5 => Body::AvatarUpdate { head: random_pose(rng), left_hand: random_pose(rng), right_hand: random_pose(rng) },
        6 => Body::StrokeBegin { board, color: color(rng), width: random_f64(rng), stroke: stroke(rng) },
        7 => Body::StrokePoints { stroke: stroke(rng), points: (0..rng.gen_range(0..20)).map(|_| random_vec3(rng)).collect() },
        8 => Body::StrokeEnd { stroke: stroke(rng) },
        9 => Body::DrawRequest { board },
        10 => Body::DrawGrant { board, holder: avatar(rng) },
        11 => Body::DrawRelease { board },
        12 => Body::ConfigSwitch { config: *ConfigKind::ALL.choose(rng).expect("non-empty") },
        13 => Body::TelepathySet {
            observee: rng.gen_bool(0.7).then(|| avatar(rng)),
            mode: *TelepathyMode::ALL.choose(rng).expect("non-empty"),
        },
        14 => Body::Snapshot { state: random_state(rng) },
        15 => Body::Heartbeat,
        _ => Body::SketchOp(random_sketch_op(rng)),
    }
}

fn random_sketch_op<R: Rng + ?Sized>(rng: &mut R) -> SketchOp {
    match rng.gen_range(0..6) {
        0 => SketchOp::Select { ray: Ray::new(random_pose(rng).position, unit(rng)).expect("unit direction") },
        1 => SketchOp::Deselect,
        2 => SketchOp::Choose { slot: *OperationKind::PIE_ORDER.choose(rng).expect("non-empty") },
        3 => SketchOp::Update { hand: random_pose(rng) },
        4 => SketchOp::Commit,
        _ => SketchOp::SpawnPrimitive {
            board: BoardId(rng.gen_range(0..100)),
            primitive: Primitive {
                kind: *[PrimitiveKind::Cube, PrimitiveKind::Sphere, PrimitiveKind::Cylinder].choose(rng).expect("non-empty"),
                center: random_vec3(rng),
                dimensions: Vec3::new(rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0)),
                color: color(rng),
            },
        },
    }
}

pub fn random_message<R: Rng + ?Sized>(rng: &mut R) -> Message {
    Message { seq: rng.gen(), ts: rng.gen(), sender: avatar(rng), body: random_body(rng) }
}
