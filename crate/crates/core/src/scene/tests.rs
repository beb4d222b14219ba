use proptest::prelude::*;

use super::*;
use crate::geometry::{Pose, Ray, Vec3};

fn id(s: &str) -> AvatarId {
    AvatarId::new(s)
}

/// One board, avatars `a` and `b`, `a` holding the token.
fn session() -> (SessionState, BoardId) {
    let mut s = SessionState::new(1, ConfigKind::SideBySide);
    s.join(&id("a"), "A").unwrap();
    s.join(&id("b"), "B").unwrap();
    let board = s.boards[0].id;
    s.request_draw(&id("a"), board).unwrap();
    s.grant_draw(board, &id("a")).unwrap();
    (s, board)
}

fn draw(s: &mut SessionState, who: &str, board: BoardId, pts: &[Vec3]) -> SketchId {
    let st = s.begin_stroke(&id(who), board, Color::BLACK, 0.01).unwrap();
    s.append_stroke_points(&id(who), st, pts).unwrap();
    s.end_stroke(&id(who), st).unwrap()
}

fn segment(x: f64, y: f64) -> Vec<Vec3> {
    vec![Vec3::new(x, y, 0.0), Vec3::new(x + 0.1, y + 0.05, 0.0)]
}

/// World-space ray aimed straight at a board-local point.
fn ray_at(s: &SessionState, board: BoardId, local: Vec3) -> Ray {
    let b = s.board(board).unwrap();
    let target = b.pose.to_world_point(local);
    Ray::new(target + b.pose.frame.forward * 1.0, b.pose.frame.forward * -1.0).unwrap()
}

fn set_right_hand(s: &mut SessionState, who: &str, at: Vec3) -> Pose {
    let a = s.avatar(&id(who)).unwrap().clone();
    let hand = Pose::new(at, a.right_hand.frame);
    s.set_avatar_pose(&id(who), a.head, a.left_hand, hand).unwrap();
    hand
}

/// Brute-force world bounds: every raw point pushed through the transform
/// written out as an explicit matrix product.
fn oracle_bounds(s: &SessionState, sketch: SketchId) -> (Vec3, Vec3) {
    let (board, sk) = s.sketch(sketch).unwrap();
    let t = sk.transform;
    let (c, sn) = (t.rotation.cos(), t.rotation.sin());
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = lo * -1.0;
    for p in sk.strokes.iter().flat_map(|st| st.points.iter()) {
        let d = (*p - t.pivot) * t.scale;
        let r = Vec3::new(c * d.x + sn * d.z, d.y, -sn * d.x + c * d.z);
        let local = t.pivot + t.translation + r;
        let f = board.pose.frame;
        let w = board.pose.position + f.right * local.x + f.up * local.y + f.forward * local.z;
        lo = lo.component_min(w);
        hi = hi.component_max(w);
    }
    (lo, hi)
}

#[test]
fn stroke_lifecycle_creates_sketch() {
    let (mut s, board) = session();
    let pts = segment(0.0, 0.0);
    let sk = draw(&mut s, "a", board, &pts);
    let (_, sketch) = s.sketch(sk).unwrap();
    assert_eq!(sketch.strokes.len(), 1);
    assert_eq!(sketch.strokes[0].points, pts);
    assert!(s.open_strokes.is_empty());
    assert_eq!(s.check_invariants(), Ok(()));
}

#[test]
fn ten_thousand_appends_keep_order() {
    let (mut s, board) = session();
    let st = s.begin_stroke(&id("a"), board, Color::BLACK, 0.01).unwrap();
    let pts: Vec<Vec3> = (0..10_000).map(|i| Vec3::new(f64::from(i) * 1e-4, 0.0, 0.0)).collect();
    for p in &pts {
        s.append_stroke_points(&id("a"), st, std::slice::from_ref(p)).unwrap();
    }
    let sk = s.end_stroke(&id("a"), st).unwrap();
    assert_eq!(s.sketch(sk).unwrap().1.strokes[0].points, pts);
}

#[test]
fn stroke_errors() {
    let (mut s, board) = session();
    assert_eq!(
        s.begin_stroke(&id("b"), board, Color::BLACK, 0.01),
        Err(SceneError::NoDrawLock { avatar: id("b"), board })
    );
    let st = s.begin_stroke(&id("a"), board, Color::BLACK, 0.01).unwrap();
    assert_eq!(s.begin_stroke(&id("a"), board, Color::BLACK, 0.01), Err(SceneError::StrokeAlreadyOpen(id("a"))));
    assert_eq!(s.append_stroke_points(&id("b"), st, &[]), Err(SceneError::AuthorMismatch { stroke: st, author: id("a") }));
    assert_eq!(s.end_stroke(&id("a"), st), Err(SceneError::EmptyStroke(st)));
    assert!(matches!(
        s.append_stroke_points(&id("a"), st, &[Vec3::new(f64::NAN, 0.0, 0.0)]),
        Err(SceneError::InvalidContent(_))
    ));
    s.append_stroke_points(&id("a"), st, &segment(0.0, 0.0)).unwrap();
    s.end_stroke(&id("a"), st).unwrap();
    assert_eq!(s.append_stroke_points(&id("a"), st, &segment(0.0, 0.0)), Err(SceneError::StrokeClosed(st)));
    assert_eq!(s.end_stroke(&id("a"), StrokeId(999)), Err(SceneError::UnknownStroke(StrokeId(999))));
    let desk = s.boards.iter().find(|b| !b.is_vertical()).unwrap().id;
    assert_eq!(s.request_draw(&id("a"), desk), Err(SceneError::NotDrawable(desk)));
}

#[test]
fn token_queue_is_fifo() {
    let (mut s, board) = session();
    s.join(&id("c"), "C").unwrap();
    s.request_draw(&id("c"), board).unwrap();
    s.request_draw(&id("b"), board).unwrap();
    assert_eq!(s.request_draw(&id("b"), board), Err(SceneError::AlreadyQueued(id("b"), board)));
    assert_eq!(s.request_draw(&id("a"), board), Err(SceneError::AlreadyQueued(id("a"), board)));
    assert_eq!(s.next_grant(board), None);
    assert_eq!(s.release_draw(&id("b"), board), Err(SceneError::NotHolder(id("b"), board)));
    s.release_draw(&id("a"), board).unwrap();
    assert_eq!(s.next_grant(board), Some(id("c")));
    assert_eq!(s.grant_draw(board, &id("b")), Err(SceneError::GrantOutOfOrder { board, avatar: id("b") }));
    s.grant_draw(board, &id("c")).unwrap();
    assert!(s.holds_draw_lock(&id("c"), board));
}

#[test]
fn release_and_leave_close_open_strokes() {
    let (mut s, board) = session();
    let st = s.begin_stroke(&id("a"), board, Color::BLACK, 0.01).unwrap();
    s.append_stroke_points(&id("a"), st, &segment(0.0, 0.0)).unwrap();
    s.release_draw(&id("a"), board).unwrap();
    assert!(s.open_strokes.is_empty());
    assert_eq!(s.sketch_count(), 1);

    s.request_draw(&id("b"), board).unwrap();
    s.grant_draw(board, &id("b")).unwrap();
    s.request_draw(&id("a"), board).unwrap();
    s.set_telepathy(&id("a"), Some(&id("b")), TelepathyMode::Windowed).unwrap();
    let st = s.begin_stroke(&id("b"), board, Color::BLACK, 0.01).unwrap();
    s.append_stroke_points(&id("b"), st, &segment(0.5, 0.5)).unwrap();
    assert_eq!(s.leave(&id("b")), Ok(vec![board]));
    assert!(s.open_strokes.is_empty());
    assert!(s.telepathy.is_empty());
    assert_eq!(s.next_grant(board), Some(id("a")));
    assert!(s.boards.iter().all(|b| b.owner() != Some(&id("b"))));
    assert_eq!(s.check_invariants(), Ok(()));
    assert_eq!(s.leave(&id("b")), Err(SceneError::UnknownAvatar(id("b"))));
}

#[test]
fn join_is_unique_and_adds_a_desk() {
    let (mut s, _) = session();
    assert_eq!(s.join(&id("a"), "again"), Err(SceneError::DuplicateAvatar(id("a"))));
    let desks: Vec<_> = s.boards.iter().filter(|b| !b.is_vertical()).collect();
    assert_eq!(desks.len(), 2);
    assert!(desks.iter().all(|d| d.pose.frame.forward.max_abs_diff(Vec3::Y) < 1e-12));
    assert_eq!(s.gaze_board(&id("a")), Some(s.boards[0].id));
}

#[test]
fn strokes_group_by_time_and_distance() {
    let (mut s, board) = session();
    let first = draw(&mut s, "a", board, &segment(0.0, 0.0));
    s.advance_clock(500);
    assert_eq!(draw(&mut s, "a", board, &segment(0.15, 0.0)), first);
    s.advance_clock(1_000);
    assert_eq!(draw(&mut s, "a", board, &segment(0.3, 0.0)), first);
    s.advance_clock(2_100);
    assert_ne!(draw(&mut s, "a", board, &segment(0.45, 0.0)), first);
    s.advance_clock(2_200);
    assert_ne!(draw(&mut s, "a", board, &segment(-0.9, -0.6)), first);
}

#[test]
fn merge_into_transformed_sketch_keeps_world_position() {
    let (mut s, board) = session();
    let sk = draw(&mut s, "a", board, &segment(0.0, 0.0));
    let b = s.boards.iter_mut().find(|b| b.id == board).unwrap();
    b.sketches[0].transform.rotation = 0.7;
    b.sketches[0].transform.scale = 2.0;
    let pts = segment(0.05, 0.05);
    assert_eq!(draw(&mut s, "a", board, &pts), sk);
    let rendered = s.sketch(sk).unwrap().1.render();
    for (r, p) in rendered.strokes[1].points.iter().zip(&pts) {
        assert!(r.max_abs_diff(*p) < 1e-12);
    }
}

#[test]
fn pick_prefers_nearest_then_lowest_id() {
    let (mut s, board) = session();
    let a = draw(&mut s, "a", board, &segment(0.0, 0.0));
    s.advance_clock(5_000);
    let b = draw(&mut s, "a", board, &segment(0.0, 0.0));
    assert!(a < b);
    let ray = ray_at(&s, board, Vec3::new(0.05, 0.025, 0.0));
    assert_eq!(s.pick(&ray), Some(a));
    let miss = ray_at(&s, board, Vec3::new(0.8, 0.6, 0.0));
    assert_eq!(s.select_sketch(&id("b"), &miss), Ok(None));
    assert_eq!(s.selection(&id("b")), Selection::Idle);
}

#[test]
fn delete_resets_every_selection() {
    let (mut s, board) = session();
    let sk = draw(&mut s, "a", board, &segment(0.0, 0.0));
    let ray = ray_at(&s, board, Vec3::new(0.05, 0.025, 0.0));
    s.select_sketch(&id("a"), &ray).unwrap();
    s.select_sketch(&id("b"), &ray).unwrap();
    s.choose_operation(&id("a"), OperationKind::Delete).unwrap();
    assert_eq!(s.sketch(sk).err(), Some(SceneError::UnknownSketch(sk)));
    assert_eq!(s.selection(&id("b")), Selection::Idle);
    assert_eq!(s.choose_operation(&id("b"), OperationKind::Move), Err(SceneError::NotSelected(id("b"))));
    assert_eq!(s.check_invariants(), Ok(()));
}

#[test]
fn copy_is_independent_of_original() {
    let (mut s, board) = session();
    let sk = draw(&mut s, "a", board, &segment(0.0, 0.0));
    let ray = ray_at(&s, board, Vec3::new(0.05, 0.025, 0.0));
    s.select_sketch(&id("a"), &ray).unwrap();
    let start = s.avatar(&id("a")).unwrap().right_hand.position;
    s.choose_operation(&id("a"), OperationKind::Copy).unwrap();
    let hand = set_right_hand(&mut s, "a", start + Vec3::new(0.3, 0.0, 0.0));
    s.update_operation(&id("a"), hand).unwrap();
    let (lo, hi) = s.sketch_bbox(sk).unwrap();
    let ghost = s.ghost_bbox(&id("a")).unwrap();
    assert!(ghost.0.max_abs_diff(lo + Vec3::new(0.3, 0.0, 0.0)) < 1e-12);
    assert!(ghost.1.max_abs_diff(hi + Vec3::new(0.3, 0.0, 0.0)) < 1e-12);
    let copy = s.commit_operation(&id("a")).unwrap().unwrap();
    assert_eq!(s.selection(&id("a")), Selection::Selected { sketch: sk });
    let copied = s.sketch_bbox(copy).unwrap();
    assert!(copied.0.max_abs_diff(ghost.0) < 1e-12);

    s.choose_operation(&id("a"), OperationKind::Move).unwrap();
    let hand = set_right_hand(&mut s, "a", start + Vec3::new(0.0, 0.2, 0.0));
    s.update_operation(&id("a"), hand).unwrap();
    s.commit_operation(&id("a")).unwrap();
    assert_eq!(s.sketch_bbox(copy).unwrap(), copied);
    let orig_ids: Vec<_> = s.sketch(sk).unwrap().1.strokes.iter().map(|x| x.id).collect();
    let copy_ids: Vec<_> = s.sketch(copy).unwrap().1.strokes.iter().map(|x| x.id).collect();
    assert!(orig_ids.iter().all(|i| !copy_ids.contains(i)));
}

#[test]
fn move_away_keeps_only_depth() {
    let (mut s, board) = session();
    let sk = draw(&mut s, "a", board, &segment(0.0, 0.0));
    s.select_sketch(&id("a"), &ray_at(&s, board, Vec3::new(0.05, 0.025, 0.0))).unwrap();
    let before = s.sketch_bbox(sk).unwrap();
    let start = s.avatar(&id("a")).unwrap().right_hand.position;
    let fwd = s.avatar(&id("a")).unwrap().head.frame.forward;
    s.choose_operation(&id("a"), OperationKind::MoveAway).unwrap();
    let hand = set_right_hand(&mut s, "a", start + fwd * 0.4 + Vec3::new(0.3, 0.1, 0.0));
    s.update_operation(&id("a"), hand).unwrap();
    s.commit_operation(&id("a")).unwrap();
    let after = s.sketch_bbox(sk).unwrap();
    assert!(after.0.max_abs_diff(before.0 + fwd * 0.4) < 1e-12);
}

#[test]
fn operations_chain_without_reselecting() {
    let (mut s, board) = session();
    let sk = draw(&mut s, "a", board, &[Vec3::new(-0.2, 0.1, 0.0), Vec3::new(0.1, -0.1, 0.0), Vec3::new(0.2, 0.2, 0.0)]);
    s.select_sketch(&id("a"), &ray_at(&s, board, Vec3::new(0.0, 0.0, 0.0))).unwrap();
    let center = s.board(board).unwrap().pose.to_world_point(s.sketch(sk).unwrap().1.transform.center());
    let right = s.board(board).unwrap().pose.frame.right;
    let fwd = s.board(board).unwrap().pose.frame.forward;

    set_right_hand(&mut s, "a", center + right * 0.5);
    s.choose_operation(&id("a"), OperationKind::Rotate).unwrap();
    let hand = set_right_hand(&mut s, "a", center + fwd * 0.5);
    s.update_operation(&id("a"), hand).unwrap();
    s.commit_operation(&id("a")).unwrap();
    assert!((s.sketch(sk).unwrap().1.transform.rotation + std::f64::consts::FRAC_PI_2).abs() < 1e-12);

    s.choose_operation(&id("a"), OperationKind::Scale).unwrap();
    let hand = set_right_hand(&mut s, "a", center + fwd * 1.5);
    s.update_operation(&id("a"), hand).unwrap();
    s.commit_operation(&id("a")).unwrap();
    assert!((s.sketch(sk).unwrap().1.transform.scale - 3.0).abs() < 1e-12);

    let (lo, hi) = s.sketch_bbox(sk).unwrap();
    let (olo, ohi) = oracle_bounds(&s, sk);
    assert!(lo.max_abs_diff(olo) < 1e-9 && hi.max_abs_diff(ohi) < 1e-9);
}

#[test]
fn scale_gesture_is_clamped() {
    let (mut s, board) = session();
    let sk = draw(&mut s, "a", board, &segment(0.0, 0.0));
    s.select_sketch(&id("a"), &ray_at(&s, board, Vec3::new(0.05, 0.025, 0.0))).unwrap();
    let center = s.board(board).unwrap().pose.to_world_point(s.sketch(sk).unwrap().1.transform.center());
    set_right_hand(&mut s, "a", center + Vec3::new(0.001, 0.0, 0.0));
    s.choose_operation(&id("a"), OperationKind::Scale).unwrap();
    let hand = set_right_hand(&mut s, "a", center + Vec3::new(10.0, 0.0, 0.0));
    s.update_operation(&id("a"), hand).unwrap();
    s.commit_operation(&id("a")).unwrap();
    assert_eq!(s.sketch(sk).unwrap().1.transform.scale, SCALE_GESTURE_MAX);
}

#[test]
fn operation_state_machine_errors() {
    let (mut s, board) = session();
    draw(&mut s, "a", board, &segment(0.0, 0.0));
    let hand = s.avatar(&id("a")).unwrap().right_hand;
    assert_eq!(s.update_operation(&id("a"), hand), Err(SceneError::NotActive(id("a"))));
    assert_eq!(s.commit_operation(&id("a")), Err(SceneError::NotActive(id("a"))));
    let ray = ray_at(&s, board, Vec3::new(0.05, 0.025, 0.0));
    s.select_sketch(&id("a"), &ray).unwrap();
    s.choose_operation(&id("a"), OperationKind::Move).unwrap();
    assert_eq!(s.select_sketch(&id("a"), &ray), Err(SceneError::OperationInProgress(id("a"))));
    s.deselect(&id("a")).unwrap();
    assert_eq!(s.selection(&id("a")), Selection::Idle);
}

#[test]
fn primitives_need_token_and_positive_size() {
    let (mut s, board) = session();
    let cube = Primitive {
        kind: PrimitiveKind::Cube,
        center: Vec3::new(0.0, 0.0, 0.1),
        dimensions: Vec3::new(0.2, 0.2, 0.2),
        color: Color::BLACK,
    };
    assert_eq!(s.spawn_primitive(&id("b"), board, cube), Err(SceneError::NoDrawLock { avatar: id("b"), board }));
    let bad = Primitive { dimensions: Vec3::new(0.0, 1.0, 1.0), ..cube };
    assert!(matches!(s.spawn_primitive(&id("a"), board, bad), Err(SceneError::InvalidContent(_))));
    let sk = s.spawn_primitive(&id("a"), board, cube).unwrap();
    let (lo, hi) = s.sketch_bbox(sk).unwrap();
    assert!((hi - lo).max_abs_diff(Vec3::new(0.2, 0.2, 0.2)) < 1e-12);
}

#[test]
fn rotated_primitive_bounds_are_tight() {
    let (mut s, board) = session();
    for kind in [PrimitiveKind::Cube, PrimitiveKind::Sphere, PrimitiveKind::Cylinder] {
        let p = Primitive { kind, center: Vec3::new(0.0, 0.0, 0.2), dimensions: Vec3::new(0.2, 0.4, 0.2), color: Color::BLACK };
        let sk = s.spawn_primitive(&id("a"), board, p).unwrap();
        let b = s.boards.iter_mut().find(|b| b.id == board).unwrap();
        b.sketches.iter_mut().find(|x| x.id == sk).unwrap().transform.rotation = std::f64::consts::FRAC_PI_4;
        let (lo, hi) = s.sketch_bbox(sk).unwrap();
        let ext = hi - lo;
        let expected_x = match kind {
            PrimitiveKind::Cube => 0.2 * std::f64::consts::SQRT_2,
            PrimitiveKind::Sphere | PrimitiveKind::Cylinder => 0.2,
        };
        assert!((ext.x - expected_x).abs() < 1e-12, "{kind:?}: {ext:?}");
        assert!((ext.y - 0.4).abs() < 1e-12);
    }
}

#[test]
fn state_survives_json_round_trip() {
    let (mut s, board) = session();
    draw(&mut s, "a", board, &segment(0.0, 0.0));
    s.request_draw(&id("b"), board).unwrap();
    s.set_telepathy(&id("b"), Some(&id("a")), TelepathyMode::ImmersiveThird).unwrap();
    let json = crate::canonical::to_string(&s).unwrap();
    let back: SessionState = serde_json::from_str(&json).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.hash(), s.hash());
}

#[test]
fn gaze_switch_needs_sustained_look() {
    let mut s = SessionState::new(2, ConfigKind::Mirrored);
    s.join(&id("a"), "A").unwrap();
    let first = s.boards[0].id;
    let second = s.boards[1].id;
    assert_eq!(s.gaze_board(&id("a")), Some(first));
    let a = s.avatar(&id("a")).unwrap().clone();
    let target = s.board(second).unwrap().pose.position;
    let head = Pose::looking(a.head.position, target - a.head.position).unwrap();
    for _ in 0..9 {
        s.set_avatar_pose(&id("a"), head, a.left_hand, a.right_hand).unwrap();
        assert_eq!(s.gaze_board(&id("a")), Some(first));
    }
    s.set_avatar_pose(&id("a"), head, a.left_hand, a.right_hand).unwrap();
    assert_eq!(s.gaze_board(&id("a")), Some(second));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn same_inputs_same_hash(xs in proptest::collection::vec((-0.8f64..0.8, -0.6f64..0.6), 1..12)) {
        let run = || {
            let (mut s, board) = session();
            for (i, (x, y)) in xs.iter().enumerate() {
                s.advance_clock(i as u64 * 700);
                draw(&mut s, "a", board, &segment(*x, *y));
            }
            s
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.hash(), b.hash());
        prop_assert_eq!(a.check_invariants(), Ok(()));
    }

    #[test]
    fn chained_bbox_matches_oracle(rot in -3.0f64..3.0, scale in 0.05f64..20.0, dx in -0.5f64..0.5, dy in -0.5f64..0.5) {
        let (mut s, board) = session();
        let sk = draw(&mut s, "a", board, &[Vec3::new(-0.2, 0.1, 0.0), Vec3::new(0.1, -0.1, 0.03), Vec3::new(0.2, 0.2, 0.0)]);
        let b = s.boards.iter_mut().find(|b| b.id == board).unwrap();
        let t = &mut b.sketches[0].transform;
        t.rotation = rot;
        t.scale = scale;
        t.translation = Vec3::new(dx, dy, 0.0);
        let (lo, hi) = s.sketch_bbox(sk).unwrap();
        let (olo, ohi) = oracle_bounds(&s, sk);
        prop_assert!(lo.max_abs_diff(olo) < 1e-9 && hi.max_abs_diff(ohi) < 1e-9);
    }
}
