use proptest::prelude::*;

use super::*;
use crate::geometry::{ray_plane_intersect, Plane, Vec3};
use crate::scene::{Color, Primitive, PrimitiveKind};

fn id(s: &str) -> AvatarId {
    AvatarId::new(s)
}

/// Two boards, three avatars, one stroke sketch and one cube on board 1.
fn populated(config: ConfigKind) -> SessionState {
    let mut s = SessionState::new(2, config);
    for name in ["a", "b", "c"] {
        s.join(&id(name), name).unwrap();
    }
    let board = s.boards[0].id;
    s.request_draw(&id("a"), board).unwrap();
    s.grant_draw(board, &id("a")).unwrap();
    let st = s.begin_stroke(&id("a"), board, Color::BLACK, 0.01).unwrap();
    s.append_stroke_points(&id("a"), st, &[Vec3::new(-0.2, 0.1, 0.0), Vec3::new(0.3, -0.2, 0.05)]).unwrap();
    s.end_stroke(&id("a"), st).unwrap();
    let cube = Primitive {
        kind: PrimitiveKind::Cube,
        center: Vec3::new(0.5, 0.3, 0.1),
        dimensions: Vec3::new(0.2, 0.2, 0.2),
        color: Color::BLACK,
    };
    s.spawn_primitive(&id("a"), board, cube).unwrap();
    s
}

fn look_at(s: &mut SessionState, who: &str, from: Vec3, target: Vec3) {
    let head = Pose::looking(from, target - from).unwrap();
    let a = s.avatar(&id(who)).unwrap().clone();
    s.set_avatar_pose(&id(who), head, a.left_hand, a.right_hand).unwrap();
}

#[test]
fn side_by_side_places_everyone_as_synced() {
    let s = populated(ConfigKind::SideBySide);
    let scene = compose_side_by_side(&s, &id("a")).unwrap();
    assert_eq!(scene.avatars.len(), 3);
    for (aid, p) in &scene.avatars {
        assert_eq!(p.head, s.avatars[aid].head);
        assert_eq!(p.mirrored_across, None);
    }
    assert_eq!(scene.boards.len(), 2);
    assert!(scene.boards.values().all(|b| b.kind == BoardKind::VerticalShared));
    assert_eq!(scene.camera, s.avatars[&id("a")].head);
}

#[test]
fn mirrored_reflects_others_across_their_gaze_board() {
    let s = populated(ConfigKind::Mirrored);
    let scene = compose_mirrored(&s, &id("a")).unwrap();
    assert_eq!(scene.avatars[&id("a")].head, s.avatars[&id("a")].head);
    for other in ["b", "c"] {
        let board = s.gaze_board(&id(other)).unwrap();
        let plane = s.board(board).unwrap().plane();
        let placed = &scene.avatars[&id(other)];
        assert_eq!(placed.mirrored_across, Some(board));
        let raw = s.avatars[&id(other)].head.position;
        assert!(placed.head.position.max_abs_diff(crate::geometry::reflect_point(raw, &plane)) < 1e-12);
        assert!(placed.head.frame.handedness() > 0.0);
    }
}

#[test]
fn board_content_is_identical_across_configs() {
    let side = compose_side_by_side(&populated(ConfigKind::SideBySide), &id("b")).unwrap();
    let mirr = compose_mirrored(&populated(ConfigKind::Mirrored), &id("b")).unwrap();
    let eyes = compose_eyes_free(&populated(ConfigKind::EyesFree), &id("b")).unwrap();
    assert_eq!(side.content_hash(), mirr.content_hash());
    for (bid, view) in &side.boards {
        assert_eq!(&eyes.boards[bid], view);
    }
}

#[test]
fn eyes_free_shows_only_own_desk_flattened() {
    let s = populated(ConfigKind::EyesFree);
    let scene = compose_eyes_free(&s, &id("b")).unwrap();
    let desks: Vec<_> = scene.boards.values().filter(|b| !matches!(b.kind, BoardKind::VerticalShared)).collect();
    assert_eq!(desks.len(), 1);
    let desk = desks[0];
    assert!(matches!(&desk.kind, BoardKind::HorizontalPrivate { owner, .. } if owner == &id("b")));
    assert!(desk.flattened);
    let source = &scene.boards[&s.boards[0].id];
    assert_eq!(desk.sketches.len(), source.sketches.len());
    let (sx, sy) = (desk.width / source.width, desk.height / source.height);
    for (d, v) in desk.sketches[0].strokes[0].points.iter().zip(&source.sketches[0].strokes[0].points) {
        assert!((d.x - v.x * sx).abs() < 1e-12 && (d.y - v.y * sy).abs() < 1e-12 && d.z == 0.0);
    }
}

#[test]
fn private_desks_never_leak() {
    for config in ConfigKind::ALL {
        let s = populated(config);
        for viewer in ["a", "b", "c"] {
            let scene = compose_config(&s, &id(viewer)).unwrap();
            for b in scene.boards.values() {
                if let Some(owner) = match &b.kind {
                    BoardKind::HorizontalPrivate { owner, .. } => Some(owner),
                    BoardKind::VerticalShared => None,
                } {
                    assert_eq!(owner, &id(viewer));
                }
            }
        }
    }
}

#[test]
fn windowed_telepathy_embeds_the_observees_view() {
    for config in ConfigKind::ALL {
        let s = populated(config);
        let observer = s.avatars[&id("a")].clone();
        let scene = compose_with_telepathy(&s, &observer, &id("c"), TelepathyMode::Windowed).unwrap();
        let window = scene.telepathy_window.as_ref().unwrap();
        assert_eq!(window.scene.hash(), compose_config(&s, &id("c")).unwrap().hash());
        assert_eq!(window.camera, s.avatars[&id("c")].head);
        let f = observer.head.frame;
        let expected = observer.head.position + f.forward * 0.4 + f.up * 0.12 - f.right * 0.15;
        assert!(window.anchor.position.max_abs_diff(expected) < 1e-12);
        let main = compose_config(&s, &id("a")).unwrap();
        assert_eq!(ViewerScene { telepathy_window: None, ..scene.clone() }, main);
    }
}

#[test]
fn immersive_modes_drop_the_observer() {
    let s = populated(ConfigKind::Mirrored);
    let observer = s.avatars[&id("a")].clone();
    let observee = s.avatars[&id("b")].head;
    let first = compose_with_telepathy(&s, &observer, &id("b"), TelepathyMode::ImmersiveFirst).unwrap();
    assert!(!first.avatars.contains_key(&id("a")));
    assert_eq!(first.avatars[&id("b")].mirrored_across, None);
    assert_eq!(first.camera, observee);
    let third = compose_with_telepathy(&s, &observer, &id("b"), TelepathyMode::ImmersiveThird).unwrap();
    let expected = observee.position - observee.frame.forward * 0.5 + observee.frame.up * 0.3;
    assert!(third.camera.position.max_abs_diff(expected) < 1e-12);
    assert_eq!(first.boards, third.boards);
}

#[test]
fn telepathy_errors() {
    let s = populated(ConfigKind::SideBySide);
    let a = s.avatars[&id("a")].clone();
    assert_eq!(compose_with_telepathy(&s, &a, &id("a"), TelepathyMode::Windowed), Err(ViewError::SelfObservation));
    assert_eq!(
        compose_with_telepathy(&s, &a, &id("zz"), TelepathyMode::Windowed),
        Err(ViewError::UnknownObservee(id("zz")))
    );
    assert_eq!(compose_view(&s, &id("zz")), Err(ViewError::UnknownViewer(id("zz"))));
}

#[test]
fn compose_view_follows_stored_link() {
    let mut s = populated(ConfigKind::SideBySide);
    s.set_telepathy(&id("a"), Some(&id("b")), TelepathyMode::ImmersiveFirst).unwrap();
    let v = compose_view(&s, &id("a")).unwrap();
    assert_eq!(v.camera, s.avatars[&id("b")].head);
    s.set_telepathy(&id("a"), None, TelepathyMode::Windowed).unwrap();
    assert_eq!(compose_view(&s, &id("a")).unwrap(), compose_config(&s, &id("a")).unwrap());
}

#[test]
fn horizontal_mapping_examples_and_errors() {
    let s = populated(ConfigKind::EyesFree);
    let board = &s.boards[0];
    let desk = s.boards.iter().find(|b| b.owner() == Some(&id("a"))).unwrap();
    let center = map_horizontal_to_vertical(0.0, 0.0, desk, board).unwrap();
    assert!(center.max_abs_diff(board.pose.position) < 1e-12);
    let corner = map_horizontal_to_vertical(0.5, 0.5, desk, board).unwrap();
    let expected = board.pose.position + board.pose.frame.right * 1.0 + board.pose.frame.up * 0.75;
    assert!(corner.max_abs_diff(expected) < 1e-12);
    assert!(matches!(map_horizontal_to_vertical(0.6, 0.0, desk, board), Err(ViewError::OutOfBounds(..))));
    assert!(matches!(map_horizontal_to_vertical(f64::NAN, 0.0, desk, board), Err(ViewError::OutOfBounds(..))));
    assert_eq!(map_horizontal_to_vertical(0.0, 0.0, board, board), Err(ViewError::NotHorizontal(board.id)));
    assert_eq!(map_horizontal_to_vertical(0.0, 0.0, desk, desk), Err(ViewError::NotVertical(desk.id)));
}

#[test]
fn flatten_checks_board() {
    let s = populated(ConfigKind::SideBySide);
    let sketch = &s.boards[0].sketches[0];
    assert_eq!(flatten(sketch, &s.boards[1]), Err(ViewError::ForeignSketch(s.boards[1].id)));
    let flat = flatten(sketch, &s.boards[0]).unwrap();
    assert!(flat.strokes[0].points.iter().all(|p| p.z == 0.0));
    assert_eq!(flat.flattened(), flat);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// A reflected avatar's head ray still lands on the board point the
    /// original was looking at.
    #[test]
    fn mirrored_gaze_lands_on_same_point(
        x in -2.0f64..2.0, y in 0.5f64..2.5, z in 0.3f64..4.0,
        u in -0.5f64..0.5, v in -0.5f64..0.5,
    ) {
        let mut s = SessionState::new(1, ConfigKind::Mirrored);
        s.join(&id("viewer"), "v").unwrap();
        s.join(&id("other"), "o").unwrap();
        let board = s.boards[0].clone();
        let target = board.pose.to_world_point(Vec3::new(u * board.width, v * board.height, 0.0));
        look_at(&mut s, "other", Vec3::new(x, y, z), target);
        let scene = compose_mirrored(&s, &id("viewer")).unwrap();
        let placed = &scene.avatars[&id("other")];
        prop_assert_eq!(placed.mirrored_across, Some(board.id));
        let (hit, _) = ray_plane_intersect(&placed.head.forward_ray(), &board.plane()).unwrap();
        prop_assert!(hit.max_abs_diff(target) < 1e-9);
    }

    /// Mirroring is symmetric: composing from either side reflects the
    /// other avatar by the same plane, and reflecting back recovers it.
    #[test]
    fn mirroring_is_an_involution_per_avatar(x in -1.0f64..1.0, z in 0.5f64..3.0) {
        let mut s = SessionState::new(1, ConfigKind::Mirrored);
        s.join(&id("a"), "a").unwrap();
        s.join(&id("b"), "b").unwrap();
        let target = s.boards[0].pose.position;
        look_at(&mut s, "b", Vec3::new(x, 1.6, z), target);
        let scene = compose_mirrored(&s, &id("a")).unwrap();
        let plane: Plane = s.boards[0].plane();
        let back = crate::geometry::reflect_pose(&scene.avatars[&id("b")].head, &plane);
        prop_assert!(back.position.max_abs_diff(s.avatars[&id("b")].head.position) < 1e-9);
        prop_assert!(back.frame.forward.max_abs_diff(s.avatars[&id("b")].head.frame.forward) < 1e-9);
    }

    /// Oracle: scale normalized desk coordinates to physical desk
    /// coordinates, renormalize, then place on the board by hand.
    #[test]
    fn horizontal_mapping_matches_oracle(u in -0.5f64..=0.5, v in -0.5f64..=0.5, w in 0.1f64..3.0, h in 0.1f64..3.0) {
        let s = populated(ConfigKind::EyesFree);
        let board = &s.boards[0];
        let mut desk = s.boards.iter().find(|b| b.owner().is_some()).unwrap().clone();
        desk.width = w;
        desk.height = h;
        let got = map_horizontal_to_vertical(u, v, &desk, board).unwrap();
        let physical = (u * w, v * h);
        let (du, dv) = (physical.0 / w, physical.1 / h);
        let f = board.pose.frame;
        let oracle = board.pose.position + f.right * (du * board.width) + f.up * (dv * board.height);
        prop_assert!(got.max_abs_diff(oracle) < 1e-9);
        let (bu, bv) = board.normalized_coords(got);
        prop_assert!((bu - u).abs() < 1e-9 && (bv - v).abs() < 1e-9);
    }

    #[test]
    fn flatten_is_idempotent_and_keeps_uv(px in -1.0f64..1.0, py in -0.7f64..0.7, pz in -0.5f64..0.5, rot in -3.0f64..3.0) {
        let mut s = populated(ConfigKind::SideBySide);
        let board = s.boards[0].id;
        let st = s.begin_stroke(&id("a"), board, Color::BLACK, 0.01).unwrap();
        s.append_stroke_points(&id("a"), st, &[Vec3::new(px, py, pz)]).unwrap();
        s.end_stroke(&id("a"), st).unwrap();
        let b = &mut s.boards[0];
        for sk in b.sketches.iter_mut() {
            sk.transform.rotation = rot;
        }
        let b = &s.boards[0];
        for sk in &b.sketches {
            let raw = sk.render();
            let once = flatten(sk, b).unwrap();
            prop_assert_eq!(once.flattened(), once.clone());
            for (f, r) in once.strokes.iter().flat_map(|s| s.points.iter()).zip(raw.strokes.iter().flat_map(|s| s.points.iter())) {
                prop_assert_eq!((f.x, f.y, f.z), (r.x, r.y, 0.0));
            }
        }
    }
}
