//! Which vertical board an avatar is looking at.

use crate::geometry::{ray_plane_intersect, Pose};
use crate::scene::{Board, BoardId};

/// Consecutive evaluations a new board must win before the tracked gaze
/// switches to it (about half a second of avatar updates at 20 Hz).
pub const HYSTERESIS_EVALUATIONS: u32 = 10;

/// Undamped gaze target: the vertical board whose rectangle the head-forward
/// ray hits first (ties to the lower id); failing that, the board whose
/// center is angularly closest to the forward direction.
pub fn instant_gaze_board<'a>(head: &Pose, boards: impl IntoIterator<Item = &'a Board>) -> Option<BoardId> {
    let ray = head.forward_ray();
    let vertical: Vec<&Board> = boards.into_iter().filter(|b| b.is_vertical()).collect();

    let hit = vertical
        .iter()
        .filter_map(|b| {
            let (point, t) = ray_plane_intersect(&ray, &b.plane())?;
            let local = b.pose.to_local_point(point);
            (local.x.abs() <= b.width / 2.0 && local.y.abs() <= b.height / 2.0).then_some((t, b.id))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if let Some((_, id)) = hit {
        return Some(id);
    }

    vertical
        .iter()
        .filter_map(|b| {
            let dir = (b.pose.position - head.position).normalized()?;
            Some((dir.dot(ray.direction).clamp(-1.0, 1.0).acos(), b.id))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}
