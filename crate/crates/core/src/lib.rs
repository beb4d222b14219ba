//! Shared-whiteboard collaboration engine: reflection geometry, the
//! replicated session model, per-viewer composition, the wire protocol, a
//! sequencing relay and a deterministic simulation harness.

pub mod canonical;
pub mod client;
pub mod events;
pub mod geometry;
pub mod protocol;
pub mod relay;
pub mod scene;
pub mod sim;
pub mod view;

pub use client::{Replica, ReplicaError};
pub use events::{apply, ApplyError, Effect};
pub use geometry::{
    aabb_gap, ray_aabb, ray_plane_intersect, reflect_direction, reflect_point, reflect_pose, rotate_about_axis,
    scale_about_center, Frame, GeometryError, Plane, Pose, Ray, Vec3,
};
pub use protocol::{Body, DecodeError, EncodeError, FrameDecoder, Message, SketchOp};
pub use relay::{ConnId, Outbound, Relay, RelayConfig};
pub use scene::{
    Avatar, AvatarId, Board, BoardId, BoardKind, Color, ConfigKind, OperationKind, Primitive, PrimitiveKind,
    SceneError, Selection, SessionState, Sketch3D, SketchId, SketchTransform, Stroke, StrokeId, TelepathyMode,
};
pub use view::{
    compose_config, compose_eyes_free, compose_mirrored, compose_side_by_side, compose_view, compose_with_telepathy, flatten,
    map_horizontal_to_vertical, ViewError, ViewerScene,
};
