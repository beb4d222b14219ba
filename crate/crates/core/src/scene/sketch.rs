use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BoardId, SceneError, SketchId, StrokeId};
use crate::geometry::{finite_f64, rotate_about_axis, Pose, Vec3};

/// RGB color with every channel in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Color {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Color {
    pub const BLACK: Color = Color { r: 0.0, g: 0.0, b: 0.0 };

    pub fn new(r: f64, g: f64, b: f64) -> Option<Color> {
        let ok = |c: f64| (0.0..=1.0).contains(&c);
        (ok(r) && ok(g) && ok(b)).then_some(Color { r, g, b })
    }
}

impl Serialize for Color {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if Color::new(self.r, self.g, self.b).is_none() {
            return Err(serde::ser::Error::custom("color channel outside [0, 1]"));
        }
        [self.r + 0.0, self.g + 0.0, self.b + 0.0].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Color {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [r, g, b] = <[f64; 3]>::deserialize(d)?;
        Color::new(r, g, b).ok_or_else(|| serde::de::Error::custom("color channel outside [0, 1]"))
    }
}

/// Freehand polyline in board-local coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub id: StrokeId,
    pub points: Vec<Vec3>,
    pub color: Color,
    #[serde(serialize_with = "finite_f64")]
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Cube,
    Sphere,
    /// Axis along board-local y.
    Cylinder,
}

/// Parametric solid. `dimensions` are full extents along the board-local
/// axes (edge lengths for a cube, diameters for a sphere, x/z diameters and
/// y height for a cylinder).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub kind: PrimitiveKind,
    pub center: Vec3,
    pub dimensions: Vec3,
    pub color: Color,
}

impl Primitive {
    pub fn validate(&self) -> Result<(), SceneError> {
        let d = self.dimensions;
        if d.x > 0.0 && d.y > 0.0 && d.z > 0.0 && d.is_finite() && self.center.is_finite() {
            Ok(())
        } else {
            Err(SceneError::InvalidContent("primitive dimensions must be positive".into()))
        }
    }
}

/// Rigid-plus-scale placement of a sketch on its board:
/// `p -> pivot + translation + Ry(rotation) * scale * (p - pivot)`, all in
/// board-local coordinates. The pivot is fixed when the sketch is created,
/// so incremental operations compose about the sketch's current center
/// (`pivot + translation`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SketchTransform {
    pub translation: Vec3,
    #[serde(serialize_with = "finite_f64")]
    pub rotation: f64,
    #[serde(serialize_with = "finite_f64")]
    pub scale: f64,
    pub pivot: Vec3,
}

impl SketchTransform {
    pub fn identity(pivot: Vec3) -> Self {
        SketchTransform { translation: Vec3::ZERO, rotation: 0.0, scale: 1.0, pivot }
    }

    pub fn center(&self) -> Vec3 {
        self.pivot + self.translation
    }

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.apply_linear(p - self.pivot) + self.center()
    }

    /// Rotation and scale only, for offset vectors.
    pub fn apply_linear(&self, v: Vec3) -> Vec3 {
        rotate_about_axis(v * self.scale, Vec3::ZERO, Vec3::Y, self.rotation)
    }

    pub fn invert(&self, p: Vec3) -> Vec3 {
        let v = rotate_about_axis(p - self.center(), Vec3::ZERO, Vec3::Y, -self.rotation);
        self.pivot + v * (1.0 / self.scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sketch3D {
    pub id: SketchId,
    pub board: BoardId,
    pub strokes: Vec<Stroke>,
    pub primitives: Vec<Primitive>,
    pub transform: SketchTransform,
    /// Session time the most recent stroke was merged in; drives grouping.
    pub last_stroke_ms: u64,
}

impl Sketch3D {
    pub fn is_empty(&self) -> bool {
        self.strokes.iter().all(|s| s.points.is_empty()) && self.primitives.is_empty()
    }

    /// Content bounding box in untransformed board-local coordinates.
    pub fn raw_bounds(&self) -> Option<(Vec3, Vec3)> {
        let mut acc: Option<(Vec3, Vec3)> = None;
        let mut add = |p: Vec3| {
            acc = Some(match acc {
                None => (p, p),
                Some((lo, hi)) => (lo.component_min(p), hi.component_max(p)),
            })
        };
        for p in self.strokes.iter().flat_map(|s| s.points.iter()) {
            add(*p);
        }
        for prim in &self.primitives {
            let half = prim.dimensions * 0.5;
            add(prim.center - half);
            add(prim.center + half);
        }
        acc
    }

    /// Geometry with the transform baked in, in board-local coordinates.
    pub fn render(&self) -> RenderedSketch {
        let t = &self.transform;
        RenderedSketch {
            id: self.id,
            strokes: self
                .strokes
                .iter()
                .map(|s| RenderedStroke {
                    id: s.id,
                    points: s.points.iter().map(|p| t.apply(*p)).collect(),
                    color: s.color,
                    width: s.width * t.scale,
                })
                .collect(),
            primitives: self
                .primitives
                .iter()
                .map(|p| {
                    let half = p.dimensions * 0.5;
                    RenderedPrimitive {
                        kind: p.kind,
                        center: t.apply(p.center),
                        axes: [
                            t.apply_linear(Vec3::X * half.x),
                            t.apply_linear(Vec3::Y * half.y),
                            t.apply_linear(Vec3::Z * half.z),
                        ],
                        color: p.color,
                    }
                })
                .collect(),
        }
    }

    /// World-space axis-aligned bounds of the transformed content.
    pub fn world_bounds(&self, board_pose: &Pose) -> Result<(Vec3, Vec3), SceneError> {
        self.render().world_bounds(board_pose).ok_or(SceneError::EmptySketch(self.id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedStroke {
    pub id: StrokeId,
    pub points: Vec<Vec3>,
    pub color: Color,
    #[serde(serialize_with = "finite_f64")]
    pub width: f64,
}

/// A primitive as `center + a*axes[0] + b*axes[1] + c*axes[2]` over the
/// unit solid of its kind. Axes are half-extent vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrimitive {
    pub kind: PrimitiveKind,
    pub center: Vec3,
    pub axes: [Vec3; 3],
    pub color: Color,
}

impl RenderedPrimitive {
    /// Half extents of the tight axis-aligned box after mapping the axes
    /// through `to_world` (a linear map).
    fn half_extents(&self, to_world: impl Fn(Vec3) -> Vec3) -> Vec3 {
        let [a, b, c] = self.axes.map(to_world);
        match self.kind {
            PrimitiveKind::Cube => a.abs() + b.abs() + c.abs(),
            PrimitiveKind::Sphere => Vec3::new(
                (a.x * a.x + b.x * b.x + c.x * c.x).sqrt(),
                (a.y * a.y + b.y * b.y + c.y * c.y).sqrt(),
                (a.z * a.z + b.z * b.z + c.z * c.z).sqrt(),
            ),
            PrimitiveKind::Cylinder => {
                b.abs()
                    + Vec3::new(
                        (a.x * a.x + c.x * c.x).sqrt(),
                        (a.y * a.y + c.y * c.y).sqrt(),
                        (a.z * a.z + c.z * c.z).sqrt(),
                    )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedSketch {
    pub id: SketchId,
    pub strokes: Vec<RenderedStroke>,
    pub primitives: Vec<RenderedPrimitive>,
}

impl RenderedSketch {
    pub fn world_bounds(&self, board_pose: &Pose) -> Option<(Vec3, Vec3)> {
        let mut acc: Option<(Vec3, Vec3)> = None;
        let mut add = |lo: Vec3, hi: Vec3| {
            acc = Some(match acc {
                None => (lo, hi),
                Some((a, b)) => (a.component_min(lo), b.component_max(hi)),
            })
        };
        for p in self.strokes.iter().flat_map(|s| s.points.iter()) {
            let w = board_pose.to_world_point(*p);
            add(w, w);
        }
        for prim in &self.primitives {
            let c = board_pose.to_world_point(prim.center);
            let h = prim.half_extents(|v| board_pose.frame.to_world(v));
            add(c - h, c + h);
        }
        acc
    }

    /// Zeroes the board-normal (local z) component of every point and axis,
    /// leaving u and v untouched.
    pub fn flattened(&self) -> RenderedSketch {
        let flat = |v: Vec3| Vec3::new(v.x, v.y, 0.0);
        RenderedSketch {
            id: self.id,
            strokes: self
                .strokes
                .iter()
                .map(|s| RenderedStroke { points: s.points.iter().map(|p| flat(*p)).collect(), ..s.clone() })
                .collect(),
            primitives: self
                .primitives
                .iter()
                .map(|p| RenderedPrimitive { center: flat(p.center), axes: p.axes.map(flat), ..*p })
                .collect(),
        }
    }

    /// Per-axis rescale of local coordinates (used to draw a board's
    /// content onto a differently sized duplicate).
    pub fn rescaled(&self, sx: f64, sy: f64) -> RenderedSketch {
        let sc = |v: Vec3| Vec3::new(v.x * sx, v.y * sy, v.z);
        RenderedSketch {
            id: self.id,
            strokes: self
                .strokes
                .iter()
                .map(|s| RenderedStroke { points: s.points.iter().map(|p| sc(*p)).collect(), ..s.clone() })
                .collect(),
            primitives: self
                .primitives
                .iter()
                .map(|p| RenderedPrimitive { center: sc(p.center), axes: p.axes.map(sc), ..*p })
                .collect(),
        }
    }
}
