//! 3D math for poses, boards and sketch manipulation.
//!
//! Convention: right-handed, y-up, meters. A [`Frame`] stores `right`, `up`
//! and `forward`, with `right = up × forward` for a right-handed frame. A
//! board's frame uses `right` as its u axis, `up` as its v axis and
//! `forward` as its outward normal.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Tolerance for structural invariants (unit length, orthogonality).
pub const STRUCTURAL_EPS: f64 = 1e-9;

/// Below this magnitude a ray is considered parallel to a plane.
pub const PARALLEL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite component in {0}")]
    NonFinite(&'static str),
    #[error("zero-length vector in {0}")]
    ZeroVector(&'static str),
    #[error("frame axes are not orthonormal")]
    NotOrthonormal,
    #[error("scale factor must be finite and positive, got {0}")]
    InvalidScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn component_min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn component_max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn abs(self) -> Vec3 {
        Vec3::new(self.x.abs(), self.y.abs(), self.z.abs())
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self) * t
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn max_abs_diff(self, o: Vec3) -> f64 {
        let d = (self - o).abs();
        d.x.max(d.y).max(d.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

// Vectors travel as `[x, y, z]`. Non-finite components are refused on both
// sides of the wire.
impl Serialize for Vec3 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.is_finite() {
            return Err(serde::ser::Error::custom("non-finite vector component"));
        }
        // `+ 0.0` folds -0.0 into 0.0 so equal values encode identically.
        [self.x + 0.0, self.y + 0.0, self.z + 0.0].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vec3 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        let v = Vec3::new(x, y, z);
        if !v.is_finite() {
            return Err(serde::de::Error::custom("non-finite vector component"));
        }
        Ok(v)
    }
}

/// Serializes an `f64`, refusing NaN and infinities (JSON would otherwise
/// silently emit `null`).
pub(crate) fn finite_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !v.is_finite() {
        return Err(serde::ser::Error::custom("non-finite float"));
    }
    s.serialize_f64(*v + 0.0)
}

/// Orthonormal orientation frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFrame")]
pub struct Frame {
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
}

#[derive(Deserialize)]
struct RawFrame {
    right: Vec3,
    up: Vec3,
    forward: Vec3,
}

impl TryFrom<RawFrame> for Frame {
    type Error = GeometryError;
    fn try_from(r: RawFrame) -> Result<Self, Self::Error> {
        Frame::new(r.right, r.up, r.forward)
    }
}

impl Default for Frame {
    fn default() -> Self {
        Frame::IDENTITY
    }
}

impl Frame {
    pub const IDENTITY: Frame = Frame {
        right: Vec3::X,
        up: Vec3::Y,
        forward: Vec3::Z,
    };

    /// Validates three axes against the unit-length and orthogonality bounds.
    pub fn new(right: Vec3, up: Vec3, forward: Vec3) -> Result<Frame, GeometryError> {
        if !(right.is_finite() && up.is_finite() && forward.is_finite()) {
            return Err(GeometryError::NonFinite("frame"));
        }
        let unit = |v: Vec3| (v.norm() - 1.0).abs() <= STRUCTURAL_EPS;
        let ortho = |a: Vec3, b: Vec3| a.dot(b).abs() <= STRUCTURAL_EPS;
        if unit(right)
            && unit(up)
            && unit(forward)
            && ortho(right, up)
            && ortho(up, forward)
            && ortho(right, forward)
        {
            Ok(Frame { right, up, forward })
        } else {
            Err(GeometryError::NotOrthonormal)
        }
    }

    /// Builds a right-handed frame looking along `forward`, with `up_hint`
    /// orthogonalized against it.
    pub fn look(forward: Vec3, up_hint: Vec3) -> Result<Frame, GeometryError> {
        let f = forward.normalized().ok_or(GeometryError::ZeroVector("forward"))?;
        let r = up_hint
            .cross(f)
            .normalized()
            .ok_or(GeometryError::ZeroVector("up hint parallel to forward"))?;
        let u = f.cross(r);
        Ok(Frame { right: r, up: u, forward: f })
    }

    /// Frame rotated by `yaw` radians about world +y.
    pub fn yawed(yaw: f64) -> Frame {
        let f = rotate_about_axis(Vec3::Z, Vec3::ZERO, Vec3::Y, yaw);
        let r = rotate_about_axis(Vec3::X, Vec3::ZERO, Vec3::Y, yaw);
        Frame { right: r, up: Vec3::Y, forward: f }
    }

    /// +1 for a right-handed frame, -1 for a reflected one.
    pub fn handedness(&self) -> f64 {
        self.right.cross(self.up).dot(self.forward).signum()
    }

    pub fn to_world(&self, local: Vec3) -> Vec3 {
        self.right * local.x + self.up * local.y + self.forward * local.z
    }

    pub fn to_local(&self, world: Vec3) -> Vec3 {
        Vec3::new(world.dot(self.right), world.dot(self.up), world.dot(self.forward))
    }
}

/// Position plus orientation of a head, hand or board.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub frame: Frame,
}

impl Pose {
    pub fn new(position: Vec3, frame: Frame) -> Pose {
        Pose { position, frame }
    }

    /// Pose at `position` looking along `forward` with world +y as up hint.
    pub fn looking(position: Vec3, forward: Vec3) -> Result<Pose, GeometryError> {
        if !position.is_finite() {
            return Err(GeometryError::NonFinite("position"));
        }
        Ok(Pose { position, frame: Frame::look(forward, Vec3::Y)? })
    }

    pub fn forward_ray(&self) -> Ray {
        Ray { origin: self.position, direction: self.frame.forward }
    }

    pub fn to_world_point(&self, local: Vec3) -> Vec3 {
        self.position + self.frame.to_world(local)
    }

    pub fn to_local_point(&self, world: Vec3) -> Vec3 {
        self.frame.to_local(world - self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlane")]
pub struct Plane {
    pub point: Vec3,
    pub normal: Vec3,
}

#[derive(Deserialize)]
struct RawPlane {
    point: Vec3,
    normal: Vec3,
}

impl TryFrom<RawPlane> for Plane {
    type Error = GeometryError;
    fn try_from(r: RawPlane) -> Result<Self, Self::Error> {
        if ((r.normal.norm()) - 1.0).abs() > STRUCTURAL_EPS {
            return Err(GeometryError::NotOrthonormal);
        }
        Ok(Plane { point: r.point, normal: r.normal })
    }
}

impl Plane {
    /// Plane through `point`; `normal` is normalized.
    pub fn new(point: Vec3, normal: Vec3) -> Result<Plane, GeometryError> {
        if !point.is_finite() || !normal.is_finite() {
            return Err(GeometryError::NonFinite("plane"));
        }
        let normal = normal.normalized().ok_or(GeometryError::ZeroVector("plane normal"))?;
        Ok(Plane { point, normal })
    }

    /// The plane a board pose spans: through its center, normal along its
    /// forward axis.
    pub fn from_pose(pose: &Pose) -> Plane {
        Plane { point: pose.position, normal: pose.frame.forward }
    }

    pub fn signed_distance(&self, p: Vec3) -> f64 {
        (p - self.point).dot(self.normal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRay")]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

#[derive(Deserialize)]
struct RawRay {
    origin: Vec3,
    direction: Vec3,
}

impl TryFrom<RawRay> for Ray {
    type Error = GeometryError;
    fn try_from(r: RawRay) -> Result<Self, Self::Error> {
        if ((r.direction.norm()) - 1.0).abs() > STRUCTURAL_EPS {
            return Err(GeometryError::NotOrthonormal);
        }
        Ok(Ray { origin: r.origin, direction: r.direction })
    }
}

impl Ray {
    /// Ray from `origin` along `direction` (normalized).
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Ray, GeometryError> {
        if !origin.is_finite() || !direction.is_finite() {
            return Err(GeometryError::NonFinite("ray"));
        }
        let direction = direction.normalized().ok_or(GeometryError::ZeroVector("ray direction"))?;
        Ok(Ray { origin, direction })
    }

    /// Ray from `origin` through `target`.
    pub fn towards(origin: Vec3, target: Vec3) -> Result<Ray, GeometryError> {
        Ray::new(origin, target - origin)
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

pub fn reflect_point(p: Vec3, m: &Plane) -> Vec3 {
    p - m.normal * (2.0 * (p - m.point).dot(m.normal))
}

pub fn reflect_direction(d: Vec3, m: &Plane) -> Vec3 {
    d - m.normal * (2.0 * d.dot(m.normal))
}

/// Mirrors a pose across `m`. Forward and up are reflected; right is rebuilt
/// as `up × forward` so the result stays right-handed.
pub fn reflect_pose(pose: &Pose, m: &Plane) -> Pose {
    let forward = reflect_direction(pose.frame.forward, m);
    let up = reflect_direction(pose.frame.up, m);
    Pose {
        position: reflect_point(pose.position, m),
        frame: Frame { right: up.cross(forward), up, forward },
    }
}

/// Hit point and ray parameter, or `None` when the ray is parallel to the
/// plane or the plane lies behind the origin.
pub fn ray_plane_intersect(r: &Ray, m: &Plane) -> Option<(Vec3, f64)> {
    let denom = r.direction.dot(m.normal);
    if denom.abs() <= PARALLEL_EPS {
        return None;
    }
    let t = (m.point - r.origin).dot(m.normal) / denom;
    if t >= 0.0 && t.is_finite() {
        Some((r.at(t), t))
    } else {
        None
    }
}

/// Rodrigues rotation of `p` about the line through `center` along unit `axis`.
pub fn rotate_about_axis(p: Vec3, center: Vec3, axis: Vec3, angle: f64) -> Vec3 {
    let v = p - center;
    let (sin, cos) = angle.sin_cos();
    let rotated = v * cos + axis.cross(v) * sin + axis * (axis.dot(v) * (1.0 - cos));
    center + rotated
}

pub fn scale_about_center(p: Vec3, center: Vec3, s: f64) -> Result<Vec3, GeometryError> {
    if !(s.is_finite() && s > 0.0) {
        return Err(GeometryError::InvalidScale(s));
    }
    Ok(center + (p - center) * s)
}

/// Ray/axis-aligned box slab test. Returns the entry parameter (0 when the
/// origin is inside).
pub fn ray_aabb(r: &Ray, min: Vec3, max: Vec3) -> Option<f64> {
    let o = r.origin.to_array();
    let d = r.direction.to_array();
    let lo = min.to_array();
    let hi = max.to_array();
    let mut t_near = 0.0_f64;
    let mut t_far = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() <= PARALLEL_EPS {
            if o[i] < lo[i] || o[i] > hi[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[i];
        let (mut t0, mut t1) = ((lo[i] - o[i]) * inv, (hi[i] - o[i]) * inv);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_near = t_near.max(t0);
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    Some(t_near)
}

/// Euclidean gap between two axis-aligned boxes (0 when they overlap).
pub fn aabb_gap(a_min: Vec3, a_max: Vec3, b_min: Vec3, b_max: Vec3) -> f64 {
    let gap = |lo_a: f64, hi_a: f64, lo_b: f64, hi_b: f64| (lo_b - hi_a).max(lo_a - hi_b).max(0.0);
    Vec3::new(
        gap(a_min.x, a_max.x, b_min.x, b_max.x),
        gap(a_min.y, a_max.y, b_min.y, b_max.y),
        gap(a_min.z, a_max.z, b_min.z, b_max.z),
    )
    .norm()
}
