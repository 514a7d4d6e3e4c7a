//! Rigid transforms, pinhole cameras and angle arithmetic.
//!
//! Camera coordinates follow the usual computer-vision convention: `x` right,
//! `y` down, `z` along the optical axis. The world and BEV frames are
//! right-handed with `z` up; the ground is the plane `z = 0`.
//!
//! Matrix-vector products always accumulate the first two terms before the
//! third, so that quarter-turn rotations about `z` (which only swap and negate
//! the `x`/`y` terms) reproduce results bit-for-bit.

use alloc::string::String;
use core::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Tolerance of the orthonormality check on construction.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Depths at or below this are treated as behind the camera.
pub const MIN_DEPTH: f64 = 1e-6;

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_rows(rows: [Vec3; 3]) -> Self {
        Mat3(rows)
    }

    pub fn from_row_major(m: [f64; 9]) -> Self {
        Mat3([[m[0], m[1], m[2]], [m[3], m[4], m[5]], [m[6], m[7], m[8]]])
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]]
    }

    pub fn row(&self, i: usize) -> Vec3 {
        self.0[i]
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        [
            (m[0][0] * v[0] + m[0][1] * v[1]) + m[0][2] * v[2],
            (m[1][0] * v[0] + m[1][1] * v[1]) + m[1][2] * v[2],
            (m[2][0] * v[0] + m[2][1] * v[1]) + m[2][2] * v[2],
        ]
    }

    /// `selfᵀ · v` without materialising the transpose.
    #[inline]
    pub fn transpose_mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        [
            (m[0][0] * v[0] + m[1][0] * v[1]) + m[2][0] * v[2],
            (m[0][1] * v[0] + m[1][1] * v[1]) + m[2][1] * v[2],
            (m[0][2] * v[0] + m[1][2] * v[1]) + m[2][2] * v[2],
        ]
    }

    pub fn mul(&self, o: &Mat3) -> Mat3 {
        let a = &self.0;
        let b = &o.0;
        let mut c = [[0.0; 3]; 3];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, out) in row.iter_mut().enumerate() {
                *out = (a[i][0] * b[0][j] + a[i][1] * b[1][j]) + a[i][2] * b[2][j];
            }
        }
        Mat3(c)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest deviation of `R Rᵀ` from identity, or of `det R` from one.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.mul(&self.transpose());
        let mut worst = libm::fabs(self.determinant() - 1.0);
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                let d = libm::fabs(g.0[i][j] - target);
                if !(d <= worst) {
                    worst = d;
                }
            }
        }
        worst
    }

    fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

/// Rotation about `+z` by `psi` (counter-clockwise seen from above).
///
/// Quarter turns (after wrapping) produce exact `0`/`±1` entries.
pub fn rot_z(psi: f64) -> Mat3 {
    let (s, c) = sin_cos_snapped(psi);
    Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
}

pub(crate) fn sin_cos_snapped(psi: f64) -> (f64, f64) {
    let w = wrap(psi);
    if w == 0.0 {
        (0.0, 1.0)
    } else if w == FRAC_PI_2 {
        (1.0, 0.0)
    } else if w == PI {
        (0.0, -1.0)
    } else if w == -FRAC_PI_2 {
        (-1.0, 0.0)
    } else {
        (libm::sin(w), libm::cos(w))
    }
}

/// A proper rigid motion `p ↦ R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform =
        RigidTransform { rotation: Mat3::IDENTITY, translation: [0.0; 3] };

    /// Validates that `rotation` is orthonormal with determinant +1.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        if !rotation.is_finite() || !translation.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let deviation = rotation.orthonormality_error();
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self { rotation, translation })
    }

    /// Rotation about the vertical axis followed by a translation.
    pub fn from_yaw_translation(yaw: f64, translation: Vec3) -> Self {
        Self { rotation: rot_z(yaw), translation }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        add(self.rotation.mul_vec(p), self.translation)
    }

    /// Applies the inverse transform, `Rᵀ (p − t)`.
    #[inline]
    pub fn apply_inverse(&self, p: Vec3) -> Vec3 {
        self.rotation.transpose_mul_vec(sub(p, self.translation))
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        let t = rt.mul_vec(self.translation);
        Self { rotation: rt, translation: [-t[0], -t[1], -t[2]] }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation.mul(&other.rotation),
            translation: add(self.rotation.mul_vec(other.translation), self.translation),
        }
    }
}

/// `a ∘ b`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl PinholeIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.fx, self.fy, self.cx, self.cy].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidIntrinsics("focal lengths must be positive"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::InvalidIntrinsics("cx must lie in [0, width)"));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::InvalidIntrinsics("cy must lie in [0, height)"));
        }
        Ok(())
    }

    /// Pixel `i` covers `[i, i + 1)`, so bounds are half-open.
    #[inline]
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64
    }
}

/// A projected point in front of the camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub camera_id: String,
    pub intrinsics: PinholeIntrinsics,
    pub world_to_camera: RigidTransform,
}

impl CameraModel {
    pub fn new(
        camera_id: impl Into<String>,
        intrinsics: PinholeIntrinsics,
        world_to_camera: RigidTransform,
    ) -> Result<Self> {
        intrinsics.validate()?;
        Ok(Self { camera_id: camera_id.into(), intrinsics, world_to_camera })
    }

    /// Camera at `position` whose optical axis has heading `yaw` (about world `+z`,
    /// from `+x`) and is tilted `pitch` radians below the horizon.
    pub fn looking(
        camera_id: impl Into<String>,
        intrinsics: PinholeIntrinsics,
        position: Vec3,
        yaw: f64,
        pitch: f64,
    ) -> Result<Self> {
        let (sy, cy) = sin_cos_snapped(yaw);
        let (sp, cp) = sin_cos_snapped(pitch);
        let forward = [cp * cy, cp * sy, -sp];
        let right = [sy, -cy, 0.0];
        let down = cross(forward, right);
        let rotation = Mat3::from_rows([right, down, forward]);
        let t = rotation.mul_vec(position);
        let extrinsics = RigidTransform::new(rotation, [-t[0], -t[1], -t[2]])?;
        Self::new(camera_id, intrinsics, extrinsics)
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vec3 {
        self.world_to_camera.apply_inverse([0.0; 3])
    }

    /// Optical axis direction in world coordinates.
    pub fn optical_axis(&self) -> Vec3 {
        self.world_to_camera.rotation().row(2)
    }

    #[inline]
    pub fn project(&self, world_point: Vec3) -> Result<Projection> {
        let p = self.world_to_camera.apply(world_point);
        self.project_camera_point(p)
    }

    #[inline]
    pub(crate) fn project_camera_point(&self, p: Vec3) -> Result<Projection> {
        if !(p[2] > MIN_DEPTH) {
            return Err(Error::Behind);
        }
        let k = &self.intrinsics;
        Ok(Projection { u: k.fx * p[0] / p[2] + k.cx, v: k.fy * p[1] / p[2] + k.cy, depth: p[2] })
    }

    /// World point at `depth` along the ray through pixel `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        let k = &self.intrinsics;
        let p = [(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth];
        self.world_to_camera.apply_inverse(p)
    }
}

/// Heading of the camera's optical axis, projected onto the ground plane of `frame`
/// (world → frame), measured from the frame's `+x` axis about its `+z` axis.
pub fn camera_yaw_in_frame(cam: &CameraModel, frame: &RigidTransform) -> Result<f64> {
    let axis = frame.rotation().mul_vec(cam.optical_axis());
    let horizontal = libm::hypot(axis[0], axis[1]);
    // sin(1°): the axis must be at least a degree away from vertical.
    if horizontal <= norm(axis) * libm::sin(1f64.to_radians()) {
        return Err(Error::DegeneratePose);
    }
    Ok(wrap(libm::atan2(axis[1], axis[0])))
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(wrap(a))
}

/// Infallible [`wrap_angle`] for values already known to be finite.
#[inline]
pub(crate) fn wrap(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = rem_euclid(a + PI, TAU) - PI;
    if r <= -PI {
        PI
    } else {
        r
    }
}

fn rem_euclid(a: f64, b: f64) -> f64 {
    let r = libm::fmod(a, b);
    if r < 0.0 {
        r + b
    } else {
        r
    }
}

/// Maps an internal `(−π, π]` angle to the `[0, 2π)` display convention.
pub fn to_display_angle(a: f64) -> f64 {
    let w = wrap(a);
    if w < 0.0 {
        w + TAU
    } else {
        w
    }
}

/// Smallest absolute difference between two angles, in `[0, π]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    libm::fabs(wrap(a - b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectClass {
    Vehicle,
    Cyclist,
    Pedestrian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Car,
    Van,
    Bus,
    Truck,
    Cyclist,
    Motorcyclist,
    Tricyclist,
    Pedestrian,
}

impl Category {
    pub const ALL: [Category; 8] = [
        Category::Car,
        Category::Van,
        Category::Bus,
        Category::Truck,
        Category::Cyclist,
        Category::Motorcyclist,
        Category::Tricyclist,
        Category::Pedestrian,
    ];

    pub fn class(self) -> ObjectClass {
        match self {
            Category::Car | Category::Van | Category::Bus | Category::Truck => ObjectClass::Vehicle,
            Category::Cyclist | Category::Motorcyclist | Category::Tricyclist => ObjectClass::Cyclist,
            Category::Pedestrian => ObjectClass::Pedestrian,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Car => "car",
            Category::Van => "van",
            Category::Bus => "bus",
            Category::Truck => "truck",
            Category::Cyclist => "cyclist",
            Category::Motorcyclist => "motorcyclist",
            Category::Tricyclist => "tricyclist",
            Category::Pedestrian => "pedestrian",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Typical (length, width, height) in meters.
    pub fn nominal_dims(self) -> Vec3 {
        match self {
            Category::Car => [4.5, 1.8, 1.5],
            Category::Van => [5.2, 2.0, 2.2],
            Category::Bus => [12.0, 2.5, 3.2],
            Category::Truck => [9.0, 2.5, 3.5],
            Category::Cyclist => [1.8, 0.6, 1.7],
            Category::Motorcyclist => [2.1, 0.8, 1.6],
            Category::Tricyclist => [2.6, 1.2, 1.7],
            Category::Pedestrian => [0.6, 0.6, 1.75],
        }
    }
}

/// An oriented 3D box. The heading (`yaw`) is the direction of the box's length
/// axis, measured about `+z` from the `+x` axis of the frame it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    center: Vec3,
    dims: Vec3,
    yaw: f64,
    category: Category,
}

impl Box3D {
    pub fn new(center: Vec3, dims: Vec3, yaw: f64, category: Category) -> Result<Self> {
        if !center.iter().chain(dims.iter()).all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if !dims.iter().all(|&d| d > 0.0) {
            return Err(Error::Validation("box dimensions must be strictly positive".into()));
        }
        Ok(Self { center, dims, yaw: wrap_angle(yaw)?, category })
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn dims(&self) -> Vec3 {
        self.dims
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub(crate) fn with_pose(&self, center: Vec3, yaw: f64) -> Self {
        Self { center, yaw: wrap(yaw), ..*self }
    }

    /// The eight corners, bottom face first, counter-clockwise from the front-left.
    pub fn corners(&self) -> [Vec3; 8] {
        let [l, w, h] = self.dims;
        let r = rot_z(self.yaw);
        let mut out = [[0.0; 3]; 8];
        let signs = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
        for (k, out) in out.iter_mut().enumerate() {
            let (sx, sy) = signs[k % 4];
            let sz = if k < 4 { -1.0 } else { 1.0 };
            let local = [sx * l / 2.0, sy * w / 2.0, sz * h / 2.0];
            *out = add(r.mul_vec(local), self.center);
        }
        out
    }

    /// Whether the planar point lies inside the box footprint.
    pub fn footprint_contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = sin_cos_snapped(self.yaw);
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let along = c * dx + s * dy;
        let across = -s * dx + c * dy;
        libm::fabs(along) <= self.dims[0] / 2.0 && libm::fabs(across) <= self.dims[1] / 2.0
    }
}
