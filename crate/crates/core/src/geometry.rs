//! Viewpoint parameterization, camera poses and pinhole rays.
//!
//! A viewpoint is `[psi, theta, phi, dx, dy, dz]`: Tait-Bryan angles in
//! degrees (about z, y and x) followed by a camera translation. The camera
//! starts at a base position, is rotated by `Rz(psi)·Ry(theta)·Rx(phi)`, then
//! translated, and always looks at the world origin with `+z` as up.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Vec3<T> = [T; 3];
pub type Mat3<T> = [[T; 3]; 3];

/// Number of viewpoint parameters.
pub const VIEW_DIM: usize = 6;

pub const AXIS_NAMES: [&str; VIEW_DIM] = ["psi", "theta", "phi", "dx", "dy", "dz"];

#[inline]
pub fn dot<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm<T: Real>(a: &Vec3<T>) -> T {
    dot(a, a).sqrt()
}

#[inline]
fn scale<T: Real>(a: &Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
fn add<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn normalize<T: Real>(a: &Vec3<T>) -> Vec3<T> {
    scale(a, T::one() / norm(a))
}

pub fn mat_mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn mat_vec<T: Real>(m: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

pub fn transpose<T: Real>(m: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

pub fn determinant<T: Real>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn rot_z<T: Real>(deg: T) -> Mat3<T> {
    let (s, c) = deg.to_radians().sin_cos();
    let (o, l) = (T::zero(), T::one());
    [[c, -s, o], [s, c, o], [o, o, l]]
}

pub fn rot_y<T: Real>(deg: T) -> Mat3<T> {
    let (s, c) = deg.to_radians().sin_cos();
    let (o, l) = (T::zero(), T::one());
    [[c, o, s], [o, l, o], [-s, o, c]]
}

pub fn rot_x<T: Real>(deg: T) -> Mat3<T> {
    let (s, c) = deg.to_radians().sin_cos();
    let (o, l) = (T::zero(), T::one());
    [[l, o, o], [o, c, -s], [o, s, c]]
}

/// Intrinsic z-y-x rotation `Rz(psi)·Ry(theta)·Rx(phi)`, angles in degrees.
pub fn rotation_from_tait_bryan<T: Real>(psi: T, theta: T, phi: T) -> Result<Mat3<T>> {
    if !(psi.is_finite() && theta.is_finite() && phi.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite rotation angles ({psi}, {theta}, {phi})"
        )));
    }
    Ok(mat_mul(&mat_mul(&rot_z(psi), &rot_y(theta)), &rot_x(phi)))
}

/// Camera viewpoint: rotation angles in degrees, translation in scene units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Viewpoint<T: Real> {
    pub psi: T,
    pub theta: T,
    pub phi: T,
    pub dx: T,
    pub dy: T,
    pub dz: T,
}

impl<T: Real> Viewpoint<T> {
    pub fn new(psi: T, theta: T, phi: T, dx: T, dy: T, dz: T) -> Self {
        Self {
            psi,
            theta,
            phi,
            dx,
            dy,
            dz,
        }
    }

    pub fn from_array(a: [T; VIEW_DIM]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_array(&self) -> [T; VIEW_DIM] {
        [self.psi, self.theta, self.phi, self.dx, self.dy, self.dz]
    }

    /// The canonical natural viewpoint `[0, 0, 65°, 0, 0, 0]`.
    pub fn natural() -> Self {
        Self::new(T::zero(), T::zero(), T::lit(65.0), T::zero(), T::zero(), T::zero())
    }
}

/// Axis-aligned box of admissible viewpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ViewBounds<T: Real> {
    pub min: [T; VIEW_DIM],
    pub max: [T; VIEW_DIM],
}

impl<T: Real> ViewBounds<T> {
    pub fn new(min: [T; VIEW_DIM], max: [T; VIEW_DIM]) -> Result<Self> {
        for i in 0..VIEW_DIM {
            if !(min[i].is_finite() && max[i].is_finite()) || min[i] > max[i] {
                return Err(Error::validation(
                    format!("bounds.{}", AXIS_NAMES[i]),
                    format!("need finite min <= max, got [{}, {}]", min[i], max[i]),
                ));
            }
        }
        Ok(Self { min, max })
    }

    /// psi ∈ [-180°, 180°], theta ∈ [-30°, 30°], phi ∈ [20°, 160°],
    /// dx ∈ [-0.5, 0.5], dy ∈ [-1, 1], dz ∈ [-0.5, 0.5].
    pub fn standard() -> Self {
        let l = T::lit;
        Self {
            min: [l(-180.0), l(-30.0), l(20.0), l(-0.5), l(-1.0), l(-0.5)],
            max: [l(180.0), l(30.0), l(160.0), l(0.5), l(1.0), l(0.5)],
        }
    }

    /// Pins every axis not listed in `active` to `at`.
    pub fn freeze_except(&self, active: &[usize], at: &Viewpoint<T>) -> Result<Self> {
        let at = at.to_array();
        let mut out = *self;
        for i in 0..VIEW_DIM {
            if !active.contains(&i) {
                if at[i] < self.min[i] || at[i] > self.max[i] {
                    return Err(Error::invalid(format!(
                        "cannot freeze {} at {} outside [{}, {}]",
                        AXIS_NAMES[i], at[i], self.min[i], self.max[i]
                    )));
                }
                out.min[i] = at[i];
                out.max[i] = at[i];
            }
        }
        Ok(out)
    }

    /// Half-widths `a = (max - min) / 2`.
    pub fn half_width(&self) -> [T; VIEW_DIM] {
        std::array::from_fn(|i| (self.max[i] - self.min[i]) / T::lit(2.0))
    }

    /// Centers `b = (max + min) / 2`.
    pub fn center(&self) -> [T; VIEW_DIM] {
        std::array::from_fn(|i| (self.max[i] + self.min[i]) / T::lit(2.0))
    }

    pub fn is_frozen(&self, axis: usize) -> bool {
        self.min[axis] == self.max[axis]
    }

    pub fn active_axes(&self) -> Vec<usize> {
        (0..VIEW_DIM).filter(|&i| !self.is_frozen(i)).collect()
    }

    pub fn contains(&self, v: &Viewpoint<T>) -> bool {
        let a = v.to_array();
        (0..VIEW_DIM).all(|i| a[i] >= self.min[i] && a[i] <= self.max[i])
    }

    /// Strictly interior on active axes, equal to the pinned value on frozen ones.
    pub fn contains_strictly(&self, v: &Viewpoint<T>) -> bool {
        let a = v.to_array();
        (0..VIEW_DIM).all(|i| {
            if self.is_frozen(i) {
                a[i] == self.min[i]
            } else {
                a[i] > self.min[i] && a[i] < self.max[i]
            }
        })
    }

    pub fn clamp(&self, v: &Viewpoint<T>) -> Viewpoint<T> {
        let a = v.to_array();
        Viewpoint::from_array(std::array::from_fn(|i| a[i].max(self.min[i]).min(self.max[i])))
    }
}

/// Rigid camera pose. `rotation` columns are the camera right, up and
/// backward axes in world coordinates (the camera looks along `-column 2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose<T: Real> {
    pub rotation: Mat3<T>,
    pub position: Vec3<T>,
}

impl<T: Real> CameraPose<T> {
    pub fn right(&self) -> Vec3<T> {
        [self.rotation[0][0], self.rotation[1][0], self.rotation[2][0]]
    }

    pub fn up(&self) -> Vec3<T> {
        [self.rotation[0][1], self.rotation[1][1], self.rotation[2][1]]
    }

    /// Optical axis (unit vector the camera looks along).
    pub fn forward(&self) -> Vec3<T> {
        [-self.rotation[0][2], -self.rotation[1][2], -self.rotation[2][2]]
    }
}

/// Default base camera position before the viewpoint transform.
pub fn default_base_position<T: Real>() -> Vec3<T> {
    [T::zero(), T::lit(4.0), T::zero()]
}

/// Places the camera at `R(psi, theta, phi)·base + [dx, dy, dz]`, looking at
/// the origin with up `+z` (or `+x` when the optical axis is parallel to z).
pub fn camera_pose_from_viewpoint<T: Real>(v: &Viewpoint<T>, base_position: &Vec3<T>) -> Result<CameraPose<T>> {
    let r = rotation_from_tait_bryan(v.psi, v.theta, v.phi)?;
    let position = add(&mat_vec(&r, base_position), &[v.dx, v.dy, v.dz]);
    if !position.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("non-finite camera translation"));
    }
    let dist = norm(&position);
    let tiny = T::epsilon().sqrt();
    if dist <= tiny {
        return Err(Error::DegeneratePose(format!(
            "camera position {position:?} coincides with the look-at target"
        )));
    }
    let forward = scale(&position, -T::one() / dist);
    let z_up = [T::zero(), T::zero(), T::one()];
    let mut right = cross(&forward, &z_up);
    if norm(&right) <= tiny {
        right = cross(&forward, &[T::one(), T::zero(), T::zero()]);
    }
    let right = normalize(&right);
    let up = cross(&right, &forward);
    let back = scale(&forward, -T::one());
    let rotation = [
        [right[0], up[0], back[0]],
        [right[1], up[1], back[1]],
        [right[2], up[2], back[2]],
    ];
    Ok(CameraPose { rotation, position })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T: Real> {
    pub origin: Vec3<T>,
    pub direction: Vec3<T>,
}

impl<T: Real> Ray<T> {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3<T>, direction: Vec3<T>) -> Self {
        Self {
            origin,
            direction: normalize(&direction),
        }
    }

    #[inline]
    pub fn at(&self, t: T) -> Vec3<T> {
        add(&self.origin, &scale(&self.direction, t))
    }
}

/// Ray through normalized image-plane coordinates `(sx, sy) ∈ [-1, 1]²`
/// (`sy = 1` at the top edge) of a symmetric frustum with vertical field of
/// view `fov_deg` and the given width/height aspect ratio.
pub fn frustum_ray<T: Real>(pose: &CameraPose<T>, sx: T, sy: T, fov_deg: T, aspect: T) -> Ray<T> {
    let half = (fov_deg.to_radians() / T::lit(2.0)).tan();
    let (r, u, f) = (pose.right(), pose.up(), pose.forward());
    let dir = add(&add(&scale(&r, sx * half * aspect), &scale(&u, sy * half)), &f);
    Ray::new(pose.position, dir)
}

/// Ray through the center of pixel `(px, py)`; row 0 is the top of the image.
pub fn pixel_ray<T: Real>(
    pose: &CameraPose<T>,
    px: usize,
    py: usize,
    width: usize,
    height: usize,
    fov_deg: T,
) -> Result<Ray<T>> {
    if width == 0 || height == 0 || px >= width || py >= height {
        return Err(Error::invalid(format!(
            "pixel ({px}, {py}) outside {width}x{height} image"
        )));
    }
    if !(fov_deg > T::zero() && fov_deg < T::lit(180.0)) {
        return Err(Error::invalid(format!("field of view {fov_deg} not in (0, 180)")));
    }
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let sx = (T::from_count(px) + half) / T::from_count(width) * two - T::one();
    let sy = T::one() - (T::from_count(py) + half) / T::from_count(height) * two;
    let aspect = T::from_count(width) / T::from_count(height);
    Ok(frustum_ray(pose, sx, sy, fov_deg, aspect))
}
