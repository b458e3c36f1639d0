//! Small fixed-size rigid-body math.
//!
//! Quaternions are scalar-first `(w, x, y, z)` with the Hamilton product.
//! Euler angles follow the intrinsic roll-pitch-yaw convention, i.e. the
//! rotation is `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.

use core::f64::consts::PI;

/// A 3-vector in meters (or radians for axis-angle vectors).
pub type Vec3 = [f64; 3];

/// Angular distance from the pitch pole below which Euler decomposition is
/// treated as singular.
pub const GIMBAL_EPS: f64 = 1e-6;

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
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

#[inline]
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Reflection about the sagittal (XZ) plane.
#[inline]
pub fn reflect_y(a: Vec3) -> Vec3 {
    [a[0], -a[1], a[2]]
}

/// Rotates `v` about the world z axis by `yaw`.
#[inline]
pub fn rotate_z(yaw: f64, v: Vec3) -> Vec3 {
    let (s, c) = libm::sincos(yaw);
    [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
}

/// Applies `Rz(yaw)^T`, the inverse of [`rotate_z`].
#[inline]
pub fn rotate_z_inv(yaw: f64, v: Vec3) -> Vec3 {
    let (s, c) = libm::sincos(yaw);
    [c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]]
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = a - two_pi * libm::floor((a + PI) / two_pi);
    // floor maps the upper edge onto -pi
    if w <= -PI {
        w += two_pi;
    }
    w
}

/// Result of decomposing a rotation into intrinsic roll-pitch-yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Euler {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// Set when pitch is within [`GIMBAL_EPS`] of +-pi/2. Roll is then fixed
    /// to zero and yaw absorbs the remaining rotation about the vertical.
    pub gimbal_locked: bool,
}

/// Unit quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Rotation of `angle` radians about `axis` (assumed unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let (s, c) = libm::sincos(0.5 * angle);
        Self::new(c, axis[0] * s, axis[1] * s, axis[2] * s)
    }

    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = libm::sincos(0.5 * yaw);
        Self::new(c, 0.0, 0.0, s)
    }

    /// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sr, cr) = libm::sincos(0.5 * roll);
        let (sp, cp) = libm::sincos(0.5 * pitch);
        let (sy, cy) = libm::sincos(0.5 * yaw);
        Self::new(
            cy * cp * cr + sy * sp * sr,
            cy * cp * sr - sy * sp * cr,
            cy * sp * cr + sy * cp * sr,
            sy * cp * cr - cy * sp * sr,
        )
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
    }

    pub fn normalize(self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(self, rhs: Quat) -> Quat {
        let (a, b) = (self, rhs);
        Quat::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Rotates a vector by this (unit) quaternion.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = [self.x, self.y, self.z];
        let t = scale(cross(u, v), 2.0);
        add(add(v, scale(t, self.w)), cross(u, t))
    }

    /// Row-major rotation matrix.
    pub fn to_matrix(self) -> [[f64; 3]; 3] {
        let Quat { w, x, y, z } = self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Intrinsic roll-pitch-yaw decomposition.
    pub fn to_euler(self) -> Euler {
        let m = self.to_matrix();
        let cos_pitch = libm::hypot(m[2][1], m[2][2]);
        let pitch = libm::atan2(-m[2][0], cos_pitch);
        if cos_pitch < libm::sin(GIMBAL_EPS) {
            Euler {
                roll: 0.0,
                pitch,
                yaw: libm::atan2(-m[0][1], m[1][1]),
                gimbal_locked: true,
            }
        } else {
            Euler {
                roll: libm::atan2(m[2][1], m[2][2]),
                pitch,
                yaw: libm::atan2(m[1][0], m[0][0]),
                gimbal_locked: false,
            }
        }
    }

    pub fn yaw(self) -> f64 {
        self.to_euler().yaw
    }

    /// Geodesic angle in `[0, pi]` between two unit quaternions.
    pub fn angle_to(self, other: Quat) -> f64 {
        let d = libm::fabs(
            self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z,
        );
        // 2*atan2 keeps precision near zero where acos does not
        let diff = self.conjugate().mul(other);
        let v = libm::sqrt(diff.x * diff.x + diff.y * diff.y + diff.z * diff.z);
        2.0 * libm::atan2(v, d.min(1.0))
    }

    /// Conjugation by the sagittal-plane reflection: negates roll and yaw.
    pub fn reflect_sagittal(self) -> Quat {
        Quat::new(self.w, -self.x, self.y, -self.z)
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn euler_round_trip_away_from_pole() {
        for &(r, p, y) in &[
            (0.1, 0.2, 0.3),
            (-2.5, 1.2, 3.0),
            (3.1, -1.4, -3.1),
            (0.0, 0.0, PI),
        ] {
            let e = Quat::from_euler(r, p, y).to_euler();
            assert!(!e.gimbal_locked);
            assert_abs_diff_eq!(e.roll, r, epsilon = 1e-12);
            assert_abs_diff_eq!(e.pitch, p, epsilon = 1e-12);
            assert_abs_diff_eq!(wrap_angle(e.yaw - y), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gimbal_lock_yaw_absorbs_roll() {
        let q = Quat::from_euler(0.3, PI / 2.0, 0.5);
        let e = q.to_euler();
        assert!(e.gimbal_locked);
        assert_eq!(e.roll, 0.0);
        let back = Quat::from_euler(e.roll, e.pitch, e.yaw);
        assert!(back.angle_to(q) < 1e-6);
    }

    #[test]
    fn rotate_matches_matrix() {
        let q = Quat::from_euler(0.4, -0.7, 1.9);
        let m = q.to_matrix();
        let v = [0.3, -1.2, 2.0];
        let r = q.rotate(v);
        for i in 0..3 {
            assert_abs_diff_eq!(r[i], dot(m[i], v), epsilon = 1e-12);
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn reflection_negates_roll_and_yaw() {
        let e = Quat::from_euler(0.2, 0.3, 0.4).reflect_sagittal().to_euler();
        assert_abs_diff_eq!(e.roll, -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(e.pitch, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(e.yaw, -0.4, epsilon = 1e-12);
    }

    #[test]
    fn angle_to_is_sign_invariant() {
        let q = Quat::from_euler(0.1, 0.2, 0.3);
        let neg = Quat::new(-q.w, -q.x, -q.y, -q.z);
        assert!(q.angle_to(neg) < 1e-12);
        assert_abs_diff_eq!(
            Quat::IDENTITY.angle_to(Quat::from_yaw(0.5)),
            0.5,
            epsilon = 1e-12
        );
    }
}
