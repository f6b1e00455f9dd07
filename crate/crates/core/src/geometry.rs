//! Frames, rotations and link-direction geometry.
//!
//! Euler angles follow the Z-X-Y convention common for multirotors:
//! `R_WB = Rz(yaw) * Rx(roll) * Ry(pitch)` maps body coordinates to world
//! coordinates. Yaw is carried for completeness but every caller in this crate
//! uses zero. With this convention the body thrust axis is
//! `z_B = (sin(pitch), -cos(pitch) sin(roll), cos(pitch) cos(roll))` at zero
//! yaw, which is the form the quadratic gain surrogate in [`crate::comms`] is
//! written against.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard gravity [m/s^2].
pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Three-component real vector. Units depend on context (m, m/s or m/s^2).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const E1: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const E2: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const E3: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    /// Checked constructor for values coming from outside the crate.
    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = Vec3::new(x, y, z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain(format!("non-finite vector component in {v:?}")))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    /// Component by axis index (0, 1, 2).
    pub fn axis(&self, j: usize) -> f64 {
        match j {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index {j} out of range"),
        }
    }

    pub fn set_axis(&mut self, j: usize, value: f64) {
        match j {
            0 => self.x = value,
            1 => self.y = value,
            2 => self.z = value,
            _ => panic!("axis index {j} out of range"),
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        self.scale(s)
    }
}

/// Roll, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Attitude {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Attitude {
    pub const HOVER: Attitude = Attitude {
        roll: 0.0,
        pitch: 0.0,
        yaw: 0.0,
    };

    /// Validated constructor: roll and pitch in (-pi/2, pi/2), yaw in [-pi, pi].
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Result<Self> {
        let open = |a: f64| a.is_finite() && a.abs() < FRAC_PI_2;
        if !open(roll) {
            return Err(Error::domain(format!("roll {roll} outside (-pi/2, pi/2)")));
        }
        if !open(pitch) {
            return Err(Error::domain(format!("pitch {pitch} outside (-pi/2, pi/2)")));
        }
        if !(yaw.is_finite() && yaw.abs() <= PI) {
            return Err(Error::domain(format!("yaw {yaw} outside [-pi, pi]")));
        }
        Ok(Attitude { roll, pitch, yaw })
    }

    /// Zero-yaw tilt. Does not validate; use for angles produced internally.
    pub const fn tilt(roll: f64, pitch: f64) -> Self {
        Attitude {
            roll,
            pitch,
            yaw: 0.0,
        }
    }
}

/// 3x3 rotation matrix stored row-major: `m[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix {
    pub m: [[f64; 3]; 3],
}

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix = RotationMatrix {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn about_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        RotationMatrix {
            m: [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        }
    }

    pub fn about_y(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        RotationMatrix {
            m: [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        }
    }

    pub fn about_z(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        RotationMatrix {
            m: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        RotationMatrix {
            m: [
                [m[0][0], m[1][0], m[2][0]],
                [m[0][1], m[1][1], m[2][1]],
                [m[0][2], m[1][2], m[2][2]],
            ],
        }
    }

    pub fn mul(&self, rhs: &RotationMatrix) -> Self {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        RotationMatrix { m: out }
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.m;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest entry of |R^T R - I|.
    pub fn orthonormality_error(&self) -> f64 {
        let p = self.transpose().mul(self);
        let mut worst: f64 = 0.0;
        for (i, row) in p.m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }
}

/// Body-to-world rotation `Rz(yaw) Rx(roll) Ry(pitch)`.
pub fn rotation_body_to_world(att: Attitude) -> RotationMatrix {
    RotationMatrix::about_z(att.yaw)
        .mul(&RotationMatrix::about_x(att.roll))
        .mul(&RotationMatrix::about_y(att.pitch))
}

/// World-to-body rotation: applied to a world-frame vector it yields the
/// body-frame coordinates of that vector.
pub fn rotation_world_to_body(att: Attitude) -> RotationMatrix {
    rotation_body_to_world(att).transpose()
}

/// Angle in [0, pi] between `body_vec` and the body z-axis (the dipole axis).
///
/// The elevation form `atan(h3 / hypot(h1, h2)) - pi/2` lies in (-pi, 0) and
/// is the negative of this value. Dipole gains are even in the angle, so the
/// two are interchangeable for every gain computed here.
pub fn angle_from_dipole_axis(body_vec: Vec3) -> Result<f64> {
    let n = body_vec.norm();
    if !(n > 0.0) {
        return Err(Error::Coincident(
            "zero-length link vector has no direction".into(),
        ));
    }
    Ok((body_vec.z / n).clamp(-1.0, 1.0).acos())
}

/// Roll and pitch (zero yaw) of a multirotor following acceleration `a`.
///
/// The thrust axis must point along `a + g e3`. Fails when that vector is zero
/// (free fall) or points at or below the horizon (inverted flight), where no
/// tilt in (-pi/2, pi/2) exists.
pub fn attitude_from_acceleration(a: Vec3, gravity: f64) -> Result<Attitude> {
    let thrust = a + Vec3::new(0.0, 0.0, gravity);
    let n = thrust.norm();
    if !(n > 1e-12) {
        return Err(Error::domain("undefined thrust direction (free fall)"));
    }
    let z = thrust.scale(1.0 / n);
    if z.z <= 0.0 {
        return Err(Error::domain(format!(
            "thrust direction {z:?} requires inverted flight"
        )));
    }
    let pitch = z.x.atan2(z.y.hypot(z.z));
    let roll = (-z.y).atan2(z.z);
    Ok(Attitude::tilt(roll, pitch))
}

/// Unit vector pointing from `from` toward `to`.
pub fn unit_direction(from: Vec3, to: Vec3) -> Result<Vec3> {
    let d = to - from;
    let n = d.norm();
    if !(n > 0.0) {
        return Err(Error::Coincident(format!("{from:?} and {to:?}")));
    }
    Ok(d.scale(1.0 / n))
}
