//! Coordinate conventions, angle conversions and UPA steering vectors.
//!
//! Directions are expressed relative to the IRS normal (the world `+x` axis):
//! `theta` is the horizontal angle (towards `+y`) and `phi` the vertical angle
//! (towards `+z`). Arrays are described by their two element axes; the phase
//! factor of axis 1 is the direction cosine along the IRS `z` axis and that of
//! axis 2 the direction cosine along the IRS `y` axis.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction in front of the IRS, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub const BROADSIDE: Direction = Direction { theta: 0.0, phi: 0.0 };

    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Whether both angles lie in the open half-space `(-pi/2, pi/2)`.
    pub fn is_valid(&self) -> bool {
        self.theta.abs() < FRAC_PI_2 && self.phi.abs() < FRAC_PI_2
    }

    /// Squared Euclidean distance in the `(theta, phi)` plane.
    pub fn dist_sq(&self, other: &Direction) -> f64 {
        let dt = self.theta - other.theta;
        let dp = self.phi - other.phi;
        dt * dt + dp * dp
    }
}

/// Azimuth/elevation pair. `elevation` is measured from the array normal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AzEl {
    pub azimuth: f64,
    pub elevation: f64,
}

impl AzEl {
    pub const BROADSIDE: AzEl = AzEl { azimuth: 0.0, elevation: 0.0 };
}

/// Uniform planar array: `rows` elements along axis 1, `cols` along axis 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(rows: usize, cols: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        let g = Self { rows, cols, spacing, wavelength };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Validation("array must have at least one element per axis".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::Validation("element spacing must be positive".into()));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::Validation("wavelength must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing_over_wavelength(&self) -> f64 {
        self.spacing / self.wavelength
    }
}

/// Cartesian point in the world frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn sub(&self, o: &Position) -> [f64; 3] {
        [self.x - o.x, self.y - o.y, self.z - o.z]
    }

    pub fn offset(&self, v: [f64; 3]) -> Position {
        Position::new(self.x + v[0], self.y + v[1], self.z + v[2])
    }

    pub fn distance(&self, o: &Position) -> f64 {
        norm(self.sub(o))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Angles of `p` as seen from the IRS center. Requires `p.x > irs_center.x`.
pub fn direction_from_position(p: &Position, irs_center: &Position) -> Result<Direction> {
    let dx = p.x - irs_center.x;
    if !(dx > 0.0) {
        return Err(Error::DegeneratePosition(format!(
            "point ({}, {}, {}) is not in front of the IRS plane x = {}",
            p.x, p.y, p.z, irs_center.x
        )));
    }
    Ok(Direction {
        theta: ((p.y - irs_center.y) / dx).atan(),
        phi: ((p.z - irs_center.z) / dx).atan(),
    })
}

/// Point at range `r` from the IRS center along `d`.
pub fn position_along(irs_center: &Position, d: Direction, r: f64) -> Position {
    let (t1, t2) = (d.theta.tan(), d.phi.tan());
    let ux = 1.0 / (1.0 + t1 * t1 + t2 * t2).sqrt();
    irs_center.offset([r * ux, r * ux * t1, r * ux * t2])
}

/// Maps a direction to azimuth/elevation.
///
/// Elevation is `atan(sqrt(tan^2 theta + tan^2 phi))`. Azimuth is
/// `atan(tan theta / tan phi) + (pi/2)(1 - sign(tan phi))`, wrapped to
/// `[0, 2pi)`, with `sign(0) = +1`. On the `tan phi = 0` line the azimuth takes
/// its one-sided limit; at broadside it is 0.
pub fn azel_from_direction(d: Direction) -> AzEl {
    let t1 = d.theta.tan();
    let t2 = d.phi.tan();
    let elevation = (t1 * t1 + t2 * t2).sqrt().atan();
    if t1 == 0.0 && t2 == 0.0 {
        return AzEl::BROADSIDE;
    }
    let azimuth = if t2 == 0.0 {
        FRAC_PI_2.copysign(t1)
    } else {
        let sign = if t2 >= 0.0 { 1.0 } else { -1.0 };
        (t1 / t2).atan() + FRAC_PI_2 * (1.0 - sign)
    };
    AzEl { azimuth: azimuth.rem_euclid(TAU), elevation }
}

/// Phase factors `(A1, A2) = (sin(el) cos(az), sin(el) sin(az))`.
pub fn phase_factors(az_el: AzEl) -> (f64, f64) {
    let s = az_el.elevation.sin();
    (s * az_el.azimuth.cos(), s * az_el.azimuth.sin())
}

/// Phase factors of a direction; broadside maps to `(0, 0)` without the
/// azimuth/elevation detour.
pub fn direction_factors(d: Direction) -> (f64, f64) {
    if d.theta == 0.0 && d.phi == 0.0 {
        return (0.0, 0.0);
    }
    phase_factors(azel_from_direction(d))
}

/// Inverse of [`direction_factors`] for points strictly inside the unit disk.
pub fn direction_from_factors(a1: f64, a2: f64) -> Result<Direction> {
    let r2 = a1 * a1 + a2 * a2;
    if !(r2 < 1.0) {
        return Err(Error::Domain(format!("phase factors ({a1}, {a2}) outside the visible region")));
    }
    let ux = (1.0 - r2).sqrt();
    Ok(Direction { theta: a2.atan2(ux), phi: a1.atan2(ux) })
}

/// Per-axis steering vector `exp(j 2pi (d/lambda) A (q - (Q-1)/2))`, `q = 0..Q-1`.
pub fn axis_steering(count: usize, spacing_over_wavelength: f64, factor: f64) -> Vec<Complex64> {
    let center = (count as f64 - 1.0) / 2.0;
    let k = 2.0 * PI * spacing_over_wavelength * factor;
    (0..count).map(|q| Complex64::from_polar(1.0, k * (q as f64 - center))).collect()
}

/// Kronecker product of two vectors, `a` outer.
pub fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

/// Steering vector for explicit phase factors.
pub fn steering_from_factors(g: &ArrayGeometry, a1: f64, a2: f64) -> Vec<Complex64> {
    let dl = g.spacing_over_wavelength();
    kron(&axis_steering(g.rows, dl, a1), &axis_steering(g.cols, dl, a2))
}

/// Steering vector `a1 (x) a2` for an azimuth/elevation pair.
pub fn steering_vector(g: &ArrayGeometry, az_el: AzEl) -> Vec<Complex64> {
    let (a1, a2) = phase_factors(az_el);
    steering_from_factors(g, a1, a2)
}

/// Steering vector for a direction relative to the IRS normal.
pub fn steering_for_direction(g: &ArrayGeometry, d: Direction) -> Vec<Complex64> {
    let (a1, a2) = direction_factors(d);
    steering_from_factors(g, a1, a2)
}

/// Placement and orientation of an array in the world frame.
///
/// `axis1` and `axis2` are orthonormal element axes. The phase factors of a
/// target point are the direction cosines of the unit vector towards it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayFrame {
    pub origin: Position,
    pub axis1: [f64; 3],
    pub axis2: [f64; 3],
    pub geometry: ArrayGeometry,
}

impl ArrayFrame {
    /// IRS in the `y-z` plane facing `+x`; axis 1 along `z`, axis 2 along `y`.
    pub fn irs(origin: Position, geometry: ArrayGeometry) -> Self {
        Self { origin, axis1: [0.0, 0.0, 1.0], axis2: [0.0, 1.0, 0.0], geometry }
    }

    /// Phase factors of the plane wave exchanged with `target`.
    pub fn factors_towards(&self, target: &Position) -> Result<(f64, f64)> {
        let v = target.sub(&self.origin);
        let n = norm(v);
        if !(n > 0.0) {
            return Err(Error::DegeneratePosition("target coincides with array origin".into()));
        }
        let u = [v[0] / n, v[1] / n, v[2] / n];
        Ok((dot(u, self.axis1), dot(u, self.axis2)))
    }

    pub fn steering_towards(&self, target: &Position) -> Result<Vec<Complex64>> {
        let (a1, a2) = self.factors_towards(target)?;
        Ok(steering_from_factors(&self.geometry, a1, a2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn on_normal_point_is_broadside() {
        let c = Position::new(-40.0, 40.0, 5.0);
        let d = direction_from_position(&Position::new(0.0, 40.0, 5.0), &c).unwrap();
        assert_eq!(d, Direction::BROADSIDE);
        let d = direction_from_position(&c.offset([1.0, 0.0, 0.0]), &c).unwrap();
        assert_eq!(d, Direction::BROADSIDE);
    }

    #[test]
    fn diagonal_point() {
        let d = direction_from_position(&Position::new(1.0, 1.0, 0.0), &Position::default()).unwrap();
        assert_abs_diff_eq!(d.theta, FRAC_PI_4, epsilon = 1e-15);
        assert_eq!(d.phi, 0.0);
    }

    #[test]
    fn behind_plane_is_rejected() {
        let c = Position::default();
        assert!(direction_from_position(&Position::new(0.0, 1.0, 0.0), &c).is_err());
        assert!(direction_from_position(&Position::new(-1.0, 1.0, 0.0), &c).is_err());
    }

    #[test]
    fn azel_examples() {
        let ae = azel_from_direction(Direction::new(FRAC_PI_4, FRAC_PI_4));
        assert_abs_diff_eq!(ae.elevation, 2f64.sqrt().atan(), epsilon = 1e-15);
        assert_abs_diff_eq!(ae.azimuth, FRAC_PI_4, epsilon = 1e-15);
        // tan(phi) < 0 takes the +pi branch
        let ae = azel_from_direction(Direction::new(0.1, -0.1));
        assert_abs_diff_eq!(ae.azimuth, (-1.0f64).atan() + PI, epsilon = 1e-15);
        assert_eq!(azel_from_direction(Direction::BROADSIDE), AzEl::BROADSIDE);
    }

    #[test]
    fn phase_factor_examples() {
        assert_eq!(phase_factors(AzEl { azimuth: 1.3, elevation: 0.0 }), (0.0, 0.0));
        let (a1, a2) = phase_factors(AzEl { azimuth: 0.0, elevation: FRAC_PI_2 });
        assert_abs_diff_eq!(a1, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a2, 0.0, epsilon = 1e-15);
        let (a1, a2) = phase_factors(AzEl { azimuth: FRAC_PI_4, elevation: FRAC_PI_2 });
        assert_abs_diff_eq!(a1, 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(a2, 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn steering_examples() {
        let g = ArrayGeometry::new(2, 1, 0.5, 1.0).unwrap();
        let a = steering_from_factors(&g, 1.0, 0.0);
        assert_abs_diff_eq!(a[0].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[0].im, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1].im, 1.0, epsilon = 1e-15);
        let g = ArrayGeometry::new(3, 1, 0.5, 1.0).unwrap();
        let a = steering_from_factors(&g, 1.0, 0.0);
        assert_abs_diff_eq!(a[0].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[2].re, -1.0, epsilon = 1e-15);
        let g = ArrayGeometry::new(4, 5, 0.5, 1.0).unwrap();
        assert!(steering_vector(&g, AzEl::BROADSIDE).iter().all(|z| *z == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn factors_are_direction_cosines() {
        let d = Direction::new(FRAC_PI_4, FRAC_PI_4);
        let (a1, a2) = direction_factors(d);
        let c = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(a1, c, epsilon = 1e-14);
        assert_abs_diff_eq!(a2, c, epsilon = 1e-14);
    }

    #[test]
    fn invalid_geometry() {
        assert!(ArrayGeometry::new(0, 1, 0.5, 1.0).is_err());
        assert!(ArrayGeometry::new(1, 1, 0.0, 1.0).is_err());
        assert!(ArrayGeometry::new(1, 1, 0.5, -1.0).is_err());
    }
}
