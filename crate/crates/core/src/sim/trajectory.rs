//! User trajectories in the horizontal plane through the region center.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Position;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Linear,
    Nonlinear,
}

impl TrajectoryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrajectoryKind::Linear => "linear",
            TrajectoryKind::Nonlinear => "nonlinear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(TrajectoryKind::Linear),
            "nonlinear" => Ok(TrajectoryKind::Nonlinear),
            other => Err(Error::Validation(format!("unknown trajectory kind '{other}'"))),
        }
    }
}

/// Movement region and speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    pub center: Position,
    /// Outer radius `r1`.
    pub outer_radius: f64,
    /// Inner radius `r2`, strictly below `r1`.
    pub inner_radius: f64,
    /// Speed in m/s.
    pub speed: f64,
}

impl MotionParams {
    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::Validation("region center must be finite".into()));
        }
        if !(self.inner_radius > 0.0 && self.inner_radius < self.outer_radius && self.outer_radius.is_finite()) {
            return Err(Error::Validation(format!(
                "radii must satisfy 0 < r2 < r1, got r1 = {}, r2 = {}",
                self.outer_radius, self.inner_radius
            )));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(Error::Validation("speed must be positive".into()));
        }
        Ok(())
    }
}

/// One constant-speed piece of a path, starting at `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Line { t0: f64, t1: f64, from: [f64; 2], to: [f64; 2] },
    /// Counter-clockwise for positive `sweep`.
    Arc { t0: f64, t1: f64, center: [f64; 2], radius: f64, start_angle: f64, sweep: f64 },
}

impl Segment {
    fn span(&self) -> (f64, f64) {
        match *self {
            Segment::Line { t0, t1, .. } | Segment::Arc { t0, t1, .. } => (t0, t1),
        }
    }

    fn point(&self, t: f64) -> [f64; 2] {
        let (t0, t1) = self.span();
        let s = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
        match *self {
            Segment::Line { from, to, .. } => [from[0] + s * (to[0] - from[0]), from[1] + s * (to[1] - from[1])],
            Segment::Arc { center, radius, start_angle, sweep, .. } => {
                let a = start_angle + s * sweep;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
        }
    }
}

/// Piecewise path at constant speed and constant height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub speed: f64,
    pub height: f64,
    pub segments: Vec<Segment>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.segments.last().map(|s| s.span().1).unwrap_or(0.0)
    }

    /// Times where consecutive segments meet.
    pub fn transitions(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.span().0).collect()
    }

    /// Position at time `t`, held at the endpoints outside `[0, duration]`.
    pub fn position(&self, t: f64) -> Position {
        let seg = self
            .segments
            .iter()
            .find(|s| t < s.span().1)
            .or(self.segments.last())
            .expect("trajectory has at least one segment");
        let p = seg.point(t);
        Position::new(p[0], p[1], self.height)
    }
}

fn polar(c: &Position, r: f64, a: f64) -> [f64; 2] {
    [c.x + r * a.cos(), c.y + r * a.sin()]
}

/// Straight chord through the outer circle.
///
/// Heading is towards the center from a uniform entry angle, shifted sideways
/// by an offset uniform in `(-r2, r2)`.
pub fn linear_trajectory<R: Rng + ?Sized>(m: &MotionParams, rng: &mut R) -> Result<Trajectory> {
    m.validate()?;
    let entry = rng.random::<f64>() * TAU;
    let offset = (2.0 * rng.random::<f64>() - 1.0) * m.inner_radius;
    let heading = entry + PI;
    let (u, n) = ([heading.cos(), heading.sin()], [-heading.sin(), heading.cos()]);
    let half = (m.outer_radius * m.outer_radius - offset * offset).sqrt();
    let mid = [m.center.x + offset * n[0], m.center.y + offset * n[1]];
    let from = [mid[0] - half * u[0], mid[1] - half * u[1]];
    let to = [mid[0] + half * u[0], mid[1] + half * u[1]];
    let t1 = 2.0 * half / m.speed;
    Ok(Trajectory {
        kind: TrajectoryKind::Linear,
        speed: m.speed,
        height: m.center.z,
        segments: vec![Segment::Line { t0: 0.0, t1, from, to }],
    })
}

/// Radial approach to `r2`, counter-clockwise arc with sweep uniform in
/// `(pi/2, 3pi/2)`, radial exit to `r1`.
pub fn nonlinear_trajectory<R: Rng + ?Sized>(m: &MotionParams, rng: &mut R) -> Result<Trajectory> {
    let entry = rng.random::<f64>() * TAU;
    let sweep = PI / 2.0 + rng.random::<f64>() * PI;
    nonlinear_trajectory_from(m, entry, sweep)
}

/// Nonlinear trajectory entering at polar angle `entry` (radians, about the
/// center) and turning counter-clockwise by `sweep > 0` before leaving.
pub fn nonlinear_trajectory_from(m: &MotionParams, entry: f64, sweep: f64) -> Result<Trajectory> {
    m.validate()?;
    if !(sweep > 0.0 && sweep.is_finite() && entry.is_finite()) {
        return Err(Error::Validation("arc sweep must be positive and the entry angle finite".into()));
    }
    let radial = (m.outer_radius - m.inner_radius) / m.speed;
    let arc = m.inner_radius * sweep / m.speed;
    let exit = entry + sweep;
    let c = [m.center.x, m.center.y];
    let segments = vec![
        Segment::Line { t0: 0.0, t1: radial, from: polar(&m.center, m.outer_radius, entry), to: polar(&m.center, m.inner_radius, entry) },
        Segment::Arc { t0: radial, t1: radial + arc, center: c, radius: m.inner_radius, start_angle: entry, sweep },
        Segment::Line {
            t0: radial + arc,
            t1: 2.0 * radial + arc,
            from: polar(&m.center, m.inner_radius, exit),
            to: polar(&m.center, m.outer_radius, exit),
        },
    ];
    Ok(Trajectory { kind: TrajectoryKind::Nonlinear, speed: m.speed, height: m.center.z, segments })
}

pub fn generate_trajectory<R: Rng + ?Sized>(kind: TrajectoryKind, m: &MotionParams, rng: &mut R) -> Result<Trajectory> {
    match kind {
        TrajectoryKind::Linear => linear_trajectory(m, rng),
        TrajectoryKind::Nonlinear => nonlinear_trajectory(m, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> MotionParams {
        MotionParams { center: Position::new(0.0, 40.0, 0.0), outer_radius: 10.0, inner_radius: 5.0, speed: 5.0 / 3.6 }
    }

    #[test]
    fn nonlinear_has_two_transitions_and_constant_speed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tr = nonlinear_trajectory(&params(), &mut rng).unwrap();
        assert_eq!(tr.transitions().len(), 2);
        let dt = 1e-3;
        let mut t = dt;
        while t < tr.duration() - dt {
            let v = tr.position(t + dt).distance(&tr.position(t)) / dt;
            assert!((v - tr.speed).abs() < 1e-3 * tr.speed, "speed {v} at {t}");
            t += 0.37;
        }
    }

    #[test]
    fn arc_rate_is_speed_over_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = params();
        let tr = nonlinear_trajectory(&m, &mut rng).unwrap();
        let t0 = tr.transitions()[0];
        let c = m.center;
        let ang = |t: f64| {
            let p = tr.position(t);
            (p.y - c.y).atan2(p.x - c.x)
        };
        let h = 0.01;
        let rate = (ang(t0 + 1.0 + h) - ang(t0 + 1.0)).rem_euclid(TAU) / h;
        assert!((rate - m.speed / m.inner_radius).abs() < 1e-9);
    }

    #[test]
    fn linear_endpoints_on_outer_circle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = params();
        let tr = linear_trajectory(&m, &mut rng).unwrap();
        assert!((tr.position(0.0).distance(&m.center) - 10.0).abs() < 1e-9);
        assert!((tr.position(tr.duration()).distance(&m.center) - 10.0).abs() < 1e-9);
        assert!(tr.transitions().is_empty());
    }
}
