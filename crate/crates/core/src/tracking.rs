//! Trajectory extrapolation from past direction estimates, codeword selection
//! and a constant-velocity Kalman tracker used as a baseline.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

use crate::codebook::{Codebook, Codeword};
use crate::error::{Error, Result};
use crate::geometry::Direction;

/// Bounded window of `(time, estimate)` pairs with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateHistory {
    capacity: usize,
    entries: VecDeque<(f64, Direction)>,
}

impl EstimateHistory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Validation("history capacity must be at least 1".into()));
        }
        Ok(Self { capacity, entries: VecDeque::with_capacity(capacity) })
    }

    /// Appends an estimate, evicting the oldest one when full.
    pub fn push(&mut self, t: f64, d: Direction) -> Result<()> {
        if let Some((last, _)) = self.entries.back() {
            if !(t > *last) {
                return Err(Error::Validation(format!("timestamp {t} does not follow {last}")));
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((t, d));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &(f64, Direction)> {
        self.entries.iter()
    }

    pub fn last(&self) -> Option<&(f64, Direction)> {
        self.entries.back()
    }
}

/// Per-axis polynomials in `t - origin`, lowest order first.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryModel {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub degree: usize,
    /// Time of the newest estimate used in the fit.
    pub origin: f64,
}

impl TrajectoryModel {
    /// Constant model at a known direction.
    pub fn constant(d: Direction, origin: f64) -> Self {
        Self { theta: vec![d.theta], phi: vec![d.phi], degree: 0, origin }
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &b| acc * x + b)
}

/// Least-squares polynomial fit of degree `n` through the history.
///
/// Times are shifted to the newest estimate before forming the normal
/// equations. With fewer than `n + 1` estimates the degree drops to `S - 1`.
pub fn fit_polynomial(history: &EstimateHistory, n: usize) -> Result<TrajectoryModel> {
    let s = history.len();
    if s == 0 {
        return Err(Error::Validation("cannot fit an empty history".into()));
    }
    let degree = n.min(s - 1);
    let origin = history.last().map(|e| e.0).unwrap_or(0.0);
    let k = degree + 1;
    let mut moments = vec![0.0; 2 * degree + 1];
    let mut rhs_t = DVector::zeros(k);
    let mut rhs_p = DVector::zeros(k);
    for (t, d) in history.iter() {
        let tau = t - origin;
        let mut pw = 1.0;
        for (r, m) in moments.iter_mut().enumerate() {
            *m += pw;
            if r < k {
                rhs_t[r] += pw * d.theta;
                rhs_p[r] += pw * d.phi;
            }
            pw *= tau;
        }
    }
    let gram = DMatrix::from_fn(k, k, |i, j| moments[i + j]);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("moment matrix of degree {degree} is not positive definite")))?;
    let theta = chol.solve(&rhs_t);
    let phi = chol.solve(&rhs_p);
    Ok(TrajectoryModel { theta: theta.iter().copied().collect(), phi: phi.iter().copied().collect(), degree, origin })
}

/// Evaluates the model at absolute time `t`.
pub fn extrapolate(model: &TrajectoryModel, t: f64) -> Direction {
    let x = t - model.origin;
    Direction::new(horner(&model.theta, x), horner(&model.phi, x))
}

/// Codeword whose cached main lobe is closest to `d`; ties go to the
/// lexicographically smallest index.
pub fn nearest_codeword(cb: &Codebook, d: Direction) -> Codeword {
    let mut best = (f64::INFINITY, Codeword::new(0, 0));
    for m in cb.codewords() {
        let e = cb.main_lobe(m).dist_sq(&d);
        if e < best.0 {
            best = (e, m);
        }
    }
    best.1
}

/// Data-transmission codeword for time `t`.
pub fn select_dt_codeword(model: &TrajectoryModel, t: f64, cb: &Codebook) -> Codeword {
    nearest_codeword(cb, extrapolate(model, t))
}

/// Estimation codeword for the next estimation sub-block starting at `t`.
pub fn select_ide_codeword(model: &TrajectoryModel, t: f64, cb: &Codebook) -> Codeword {
    nearest_codeword(cb, extrapolate(model, t))
}

/// Constant-velocity Kalman filter on `[theta, theta', phi, phi']`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
    pub q: Matrix4<f64>,
    pub r: Matrix2<f64>,
    /// Propagation step, seconds.
    pub step: f64,
}

fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0)
}

impl KalmanState {
    /// Zero-velocity state at the first estimate with unit covariance.
    pub fn new(first: Direction, process_var: f64, measurement_var: f64, step: f64) -> Result<Self> {
        if !(process_var >= 0.0) || !(measurement_var >= 0.0) {
            return Err(Error::Validation("Kalman noise variances must be nonnegative".into()));
        }
        if !(step > 0.0) {
            return Err(Error::Validation("Kalman step must be positive".into()));
        }
        Ok(Self {
            x: Vector4::new(first.theta, 0.0, first.phi, 0.0),
            p: Matrix4::identity(),
            q: Matrix4::identity() * process_var,
            r: Matrix2::identity() * measurement_var,
            step,
        })
    }

    pub fn transition(&self) -> Matrix4<f64> {
        let t = self.step;
        Matrix4::new(1.0, t, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, t, 0.0, 0.0, 0.0, 1.0)
    }

    pub fn direction(&self) -> Direction {
        Direction::new(self.x[0], self.x[2])
    }

    /// Direction propagated `dt` seconds ahead at the current velocity.
    pub fn direction_after(&self, dt: f64) -> Direction {
        Direction::new(self.x[0] + self.x[1] * dt, self.x[2] + self.x[3] * dt)
    }
}

/// `x <- F x`, `P <- F P F^T + Q`.
pub fn kalman_predict(state: &KalmanState) -> KalmanState {
    let f = state.transition();
    let mut out = state.clone();
    out.x = f * state.x;
    out.p = f * state.p * f.transpose() + state.q;
    out.p = (out.p + out.p.transpose()) * 0.5;
    out
}

/// Measurement update with `z = (theta, phi)`.
///
/// A singular innovation covariance is accepted only when the state is
/// already certain in the observed coordinates; the gain is then zero.
pub fn kalman_update(state: &KalmanState, z: Direction) -> Result<KalmanState> {
    let h = observation();
    let pht = state.p * h.transpose();
    let s = h * pht + state.r;
    let k = match s.try_inverse() {
        Some(inv) => pht * inv,
        None if pht.abs().max() == 0.0 => nalgebra::Matrix4x2::zeros(),
        None => return Err(Error::Singular("innovation covariance is not invertible".into())),
    };
    let innovation = Vector2::new(z.theta, z.phi) - h * state.x;
    let mut out = state.clone();
    out.x = state.x + k * innovation;
    out.p = (Matrix4::identity() - k * h) * state.p;
    out.p = (out.p + out.p.transpose()) * 0.5;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn history(points: &[(f64, f64, f64)], cap: usize) -> EstimateHistory {
        let mut h = EstimateHistory::new(cap).unwrap();
        for &(t, a, b) in points {
            h.push(t, Direction::new(a, b)).unwrap();
        }
        h
    }

    #[test]
    fn exact_line() {
        let h = history(&[(0.0, 0.0, 0.0), (1.0, 1.0, 0.0), (2.0, 2.0, 0.0)], 3);
        let m = fit_polynomial(&h, 1).unwrap();
        // coefficients are relative to the newest timestamp
        assert_abs_diff_eq!(m.theta[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.theta[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(extrapolate(&m, 0.0).theta, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn degree_zero_is_mean() {
        let h = history(&[(0.0, 0.1, 0.4), (1.5, 0.3, -0.2), (3.0, 0.5, 0.1)], 3);
        let m = fit_polynomial(&h, 0).unwrap();
        assert_abs_diff_eq!(m.theta[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(m.phi[0], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn degree_drops_with_short_history() {
        let h = history(&[(0.0, 0.2, 0.1)], 3);
        let m = fit_polynomial(&h, 1).unwrap();
        assert_eq!(m.degree, 0);
        assert_eq!(extrapolate(&m, 10.0), Direction::new(0.2, 0.1));
    }

    #[test]
    fn horner_example() {
        let m = TrajectoryModel { theta: vec![0.0, 1.0], phi: vec![0.0, -1.0], degree: 1, origin: 0.0 };
        assert_eq!(extrapolate(&m, 0.5), Direction::new(0.5, -0.5));
    }

    #[test]
    fn history_rejects_non_increasing_times() {
        let mut h = EstimateHistory::new(2).unwrap();
        h.push(1.0, Direction::BROADSIDE).unwrap();
        assert!(h.push(1.0, Direction::BROADSIDE).is_err());
        h.push(2.0, Direction::BROADSIDE).unwrap();
        h.push(3.0, Direction::BROADSIDE).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.iter().next().unwrap().0, 2.0);
    }

    #[test]
    fn kalman_examples() {
        let mut s = KalmanState::new(Direction::BROADSIDE, 0.0, 1.0, 1.5).unwrap();
        s.x = Vector4::new(0.1, 0.01, 0.2, -0.02);
        let p = kalman_predict(&s);
        assert_abs_diff_eq!(p.x[0], 0.115, epsilon = 1e-15);
        assert_abs_diff_eq!(p.x[2], 0.17, epsilon = 1e-15);
        let u = kalman_update(&s, Direction::new(1.0, 1.0)).unwrap();
        // P = I, R = I gives gain 1/2 on observed rows
        assert_abs_diff_eq!(u.x[0], 0.1 + 0.5 * 0.9, epsilon = 1e-15);
        assert!(u.p.trace() <= s.p.trace());
        let s0 = KalmanState::new(Direction::BROADSIDE, 0.0, 0.0, 1.5).unwrap();
        let u = kalman_update(&s0, Direction::new(0.3, -0.1)).unwrap();
        assert_abs_diff_eq!(u.x[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(u.x[2], -0.1, epsilon = 1e-15);
    }
}
