//! Design of the direction-estimation beam shape.
//!
//! The objective approximates the estimation MSE over a square coverage
//! region centred on the main lobe of the central codeword: for every pair of
//! directions it weights their squared distance by a Gaussian kernel in the
//! gain differences of the nine surrounding codewords. Midpoint quadrature on
//! a `G x G` grid gives `G^4` kernel terms. The incident wave is taken at
//! normal incidence. Values are normalized so that a zero design SNR yields 1.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{axis_gain, coverage_width, golden_max, BeamShape};
use crate::error::{Error, Result};
use crate::geometry::{self, Direction};

/// Parameters of the beam-shape design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    /// Cells per axis.
    pub q: usize,
    /// Codewords per axis.
    pub m_count: usize,
    /// Kernel scale relative to the peak gain: exponent is
    /// `-design_snr * sum_m |dg_m|^2 / g_max^2`.
    pub design_snr: f64,
    /// Quadrature points per angular axis.
    pub grid_g: usize,
    pub step: f64,
    pub decay: f64,
    pub stop_tol: f64,
    /// Coverage width per axis, radians.
    pub coverage: f64,
    pub spacing_over_wavelength: f64,
    pub max_iter: usize,
}

impl DesignConfig {
    /// Defaults for a `Q x Q` IRS with `M` codewords per axis.
    pub fn new(q: usize, m_count: usize, design_snr: f64) -> Self {
        Self {
            q,
            m_count,
            design_snr,
            grid_g: 20,
            step: 200.0,
            decay: 0.99,
            stop_tol: 1e-4,
            coverage: coverage_width(m_count.max(1)),
            spacing_over_wavelength: 0.5,
            max_iter: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 || self.m_count == 0 {
            return Err(Error::Validation("Q and M must be at least 1".into()));
        }
        if self.grid_g < 8 {
            return Err(Error::Validation(format!("grid_G must be at least 8, got {}", self.grid_g)));
        }
        if !(self.step > 0.0) {
            return Err(Error::Validation("step must be positive".into()));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Validation("decay must lie in (0, 1]".into()));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::Validation("stop_tol must be positive".into()));
        }
        if !(self.design_snr >= 0.0) || !self.design_snr.is_finite() {
            return Err(Error::Validation("design_snr must be finite and nonnegative".into()));
        }
        if !(self.coverage > 0.0) {
            return Err(Error::Validation("coverage must be positive".into()));
        }
        if !(self.spacing_over_wavelength > 0.0) {
            return Err(Error::Validation("spacing must be positive".into()));
        }
        Ok(())
    }

    fn ramp_step(&self) -> f64 {
        4.0 * PI * self.spacing_over_wavelength / self.m_count as f64
    }
}

/// Phase factor of the main lobe of a bare shape (no ramp, normal incidence).
pub fn shape_lobe_factor(shape: &BeamShape, spacing_over_wavelength: f64) -> f64 {
    let w = shape.omega();
    let n = 2001;
    let h = 2.0 / (n - 1) as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        let a = -1.0 + h * i as f64;
        let v = axis_gain(&w, spacing_over_wavelength, a).norm();
        if v > best.0 {
            best = (v, a);
        }
    }
    golden_max(|a| axis_gain(&w, spacing_over_wavelength, a).norm(), (best.1 - h).max(-1.0), (best.1 + h).min(1.0))
}

/// Shape-independent quantities of the objective.
#[derive(Debug, Clone)]
pub struct MseObjectiveCache {
    cfg: DesignConfig,
    pub center: Direction,
    pub points: Vec<Direction>,
    /// `axis[k][p][j * Q + q] = conj(a_q(psi_p)) exp(j s_j (q + 1))` for axis `k`
    /// and ramp offset `j - 1`.
    axis: [Vec<Vec<Complex64>>; 2],
    flat: f64,
}

const OFFSETS: usize = 3;

impl MseObjectiveCache {
    /// Coverage region centred on `center`, whose phase factors `(A1, A2)`
    /// must be the main lobe of the zero-ramp codeword.
    pub fn new(cfg: &DesignConfig, center: Direction) -> Result<Self> {
        cfg.validate()?;
        let g = cfg.grid_g;
        let cell = cfg.coverage / g as f64;
        let coord = |c: f64, i: usize| c - cfg.coverage / 2.0 + (i as f64 + 0.5) * cell;
        let mut points = Vec::with_capacity(g * g);
        for i in 0..g {
            for j in 0..g {
                points.push(Direction::new(coord(center.theta, i), coord(center.phi, j)));
            }
        }
        let q = cfg.q;
        let ramps: Vec<Vec<Complex64>> = (0..OFFSETS)
            .map(|j| {
                let s = (j as f64 - 1.0) * cfg.ramp_step();
                (1..=q).map(|qi| Complex64::from_polar(1.0, s * qi as f64)).collect()
            })
            .collect();
        let mut axis: [Vec<Vec<Complex64>>; 2] = [Vec::with_capacity(points.len()), Vec::with_capacity(points.len())];
        for p in &points {
            let (a1, a2) = geometry::direction_factors(*p);
            for (k, a) in [a1, a2].into_iter().enumerate() {
                let st = geometry::axis_steering(q, cfg.spacing_over_wavelength, a);
                let mut row = Vec::with_capacity(OFFSETS * q);
                for r in &ramps {
                    row.extend(st.iter().zip(r).map(|(s, r)| s.conj() * r));
                }
                axis[k].push(row);
            }
        }
        let mut flat = 0.0;
        for a in &points {
            for b in &points {
                flat += a.dist_sq(b);
            }
        }
        Ok(Self { cfg: cfg.clone(), center, points, axis, flat })
    }

    /// Cache for the coverage region around the main lobe of `shape`.
    pub fn for_shape(cfg: &DesignConfig, shape: &BeamShape) -> Result<Self> {
        let a = shape_lobe_factor(shape, cfg.spacing_over_wavelength);
        let center = geometry::direction_from_factors(a, a)?;
        Self::new(cfg, center)
    }

    pub fn config(&self) -> &DesignConfig {
        &self.cfg
    }

    fn check(&self, shape: &BeamShape) -> Result<()> {
        if shape.len() != self.cfg.q {
            return Err(Error::Dimension(format!("shape has {} phases, design expects {}", shape.len(), self.cfg.q)));
        }
        Ok(())
    }

    /// Per-axis gains `u[k][j]` at point `p`.
    fn axis_gains(&self, p: usize, omega: &[Complex64]) -> [[Complex64; OFFSETS]; 2] {
        let q = self.cfg.q;
        let mut out = [[Complex64::default(); OFFSETS]; 2];
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.axis[k][p];
            for (j, v) in o.iter_mut().enumerate() {
                *v = row[j * q..(j + 1) * q].iter().zip(omega).map(|(c, w)| c * w).sum();
            }
        }
        out
    }

    fn all_gains(&self, omega: &[Complex64]) -> Vec<[Complex64; 9]> {
        (0..self.points.len())
            .map(|p| {
                let u = self.axis_gains(p, omega);
                let mut g = [Complex64::default(); 9];
                for j1 in 0..OFFSETS {
                    for j2 in 0..OFFSETS {
                        g[j1 * OFFSETS + j2] = u[0][j1] * u[1][j2];
                    }
                }
                g
            })
            .collect()
    }

    fn kernel_scale(&self) -> f64 {
        let q = self.cfg.q as f64;
        self.cfg.design_snr / (q * q * q * q)
    }

    /// Row `i` of the pair sum: objective contribution and, when requested,
    /// `C_j(i) = sum_k W_ik (g_j(i) - g_j(k))`.
    fn row(&self, i: usize, gains: &[[Complex64; 9]], with_c: bool) -> (f64, [Complex64; 9]) {
        let scale = self.kernel_scale();
        let gi = &gains[i];
        let pi = self.points[i];
        let mut f = 0.0;
        let mut c = [Complex64::default(); 9];
        for (k, gk) in gains.iter().enumerate() {
            let d = pi.dist_sq(&self.points[k]);
            if d == 0.0 {
                continue;
            }
            let mut diff = [Complex64::default(); 9];
            let mut s = 0.0;
            for j in 0..9 {
                diff[j] = gi[j] - gk[j];
                s += diff[j].norm_sqr();
            }
            let w = d * (-scale * s).exp();
            f += w;
            if with_c {
                for j in 0..9 {
                    c[j] += diff[j] * w;
                }
            }
        }
        (f, c)
    }

    /// Normalized objective.
    pub fn value(&self, shape: &BeamShape) -> Result<f64> {
        self.check(shape)?;
        let gains = self.all_gains(&shape.omega());
        let rows: Vec<f64> = (0..self.points.len()).into_par_iter().map(|i| self.row(i, &gains, false).0).collect();
        Ok(rows.iter().sum::<f64>() / self.flat)
    }

    /// Objective and its gradient with respect to the phases.
    pub fn value_and_gradient(&self, shape: &BeamShape) -> Result<(f64, Vec<f64>)> {
        self.check(shape)?;
        let q = self.cfg.q;
        let omega = shape.omega();
        let gains = self.all_gains(&omega);
        let rows: Vec<(f64, [Complex64; 9])> = (0..self.points.len()).into_par_iter().map(|i| self.row(i, &gains, true)).collect();
        let value = rows.iter().map(|r| r.0).sum::<f64>() / self.flat;
        let partial: Vec<Vec<f64>> = (0..self.points.len())
            .into_par_iter()
            .map(|p| {
                let u = self.axis_gains(p, &omega);
                let c = &rows[p].1;
                let mut out = vec![0.0; q];
                for j1 in 0..OFFSETS {
                    for j2 in 0..OFFSETS {
                        let cj = c[j1 * OFFSETS + j2].conj();
                        let r1 = &self.axis[0][p][j1 * q..(j1 + 1) * q];
                        let r2 = &self.axis[1][p][j2 * q..(j2 + 1) * q];
                        for i in 0..q {
                            // d g / d rho_i = j w_i (c1_i v + u c2_i)
                            let d = Complex64::i() * omega[i] * (r1[i] * u[1][j2] + u[0][j1] * r2[i]);
                            out[i] += (d * cj).re;
                        }
                    }
                }
                out
            })
            .collect();
        let factor = -4.0 * self.kernel_scale() / self.flat;
        let mut grad = vec![0.0; q];
        for p in &partial {
            for (g, v) in grad.iter_mut().zip(p) {
                *g += v;
            }
        }
        for g in &mut grad {
            *g *= factor;
        }
        Ok((value, grad))
    }

    /// Unnormalized kernel `exp(-design_snr * sum_m |g_m(a) - g_m(b)|^2 / g_max^2)`.
    pub fn equivocation_density(&self, shape: &BeamShape, a: Direction, b: Direction) -> f64 {
        equivocation_density(a, b, shape, &self.cfg)
    }
}

/// Kernel of one direction pair under the nine-codeword neighbourhood, with
/// the central codeword ramp at zero.
pub fn equivocation_density(a: Direction, b: Direction, shape: &BeamShape, cfg: &DesignConfig) -> f64 {
    let q = shape.len();
    let dl = cfg.spacing_over_wavelength;
    let omega = shape.omega();
    let gain = |d: Direction, j1: usize, j2: usize| {
        let (a1, a2) = geometry::direction_factors(d);
        let w = |j: usize| -> Vec<Complex64> {
            let s = (j as f64 - 1.0) * cfg.ramp_step();
            omega.iter().enumerate().map(|(i, w)| w * Complex64::from_polar(1.0, s * (i + 1) as f64)).collect()
        };
        axis_gain(&w(j1), dl, a1) * axis_gain(&w(j2), dl, a2)
    };
    let mut s = 0.0;
    for j1 in 0..OFFSETS {
        for j2 in 0..OFFSETS {
            s += (gain(a, j1, j2) - gain(b, j1, j2)).norm_sqr();
        }
    }
    let qf = q as f64;
    (-cfg.design_snr * s / (qf * qf * qf * qf)).exp()
}

/// Normalized approximate MSE of `shape` around its own main lobe.
pub fn mse_hat(shape: &BeamShape, cfg: &DesignConfig) -> Result<f64> {
    MseObjectiveCache::for_shape(cfg, shape)?.value(shape)
}

/// Gradient of [`mse_hat`] with the coverage region held fixed.
pub fn mse_hat_gradient(shape: &BeamShape, cfg: &DesignConfig) -> Result<Vec<f64>> {
    Ok(MseObjectiveCache::for_shape(cfg, shape)?.value_and_gradient(shape)?.1)
}

/// Design SNR at which the central codeword's kernel between the coverage
/// center and the coverage edge equals `e^-1`.
pub fn default_design_snr(shape: &BeamShape, cfg: &DesignConfig) -> Result<f64> {
    let cache = MseObjectiveCache::for_shape(cfg, shape)?;
    let c = cache.center;
    let edge = Direction::new(c.theta + cfg.coverage / 2.0, c.phi);
    let dl = cfg.spacing_over_wavelength;
    let w = shape.omega();
    let g = |d: Direction| {
        let (a1, a2) = geometry::direction_factors(d);
        axis_gain(&w, dl, a1) * axis_gain(&w, dl, a2)
    };
    let diff = (g(c) - g(edge)).norm_sqr();
    if diff == 0.0 {
        return Err(Error::Singular("central gain is flat across the coverage region".into()));
    }
    let q = shape.len() as f64;
    Ok(q * q * q * q / diff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `||w^l zeta grad|| < mu`.
    StepBelowTolerance,
    /// Backtracking shrank the step below tolerance without descent.
    NoDescent,
    IterationCap,
}

/// Outcome of [`optimize_beam_shape`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub config: DesignConfig,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Norm of the last attempted step `w^l zeta grad`.
    pub last_step_norm: f64,
    /// Objective after every accepted iteration.
    pub history: Vec<f64>,
    pub center_theta: f64,
    pub center_phi: f64,
}

impl DesignReport {
    pub fn converged(&self) -> bool {
        self.stop_reason != StopReason::IterationCap
    }
}

/// Gradient descent `rho <- rho - w^l zeta grad` with step halving until the
/// objective does not increase. The coverage region is anchored at the main
/// lobe of `init`.
pub fn optimize_beam_shape(init: &BeamShape, cfg: &DesignConfig) -> Result<(BeamShape, DesignReport)> {
    let cache = MseObjectiveCache::for_shape(cfg, init)?;
    optimize_with_cache(init, &cache)
}

/// As [`optimize_beam_shape`] with a prebuilt objective.
pub fn optimize_with_cache(init: &BeamShape, cache: &MseObjectiveCache) -> Result<(BeamShape, DesignReport)> {
    let cfg = cache.config().clone();
    let mut rho = init.phases.clone();
    let (mut f, mut grad) = cache.value_and_gradient(init)?;
    let initial = f;
    let mut history = vec![f];
    let mut stop = StopReason::IterationCap;
    let mut last_norm = f64::NAN;
    let mut iterations = 0;
    for l in 0..cfg.max_iter {
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let mut step = cfg.step * cfg.decay.powi(l as i32);
        last_norm = step * gnorm;
        if last_norm < cfg.stop_tol {
            stop = StopReason::StepBelowTolerance;
            break;
        }
        let accepted = loop {
            let cand: Vec<f64> = rho.iter().zip(&grad).map(|(r, g)| r - step * g).collect();
            let shape = BeamShape::from_phases(cand)?;
            let fc = cache.value(&shape)?;
            if fc <= f {
                break Some((shape, fc));
            }
            step *= 0.5;
            if step * gnorm < cfg.stop_tol {
                break None;
            }
        };
        let Some((shape, fc)) = accepted else {
            last_norm = step * gnorm;
            stop = StopReason::NoDescent;
            break;
        };
        rho = shape.phases;
        let (fv, gv) = cache.value_and_gradient(&BeamShape::from_phases(rho.clone())?)?;
        debug_assert!((fv - fc).abs() <= 1e-12 * fc.abs().max(1.0));
        f = fv;
        grad = gv;
        history.push(f);
        iterations = l + 1;
    }
    let report = DesignReport {
        config: cfg,
        initial_objective: initial,
        final_objective: f,
        iterations,
        stop_reason: stop,
        last_step_norm: last_norm,
        history,
        center_theta: cache.center.theta,
        center_phi: cache.center.phi,
    };
    Ok((BeamShape::from_phases(rho)?, report))
}
