//! Geometric Rician channels for the BS-IRS and IRS-user links.
//!
//! Each link stores one receive and one transmit steering column per path and
//! the path power gains. Path 0 is the LoS path. The complex path amplitude is
//! the square root of the power gain, so received power falls with the square
//! of the distance.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArrayFrame, Position};

/// Point scatterer with reflection coefficient in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub position: Position,
    pub reflection_coefficient: f64,
}

/// Multipath link `H = A_rx diag(sqrt(gains)) A_tx^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannel {
    pub steering_rx: DMatrix<Complex64>,
    pub steering_tx: DMatrix<Complex64>,
    pub path_gains: Vec<f64>,
}

/// Scalars shared by the LoS-only measurement model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndToEndContext {
    pub xi: Complex64,
    pub noise_variance: f64,
    pub ue_antennas: usize,
    pub tx_power: f64,
}

impl EndToEndContext {
    /// Noise variance per received sample after combining, `Q_UE sigma^2`.
    pub fn sample_noise_variance(&self) -> f64 {
        self.ue_antennas as f64 * self.noise_variance
    }
}

/// Free-space power gain `(v lambda / (4 pi delta))^2`.
pub fn path_gain(distance: f64, reflection_coefficient: f64, wavelength: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("path length must be positive, got {distance}")));
    }
    let a = reflection_coefficient * wavelength / (4.0 * PI * distance);
    Ok(a * a)
}

impl LinkChannel {
    pub fn num_paths(&self) -> usize {
        self.path_gains.len()
    }

    /// LoS power gain over the summed NLoS power gains.
    pub fn rice_factor(&self) -> Option<f64> {
        let nlos: f64 = self.path_gains[1..].iter().sum();
        (nlos > 0.0).then(|| self.path_gains[0] / nlos)
    }

    /// Path amplitude `sqrt(gain)`.
    pub fn amplitude(&self, path: usize) -> f64 {
        self.path_gains[path].sqrt()
    }

    /// Dense channel matrix (rx by tx).
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let amps = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.num_paths(),
            self.path_gains.iter().map(|g| Complex64::new(g.sqrt(), 0.0)),
        ));
        &self.steering_rx * amps * self.steering_tx.adjoint()
    }

    /// `H x` evaluated path by path.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.steering_tx.nrows() {
            return Err(Error::Dimension(format!("tx vector has {} entries, link expects {}", x.len(), self.steering_tx.nrows())));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.steering_rx.nrows()];
        for l in 0..self.num_paths() {
            let c: Complex64 = self.steering_tx.column(l).iter().zip(x).map(|(a, v)| a.conj() * v).sum::<Complex64>() * self.amplitude(l);
            for (o, a) in out.iter_mut().zip(self.steering_rx.column(l).iter()) {
                *o += a * c;
            }
        }
        Ok(out)
    }

    /// `y^H H` evaluated path by path.
    pub fn apply_left(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.steering_rx.nrows() {
            return Err(Error::Dimension(format!("rx vector has {} entries, link expects {}", y.len(), self.steering_rx.nrows())));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.steering_tx.nrows()];
        for l in 0..self.num_paths() {
            let c: Complex64 = self.steering_rx.column(l).iter().zip(y).map(|(a, v)| v.conj() * a).sum::<Complex64>() * self.amplitude(l);
            for (o, a) in out.iter_mut().zip(self.steering_tx.column(l).iter()) {
                *o += c * a.conj();
            }
        }
        Ok(out)
    }
}

/// Rescales the NLoS gains so that the Rice factor equals `target_k`.
pub fn scale_for_rice_factor(link: &LinkChannel, target_k: f64) -> Result<LinkChannel> {
    if !(target_k > 0.0) {
        return Err(Error::Validation(format!("Rice factor must be positive, got {target_k}")));
    }
    let current = link
        .rice_factor()
        .ok_or_else(|| Error::Validation("Rice factor undefined for a link without NLoS paths".into()))?;
    let s = current / target_k;
    let mut out = link.clone();
    for g in &mut out.path_gains[1..] {
        *g *= s;
    }
    Ok(out)
}

/// Single multipath link from `tx` to `rx` with LoS path 0.
pub fn build_link(rx: &ArrayFrame, tx: &ArrayFrame, scatterers: &[Scatterer], wavelength: f64) -> Result<LinkChannel> {
    let paths = scatterers.len() + 1;
    let mut a_rx = DMatrix::zeros(rx.geometry.len(), paths);
    let mut a_tx = DMatrix::zeros(tx.geometry.len(), paths);
    let mut gains = Vec::with_capacity(paths);
    let mut fill = |l: usize, rx_target: &Position, tx_target: &Position, dist: f64, refl: f64| -> Result<()> {
        a_rx.set_column(l, &nalgebra::DVector::from_vec(rx.steering_towards(rx_target)?));
        a_tx.set_column(l, &nalgebra::DVector::from_vec(tx.steering_towards(tx_target)?));
        gains.push(path_gain(dist, refl, wavelength)?);
        Ok(())
    };
    fill(0, &tx.origin, &rx.origin, rx.origin.distance(&tx.origin), 1.0)?;
    for (i, s) in scatterers.iter().enumerate() {
        let d = tx.origin.distance(&s.position) + s.position.distance(&rx.origin);
        fill(i + 1, &s.position, &s.position, d, s.reflection_coefficient)?;
    }
    Ok(LinkChannel { steering_rx: a_rx, steering_tx: a_tx, path_gains: gains })
}

/// Builds the BS-to-IRS and IRS-to-user links.
pub fn build_links(
    bs: &ArrayFrame,
    irs: &ArrayFrame,
    ue: &ArrayFrame,
    scatterers_t: &[Scatterer],
    scatterers_r: &[Scatterer],
    wavelength: f64,
) -> Result<(LinkChannel, LinkChannel)> {
    if !(ue.origin.x > irs.origin.x) {
        return Err(Error::DegeneratePosition("user is not in front of the IRS".into()));
    }
    Ok((build_link(irs, bs, scatterers_t, wavelength)?, build_link(ue, irs, scatterers_r, wavelength)?))
}

/// Per-cell cascade `b_q = [f_UE^H H_r]_q [H_t f_BS]_q`, so that `h = sum_q b_q omega_q`.
pub fn cascade(ht: &LinkChannel, hr: &LinkChannel, f_bs: &[Complex64], f_ue: &[Complex64]) -> Result<Vec<Complex64>> {
    let u = ht.apply(f_bs)?;
    let v = hr.apply_left(f_ue)?;
    if u.len() != v.len() {
        return Err(Error::Dimension(format!("IRS size mismatch between links: {} vs {}", u.len(), v.len())));
    }
    Ok(v.iter().zip(&u).map(|(a, b)| a * b).collect())
}

/// End-to-end gain `f_UE^H H_r diag(omega) H_t f_BS`.
pub fn end_to_end_gain(ht: &LinkChannel, hr: &LinkChannel, omega: &[Complex64], f_bs: &[Complex64], f_ue: &[Complex64]) -> Result<Complex64> {
    let b = cascade(ht, hr, f_bs, f_ue)?;
    if b.len() != omega.len() {
        return Err(Error::Dimension(format!("phase vector has {} entries, IRS has {}", omega.len(), b.len())));
    }
    Ok(b.iter().zip(omega).map(|(b, w)| b * w).sum())
}

/// LoS-path scalar `xi = f_UE^H a_UE sqrt(g_r) sqrt(g_t) a_BS^H f_BS`.
pub fn los_xi(ht: &LinkChannel, hr: &LinkChannel, f_bs: &[Complex64], f_ue: &[Complex64]) -> Result<Complex64> {
    if f_bs.len() != ht.steering_tx.nrows() || f_ue.len() != hr.steering_rx.nrows() {
        return Err(Error::Dimension("beamformer length does not match the array".into()));
    }
    let ue: Complex64 = hr.steering_rx.column(0).iter().zip(f_ue).map(|(a, f)| f.conj() * a).sum();
    let bs: Complex64 = ht.steering_tx.column(0).iter().zip(f_bs).map(|(a, f)| a.conj() * f).sum();
    Ok(ue * bs * hr.amplitude(0) * ht.amplitude(0))
}

/// Circularly-symmetric complex Gaussian sample with total variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// LoS-only pilot observation `r = g xi s + w`, `w ~ CN(0, Q_UE sigma^2 I)`.
pub fn synthesize_measurement<R: Rng + ?Sized>(ctx: &EndToEndContext, g_m: Complex64, pilot: &[Complex64], rng: &mut R) -> Vec<Complex64> {
    let var = ctx.sample_noise_variance();
    pilot.iter().map(|s| g_m * ctx.xi * s + complex_gaussian(rng, var)).collect()
}

/// Full multipath pilot observation `r = h_e2e s + f_UE^H n`.
#[allow(clippy::too_many_arguments)]
pub fn full_measurement<R: Rng + ?Sized>(
    ht: &LinkChannel,
    hr: &LinkChannel,
    omega: &[Complex64],
    f_bs: &[Complex64],
    f_ue: &[Complex64],
    pilot: &[Complex64],
    noise_variance: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let h = end_to_end_gain(ht, hr, omega, f_bs, f_ue)?;
    let var = noise_variance * f_ue.iter().map(|f| f.norm_sqr()).sum::<f64>();
    Ok(pilot.iter().map(|s| h * s + complex_gaussian(rng, var)).collect())
}

/// Uniform scatterers in an axis-aligned cube of edge `edge` around `center`,
/// keeping at least `clearance` meters from every point in `avoid`.
pub fn random_scatterers<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    center: &Position,
    edge: f64,
    avoid: &[Position],
    clearance: f64,
) -> Vec<Scatterer> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = center.offset([
            (rng.random::<f64>() - 0.5) * edge,
            (rng.random::<f64>() - 0.5) * edge,
            (rng.random::<f64>() - 0.5) * edge,
        ]);
        if avoid.iter().any(|a| a.distance(&p) < clearance) {
            continue;
        }
        let refl = 0.2 + 0.8 * (1.0 - rng.random::<f64>());
        out.push(Scatterer { position: p, reflection_coefficient: refl });
    }
    out
}
