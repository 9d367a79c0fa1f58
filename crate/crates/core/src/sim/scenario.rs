//! Fixed deployment (BS, IRS, scatterers) and per-position channel evaluation.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, LinkChannel, Scatterer};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::geometry::{self, ArrayFrame, ArrayGeometry, Direction, Position};
use crate::sim::trajectory::MotionParams;
use crate::{dbm_to_watts, SPEED_OF_LIGHT};

/// Deployment parameters; reference defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub bs_position: Position,
    pub irs_position: Position,
    /// IRS cells per axis.
    pub irs_cells: usize,
    /// IRS element spacing in wavelengths.
    pub irs_spacing: f64,
    pub bs_rows: usize,
    pub bs_cols: usize,
    pub ue_rows: usize,
    pub ue_cols: usize,
    pub carrier_hz: f64,
    pub noise_dbm: f64,
    pub rice_t: f64,
    pub rice_r: f64,
    pub scatterers_t: usize,
    pub scatterers_r: usize,
    /// Edge of the cube scatterers are drawn from.
    pub scatterer_box: f64,
    /// Minimum scatterer distance to the arrays and the region center.
    pub scatterer_clearance: f64,
    pub motion: MotionParams,
}

impl ScenarioParams {
    pub fn reference() -> Self {
        Self {
            bs_position: Position::new(0.0, 0.0, 10.0),
            irs_position: Position::new(-40.0, 40.0, 5.0),
            irs_cells: 40,
            irs_spacing: 0.5,
            bs_rows: 16,
            bs_cols: 4,
            ue_rows: 2,
            ue_cols: 2,
            carrier_hz: 28e9,
            noise_dbm: -120.0,
            rice_t: 10.0,
            rice_r: 10.0,
            scatterers_t: 4,
            scatterers_r: 4,
            scatterer_box: 20.0,
            scatterer_clearance: 2.0,
            motion: MotionParams {
                center: Position::new(0.0, 40.0, 0.0),
                outer_radius: 10.0,
                inner_radius: 5.0,
                speed: 5.0 / 3.6,
            },
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// IRS element spacing, m.
    pub fn irs_element_spacing(&self) -> f64 {
        self.irs_spacing * self.wavelength()
    }

    pub fn ue_antennas(&self) -> usize {
        self.ue_rows * self.ue_cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.irs_cells == 0 || self.bs_rows * self.bs_cols == 0 || self.ue_antennas() == 0 {
            return Err(Error::Validation("array sizes must be positive".into()));
        }
        if !(self.irs_spacing > 0.0) || !self.irs_spacing.is_finite() {
            return Err(Error::Validation("IRS element spacing must be positive".into()));
        }
        if !(self.carrier_hz > 0.0) || !self.noise_dbm.is_finite() {
            return Err(Error::Validation("carrier frequency and noise power must be finite and positive".into()));
        }
        if !(self.rice_t > 0.0) || !(self.rice_r > 0.0) {
            return Err(Error::Validation("Rice factors must be positive".into()));
        }
        if self.scatterers_t == 0 || self.scatterers_r == 0 {
            return Err(Error::Validation("each link needs at least one scatterer".into()));
        }
        if !(self.scatterer_box > 0.0) || !(self.scatterer_clearance >= 0.0) {
            return Err(Error::Validation("scatterer box must be positive and clearance nonnegative".into()));
        }
        self.motion.validate()?;
        // the whole movement region must stay in front of the IRS
        if !(self.motion.center.x - self.motion.outer_radius > self.irs_position.x) {
            return Err(Error::Validation("movement region extends behind the IRS plane".into()));
        }
        if !(self.bs_position.x > self.irs_position.x) {
            return Err(Error::Validation("BS is not in front of the IRS plane".into()));
        }
        Ok(())
    }
}

/// Unit-modulus DFT word `index` of a `rows x cols` array.
pub fn dft_combiner(rows: usize, cols: usize, index: usize) -> Vec<Complex64> {
    let word = |n: usize, a: usize| -> Vec<Complex64> {
        (0..n).map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * (a * k) as f64 / n as f64)).collect()
    };
    geometry::kron(&word(rows, index / cols), &word(cols, index % cols))
}

/// User-combiner index with the largest received power; ties go to the
/// lowest index.
pub fn select_combiner(powers: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in powers.iter().enumerate() {
        if *p > powers[best] {
            best = i;
        }
    }
    best
}

/// Precomputed `omega_1` and `omega_2` axis vectors for fast gain sweeps.
#[derive(Debug, Clone)]
pub struct AxisTable {
    pub q: usize,
    pub vectors: Vec<Vec<Complex64>>,
}

impl AxisTable {
    pub fn new(cb: &Codebook) -> Self {
        Self { q: cb.q(), vectors: (0..cb.m_count).map(|m| cb.axis_vector(m)).collect() }
    }

    pub fn m_count(&self) -> usize {
        self.vectors.len()
    }

    /// `omega_1(m1)^T B omega_2(m2)` with `B` the row-major cascade.
    pub fn gain(&self, cascade: &[Complex64], m1: usize, m2: usize) -> Complex64 {
        let (w1, w2) = (&self.vectors[m1], &self.vectors[m2]);
        let mut acc = Complex64::new(0.0, 0.0);
        for (q1, a) in w1.iter().enumerate() {
            let row = &cascade[q1 * self.q..(q1 + 1) * self.q];
            let inner: Complex64 = row.iter().zip(w2).map(|(b, w)| b * w).sum();
            acc += a * inner;
        }
        acc
    }

    /// Gains of all codewords, row-major `m1 * M + m2`.
    pub fn all_gains(&self, cascade: &[Complex64]) -> Vec<Complex64> {
        let (q, m) = (self.q, self.m_count());
        // partial[m2][q1] = sum_q2 B[q1][q2] omega_2(m2)[q2]
        let mut partial = vec![Complex64::new(0.0, 0.0); m * q];
        for (m2, w2) in self.vectors.iter().enumerate() {
            for q1 in 0..q {
                let row = &cascade[q1 * q..(q1 + 1) * q];
                partial[m2 * q + q1] = row.iter().zip(w2).map(|(b, w)| b * w).sum();
            }
        }
        let mut out = Vec::with_capacity(m * m);
        for w1 in &self.vectors {
            for m2 in 0..m {
                out.push(w1.iter().zip(&partial[m2 * q..(m2 + 1) * q]).map(|(a, p)| a * p).sum());
            }
        }
        out
    }
}

/// Deployment with drawn scatterers and the fixed BS-IRS link.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub wavelength: f64,
    /// Noise power per receive antenna in watts.
    pub noise_variance: f64,
    pub bs: ArrayFrame,
    pub irs: ArrayFrame,
    pub ht: LinkChannel,
    pub scatterers_r: Vec<Scatterer>,
    /// `H_t f_BS`, one entry per IRS cell.
    pub incident_field: Vec<Complex64>,
    /// Phase factors of the BS as seen from the IRS.
    pub incident: (f64, f64),
    pub combiners: Vec<Vec<Complex64>>,
}

impl Scenario {
    /// Draws scatterers from `rng` and fixes the BS beamformer towards the IRS.
    pub fn new<R: Rng + ?Sized>(params: &ScenarioParams, rng: &mut R) -> Result<Self> {
        params.validate()?;
        let wavelength = params.wavelength();
        let half = wavelength / 2.0;
        let irs = ArrayFrame::irs(
            params.irs_position,
            ArrayGeometry::new(params.irs_cells, params.irs_cells, params.irs_element_spacing(), wavelength)?,
        );
        // BS broadside along +y with axis 1 along x
        let bs = ArrayFrame {
            origin: params.bs_position,
            axis1: [1.0, 0.0, 0.0],
            axis2: [0.0, 0.0, 1.0],
            geometry: ArrayGeometry::new(params.bs_rows, params.bs_cols, half, wavelength)?,
        };
        let mid = Position::new(
            (params.bs_position.x + params.irs_position.x) / 2.0,
            (params.bs_position.y + params.irs_position.y) / 2.0,
            (params.bs_position.z + params.irs_position.z) / 2.0,
        );
        let c = params.scatterer_clearance;
        let scat_t = channel::random_scatterers(rng, params.scatterers_t, &mid, params.scatterer_box, &[bs.origin, irs.origin], c);
        let scatterers_r =
            channel::random_scatterers(rng, params.scatterers_r, &params.motion.center, params.scatterer_box, &[irs.origin, params.motion.center], c);
        let ht = channel::scale_for_rice_factor(&channel::build_link(&irs, &bs, &scat_t, wavelength)?, params.rice_t)?;
        let mut f_bs = bs.steering_towards(&irs.origin)?;
        let n = (f_bs.len() as f64).sqrt();
        f_bs.iter_mut().for_each(|f| *f /= n);
        let incident_field = ht.apply(&f_bs)?;
        let incident = irs.factors_towards(&bs.origin)?;
        let combiners = (0..params.ue_antennas()).map(|i| dft_combiner(params.ue_rows, params.ue_cols, i)).collect();
        Ok(Self {
            params: params.clone(),
            wavelength,
            noise_variance: dbm_to_watts(params.noise_dbm),
            bs,
            irs,
            ht,
            scatterers_r,
            incident_field,
            incident,
            combiners,
        })
    }

    /// User array at `p`, broadside towards `-x`.
    pub fn ue_frame(&self, p: Position) -> Result<ArrayFrame> {
        let geometry = ArrayGeometry::new(self.params.ue_rows, self.params.ue_cols, self.wavelength / 2.0, self.wavelength)?;
        Ok(ArrayFrame { origin: p, axis1: [0.0, 0.0, 1.0], axis2: [0.0, 1.0, 0.0], geometry })
    }

    /// IRS-to-user link at `p` with the Rice factor pinned to `K_r`.
    pub fn user_link(&self, p: Position) -> Result<LinkChannel> {
        let link = channel::build_link(&self.ue_frame(p)?, &self.irs, &self.scatterers_r, self.wavelength)?;
        channel::scale_for_rice_factor(&link, self.params.rice_r)
    }

    pub fn true_direction(&self, p: Position) -> Result<Direction> {
        geometry::direction_from_position(&p, &self.irs.origin)
    }

    /// Per-cell cascades at `p`, one per user combiner.
    pub fn cascades(&self, p: Position) -> Result<Vec<Vec<Complex64>>> {
        let hr = self.user_link(p)?;
        self.combiners.iter().map(|f| self.cascade_with(&hr, f)).collect()
    }

    /// Per-cell cascade at `p` for one combiner.
    pub fn cascade(&self, p: Position, combiner: usize) -> Result<Vec<Complex64>> {
        let hr = self.user_link(p)?;
        self.cascade_with(&hr, &self.combiners[combiner])
    }

    fn cascade_with(&self, hr: &LinkChannel, f_ue: &[Complex64]) -> Result<Vec<Complex64>> {
        let v = hr.apply_left(f_ue)?;
        Ok(v.iter().zip(&self.incident_field).map(|(a, b)| a * b).collect())
    }

    /// Noise variance after combining, `Q_UE sigma^2` for unit-modulus words.
    pub fn combined_noise(&self) -> f64 {
        self.params.ue_antennas() as f64 * self.noise_variance
    }

    /// `|h|^2 P / (Q_UE sigma^2)`.
    pub fn snr(&self, gain_sq: f64, tx_power: f64) -> f64 {
        gain_sq * tx_power / self.combined_noise()
    }

    /// Noisy pilots `h sqrt(P) + n` for `count` symbols of unit energy.
    pub fn observe<R: Rng + ?Sized>(&self, h: Complex64, tx_power: f64, count: usize, rng: &mut R) -> Vec<Complex64> {
        let s = tx_power.sqrt();
        let var = self.combined_noise();
        (0..count).map(|_| h * s + channel::complex_gaussian(rng, var)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::Codeword;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario(q: usize) -> Scenario {
        let mut p = ScenarioParams::reference();
        p.irs_cells = q;
        Scenario::new(&p, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
    }

    #[test]
    fn separable_gain_matches_dense_sum() {
        let s = scenario(8);
        let cb = Codebook::quadratic(8, 6, s.wavelength / 2.0, s.wavelength).unwrap();
        let tab = AxisTable::new(&cb);
        let b = s.cascade(Position::new(3.0, 38.0, 0.0), 1).unwrap();
        let all = tab.all_gains(&b);
        for m in cb.codewords() {
            let w = cb.full_codeword_vector(m);
            let dense: Complex64 = b.iter().zip(&w).map(|(b, w)| b * w).sum();
            assert!((dense - all[m.m1 * 6 + m.m2]).norm() <= 1e-9 * dense.norm().max(1e-300));
            assert!((dense - tab.gain(&b, m.m1, m.m2)).norm() <= 1e-9 * dense.norm().max(1e-300));
        }
    }

    #[test]
    fn cascade_matches_end_to_end_gain() {
        let s = scenario(6);
        let p = Position::new(-2.0, 45.0, 0.0);
        let hr = s.user_link(p).unwrap();
        let mut f_bs = s.bs.steering_towards(&s.irs.origin).unwrap();
        let n = (f_bs.len() as f64).sqrt();
        f_bs.iter_mut().for_each(|f| *f /= n);
        let cb = Codebook::quadratic(6, 4, s.wavelength / 2.0, s.wavelength).unwrap();
        let w = cb.full_codeword_vector(Codeword::new(1, 2));
        let h = channel::end_to_end_gain(&s.ht, &hr, &w, &f_bs, &s.combiners[2]).unwrap();
        let b = s.cascade(p, 2).unwrap();
        let h2: Complex64 = b.iter().zip(&w).map(|(b, w)| b * w).sum();
        assert!((h - h2).norm() < 1e-12 * h.norm());
    }

    #[test]
    fn combiner_ties_pick_lowest() {
        assert_eq!(select_combiner(&[1.0, 1.0, 1.0, 1.0]), 0);
        assert_eq!(select_combiner(&[1.0, 3.0, 3.0, 0.0]), 1);
    }

    #[test]
    fn broadside_user_prefers_flat_combiner() {
        let s = scenario(4);
        // user on the IRS normal at the IRS height sees the IRS along -x
        let p = Position::new(0.0, 40.0, 5.0);
        let hr = s.user_link(p).unwrap();
        let a = s.ue_frame(p).unwrap().steering_towards(&s.irs.origin).unwrap();
        let powers: Vec<f64> =
            s.combiners.iter().map(|f| f.iter().zip(&a).map(|(f, a)| f.conj() * a).sum::<Complex64>().norm_sqr()).collect();
        assert_eq!(select_combiner(&powers), 0);
        assert!(hr.rice_factor().unwrap() - 10.0 < 1e-9);
    }
}
