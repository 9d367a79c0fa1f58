//! Grid-based direction estimation from per-codeword pilot observations.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::codebook::{coverage_width, Codebook, Codeword};
use crate::error::{Error, Result};
use crate::geometry::{self, ArrayGeometry, Direction};

/// Denominator floor of the MUSIC pseudospectrum.
pub const MUSIC_FLOOR: f64 = 1e-15;

/// Received pilot vectors, one per measured IRS configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub codewords: Vec<Codeword>,
    pub received: Vec<Vec<Complex64>>,
    pub pilot: Vec<Complex64>,
}

impl MeasurementSet {
    pub fn new(codewords: Vec<Codeword>, received: Vec<Vec<Complex64>>, pilot: Vec<Complex64>) -> Result<Self> {
        if pilot.is_empty() {
            return Err(Error::Validation("pilot sequence is empty".into()));
        }
        if codewords.len() != received.len() || codewords.is_empty() {
            return Err(Error::Dimension(format!("{} codewords but {} observations", codewords.len(), received.len())));
        }
        if received.iter().any(|r| r.len() != pilot.len()) {
            return Err(Error::Dimension("observation length differs from pilot length".into()));
        }
        Ok(Self { codewords, received, pilot })
    }

    pub fn len(&self) -> usize {
        self.received.len()
    }

    pub fn is_empty(&self) -> bool {
        self.received.is_empty()
    }

    pub fn pilot_energy(&self) -> f64 {
        self.pilot.iter().map(|s| s.norm_sqr()).sum()
    }
}

/// Reflection gains of the measured configurations as a function of direction.
pub trait GainModel: Sync {
    /// Number of configurations.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the gains for direction `d` into `out`, in measurement order.
    fn gains(&self, d: Direction, out: &mut [Complex64]);
}

/// Gains of a subset of codewords of a codebook.
pub struct CodebookGains<'a> {
    pub codebook: &'a Codebook,
    pub codewords: &'a [Codeword],
}

impl GainModel for CodebookGains<'_> {
    fn len(&self) -> usize {
        self.codewords.len()
    }

    fn gains(&self, d: Direction, out: &mut [Complex64]) {
        let (a1, a2) = geometry::direction_factors(d);
        for (o, m) in out.iter_mut().zip(self.codewords) {
            *o = self.codebook.gain_at_factors(*m, a1, a2);
        }
    }
}

/// Gains of arbitrary (non-separable) phase configurations.
pub struct ConfigGains {
    geometry: ArrayGeometry,
    /// Each configuration multiplied by the incident steering vector.
    weights: Vec<Vec<Complex64>>,
}

impl ConfigGains {
    pub fn new(geometry: ArrayGeometry, configs: &[Vec<Complex64>], incident: (f64, f64)) -> Result<Self> {
        let at = geometry::steering_from_factors(&geometry, incident.0, incident.1);
        let weights = configs
            .iter()
            .map(|w| {
                if w.len() != at.len() {
                    return Err(Error::Dimension(format!("configuration has {} cells, array has {}", w.len(), at.len())));
                }
                Ok(w.iter().zip(&at).map(|(w, a)| w * a).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self { geometry, weights })
    }
}

impl GainModel for ConfigGains {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn gains(&self, d: Direction, out: &mut [Complex64]) {
        let a = geometry::steering_for_direction(&self.geometry, d);
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o = a.iter().zip(w).map(|(a, w)| a.conj() * w).sum();
        }
    }
}

/// Codewords within Chebyshev distance `radius` of `center`, clipped to the
/// codebook, in lexicographic order.
pub fn adjacent_codeword_set(center: Codeword, radius: usize, m_count: usize) -> Vec<Codeword> {
    let lo1 = center.m1.saturating_sub(radius);
    let lo2 = center.m2.saturating_sub(radius);
    let hi1 = (center.m1 + radius).min(m_count.saturating_sub(1));
    let hi2 = (center.m2 + radius).min(m_count.saturating_sub(1));
    let mut out = Vec::new();
    for m1 in lo1..=hi1 {
        for m2 in lo2..=hi2 {
            out.push(Codeword::new(m1, m2));
        }
    }
    out
}

/// Square grid of `H x H` equally spaced hypotheses; index `i * H + j` holds
/// the `i`-th theta and `j`-th phi value.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisGrid {
    pub center: Direction,
    pub half_width: f64,
    pub h: usize,
    pub points: Vec<Direction>,
}

impl HypothesisGrid {
    pub fn centered(center: Direction, width: f64, h: usize) -> Result<Self> {
        if h < 2 {
            return Err(Error::Validation(format!("hypothesis grid needs H >= 2, got {h}")));
        }
        if !(width > 0.0) {
            return Err(Error::Validation("grid width must be positive".into()));
        }
        let half = width / 2.0;
        let coord = |c: f64, i: usize| c - half + width * i as f64 / (h - 1) as f64;
        let mut points = Vec::with_capacity(h * h);
        for i in 0..h {
            for j in 0..h {
                points.push(Direction::new(coord(center.theta, i), coord(center.phi, j)));
            }
        }
        Ok(Self { center, half_width: half, h, points })
    }

    /// Whether `d` lies in the closed coverage square.
    pub fn covers(&self, d: Direction) -> bool {
        (d.theta - self.center.theta).abs() <= self.half_width && (d.phi - self.center.phi).abs() <= self.half_width
    }

    /// Mean squared distance to the nearest hypothesis, for a given truth.
    pub fn nearest(&self, d: Direction) -> Direction {
        let mut best = (f64::INFINITY, self.points[0]);
        for p in &self.points {
            let e = p.dist_sq(&d);
            if e < best.0 {
                best = (e, *p);
            }
        }
        best.1
    }
}

/// Grid of `H x H` hypotheses around the main lobe of `m_ide`, spanning three
/// codeword spacings per axis.
pub fn build_hypothesis_grid(m_ide: Codeword, cb: &Codebook, h: usize) -> Result<HypothesisGrid> {
    if !cb.contains(m_ide) {
        return Err(Error::IndexOutOfRange(format!("codeword {m_ide:?} outside codebook")));
    }
    HypothesisGrid::centered(cb.main_lobe(m_ide), coverage_width(cb.m_count), h)
}

/// Closed-form maximizer of the likelihood over the channel scalar,
/// `sum_m conj(g_m) s^H r_m / (||s||^2 sum_m |g_m|^2)`.
///
/// With constant-power pilots `||s||^2 = N P_TX`.
pub fn xi_tilde(ms: &MeasurementSet, gains: &[Complex64]) -> Result<Complex64> {
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for (g, r) in gains.iter().zip(&ms.received) {
        let shr: Complex64 = ms.pilot.iter().zip(r).map(|(s, r)| s.conj() * r).sum();
        num += g.conj() * shr;
        den += g.norm_sqr();
    }
    if den == 0.0 {
        return Err(Error::Singular("all reflection gains are zero".into()));
    }
    Ok(num / (den * ms.pilot_energy()))
}

/// Log-likelihood up to constants, `-sum_m ||r_m - g_m xi s||^2`.
pub fn log_likelihood(ms: &MeasurementSet, gains: &[Complex64], xi: Complex64) -> f64 {
    let mut acc = 0.0;
    for (g, r) in gains.iter().zip(&ms.received) {
        let c = g * xi;
        for (s, r) in ms.pilot.iter().zip(r) {
            acc += (r - c * s).norm_sqr();
        }
    }
    -acc
}

/// Grid estimate plus the evaluated objective surface.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEstimate {
    pub direction: Direction,
    pub index: usize,
    pub surface: Vec<f64>,
}

/// First index of the maximum; later equal values never replace it.
fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn check_model(ms: &MeasurementSet, model: &dyn GainModel) -> Result<()> {
    if model.len() != ms.len() {
        return Err(Error::Dimension(format!("gain model has {} configurations, measurement set {}", model.len(), ms.len())));
    }
    Ok(())
}

/// Peak-likelihood direction over the hypothesis grid.
pub fn peak_ml_estimate(ms: &MeasurementSet, grid: &HypothesisGrid, model: &dyn GainModel) -> Result<GridEstimate> {
    check_model(ms, model)?;
    let mut g = vec![Complex64::new(0.0, 0.0); ms.len()];
    let mut surface = Vec::with_capacity(grid.points.len());
    for p in &grid.points {
        model.gains(*p, &mut g);
        let xi = xi_tilde(ms, &g)?;
        surface.push(log_likelihood(ms, &g, xi));
    }
    let index = first_argmax(&surface);
    Ok(GridEstimate { direction: grid.points[index], index, surface })
}

/// Sample covariance of the per-symbol snapshot vectors `[r_m[n]]_m`.
pub fn music_covariance(ms: &MeasurementSet) -> Result<DMatrix<Complex64>> {
    let s0 = ms.pilot[0];
    let tol = 1e-12 * s0.norm().max(f64::MIN_POSITIVE);
    if ms.pilot.iter().any(|s| (s - s0).norm() > tol) {
        return Err(Error::Validation("MUSIC requires identical pilot symbols".into()));
    }
    let k = ms.len();
    let n = ms.pilot.len();
    let mut cov = DMatrix::zeros(k, k);
    for t in 0..n {
        for i in 0..k {
            for j in 0..k {
                cov[(i, j)] += ms.received[i][t] * ms.received[j][t].conj();
            }
        }
    }
    Ok(cov / Complex64::new(n as f64, 0.0))
}

/// MUSIC grid estimate; `flat_spectrum` flags a degenerate signal eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicEstimate {
    pub estimate: GridEstimate,
    pub flat_spectrum: bool,
}

/// Noise-subspace projector `U U^H` over all but the dominant eigenvector;
/// also returns the ratio of the two largest eigenvalues.
pub fn noise_projector(cov: &DMatrix<Complex64>) -> (DMatrix<Complex64>, f64) {
    let k = cov.nrows();
    let herm = (cov + cov.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut proj = DMatrix::zeros(k, k);
    for &c in &order[1..] {
        let u = eig.eigenvectors.column(c);
        proj += u * u.adjoint();
    }
    let ratio = if k > 1 { eig.eigenvalues[order[0]] / eig.eigenvalues[order[1]].max(f64::MIN_POSITIVE) } else { f64::INFINITY };
    (proj, ratio)
}

/// MUSIC estimate with the unit-norm steering vector along
/// `a(psi) = [g_m(psi) xi~(psi) s_1]_m`.
pub fn music_estimate(cov: &DMatrix<Complex64>, ms: &MeasurementSet, grid: &HypothesisGrid, model: &dyn GainModel) -> Result<MusicEstimate> {
    check_model(ms, model)?;
    if cov.nrows() != ms.len() || cov.ncols() != ms.len() {
        return Err(Error::Dimension("covariance size does not match measurement set".into()));
    }
    let (proj, ratio) = noise_projector(cov);
    let flat = ratio < 1.0 + 1e-9;
    if flat {
        log::warn!("MUSIC: signal eigenvalue not separated from noise subspace (ratio {ratio})");
    }
    let k = ms.len();
    let s1 = ms.pilot[0];
    let mut g = vec![Complex64::new(0.0, 0.0); k];
    let mut a = vec![Complex64::new(0.0, 0.0); k];
    let mut surface = Vec::with_capacity(grid.points.len());
    for p in &grid.points {
        model.gains(*p, &mut g);
        let xi = xi_tilde(ms, &g)?;
        for (ai, gi) in a.iter_mut().zip(&g) {
            *ai = gi * xi * s1;
        }
        // the hypothesis-dependent scale |xi~| |g| would otherwise reward
        // hypotheses orthogonal to the data
        let norm = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            surface.push(0.0);
            continue;
        }
        a.iter_mut().for_each(|x| *x /= norm);
        let mut den = Complex64::new(0.0, 0.0);
        for i in 0..k {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..k {
                row += proj[(i, j)] * a[j];
            }
            den += a[i].conj() * row;
        }
        surface.push(1.0 / den.re.max(MUSIC_FLOOR));
    }
    let index = first_argmax(&surface);
    Ok(MusicEstimate { estimate: GridEstimate { direction: grid.points[index], index, surface }, flat_spectrum: flat })
}

/// `theta,phi,loglik` rows for a likelihood surface.
pub fn surface_csv(grid: &HypothesisGrid, surface: &[f64]) -> String {
    let mut s = String::from("theta,phi,loglik\n");
    for (p, v) in grid.points.iter().zip(surface) {
        let _ = writeln!(s, "{:?},{:?},{:?}", p.theta, p.phi, v);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::Codebook;

    #[test]
    fn adjacency_examples() {
        let c = Codeword::new(5, 5);
        assert_eq!(adjacent_codeword_set(c, 0, 10), vec![c]);
        assert_eq!(adjacent_codeword_set(c, 1, 10).len(), 9);
        assert_eq!(adjacent_codeword_set(Codeword::new(0, 0), 1, 10).len(), 4);
        assert_eq!(adjacent_codeword_set(Codeword::new(9, 0), 1, 10).len(), 4);
    }

    #[test]
    fn grid_layout() {
        let g = HypothesisGrid::centered(Direction::new(0.1, -0.2), 0.3, 2).unwrap();
        assert_eq!(g.points.len(), 4);
        assert!((g.points[0].theta - (-0.05)).abs() < 1e-15);
        assert!((g.points[3].phi - (-0.05)).abs() < 1e-15);
        let g = HypothesisGrid::centered(Direction::BROADSIDE, 0.3, 10).unwrap();
        assert!((g.points[10].theta - g.points[0].theta - 0.3 / 9.0).abs() < 1e-15);
        assert!(!g.points.contains(&Direction::BROADSIDE));
        let g = HypothesisGrid::centered(Direction::BROADSIDE, 0.3, 11).unwrap();
        assert!(g.points.contains(&Direction::BROADSIDE));
        assert!(HypothesisGrid::centered(Direction::BROADSIDE, 0.3, 1).is_err());
    }

    fn noiseless(cb: &Codebook, set: &[Codeword], truth: Direction, xi: Complex64, pilot: &[Complex64]) -> MeasurementSet {
        let received = set
            .iter()
            .map(|m| {
                let g = cb.reflection_gain(*m, truth);
                pilot.iter().map(|s| g * xi * s).collect()
            })
            .collect();
        MeasurementSet::new(set.to_vec(), received, pilot.to_vec()).unwrap()
    }

    #[test]
    fn noiseless_xi_is_exact_and_linear() {
        let cb = Codebook::quadratic(8, 7, 0.5, 1.0).unwrap();
        let set = adjacent_codeword_set(Codeword::new(3, 3), 1, 7);
        let truth = Direction::new(0.05, -0.02);
        let xi = Complex64::new(0.3, -1.2);
        let pilot = vec![Complex64::new(2.0, 0.0); 5];
        let ms = noiseless(&cb, &set, truth, xi, &pilot);
        let mut g = vec![Complex64::default(); set.len()];
        CodebookGains { codebook: &cb, codewords: &set }.gains(truth, &mut g);
        let est = xi_tilde(&ms, &g).unwrap();
        assert!((est - xi).norm() < 1e-12);
        let c = Complex64::new(-0.5, 2.0);
        let scaled = MeasurementSet::new(ms.codewords.clone(), ms.received.iter().map(|r| r.iter().map(|x| x * c).collect()).collect(), ms.pilot.clone()).unwrap();
        assert!((xi_tilde(&scaled, &g).unwrap() - xi * c).norm() < 1e-12);
        assert!(xi_tilde(&ms, &vec![Complex64::default(); set.len()]).is_err());
    }

    #[test]
    fn identical_pilots_required_for_music() {
        let ms = MeasurementSet::new(
            vec![Codeword::new(0, 0)],
            vec![vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]],
            vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        )
        .unwrap();
        assert!(music_covariance(&ms).is_err());
    }
}
