//! Direction-estimation error study on a single coverage region.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::complex_gaussian;
use crate::codebook::{coverage_width, quadratic_profile, BeamShape, Codebook, CodebookKind, Codeword};
use crate::error::{Error, Result};
use crate::estimation::{
    adjacent_codeword_set, build_hypothesis_grid, music_covariance, music_estimate, peak_ml_estimate, CodebookGains, ConfigGains,
    GainModel, HypothesisGrid, MeasurementSet,
};
use crate::from_db;
use crate::geometry::{ArrayGeometry, Direction};

/// Estimator and configuration family of one study curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyScheme {
    MlQuadratic,
    MusicQuadratic,
    MlOptimized,
    MusicOptimized,
    MlRandom,
    MusicRandom,
    /// Error of the grid point closest to the truth.
    LowerBound,
    /// Error of a uniformly drawn grid point.
    RandomGuess,
}

impl StudyScheme {
    pub const ALL: [StudyScheme; 8] = [
        StudyScheme::MlQuadratic,
        StudyScheme::MusicQuadratic,
        StudyScheme::MlOptimized,
        StudyScheme::MusicOptimized,
        StudyScheme::MlRandom,
        StudyScheme::MusicRandom,
        StudyScheme::LowerBound,
        StudyScheme::RandomGuess,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StudyScheme::MlQuadratic => "ml_quadratic",
            StudyScheme::MusicQuadratic => "music_quadratic",
            StudyScheme::MlOptimized => "ml_optimized",
            StudyScheme::MusicOptimized => "music_optimized",
            StudyScheme::MlRandom => "ml_random",
            StudyScheme::MusicRandom => "music_random",
            StudyScheme::LowerBound => "lower_bound",
            StudyScheme::RandomGuess => "random_guess",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub q: usize,
    pub m_count: usize,
    /// Hypotheses per axis.
    pub grid_points: usize,
    pub trials: usize,
    pub msnr_db: Vec<f64>,
    /// Pilots per configuration.
    pub pilots: usize,
    /// Random phase configurations per trial.
    pub random_configs: usize,
    pub seed: u64,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 || self.m_count < 3 || self.grid_points < 2 || self.trials == 0 || self.pilots == 0 || self.random_configs == 0 {
            return Err(Error::Validation("study sizes must be positive, M >= 3 and H >= 2".into()));
        }
        if self.msnr_db.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("MSNR values must be finite".into()));
        }
        Ok(())
    }
}

/// Squared errors of every trial for one curve and MSNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPoint {
    pub scheme: StudyScheme,
    pub msnr_db: f64,
    pub errors: Vec<f64>,
}

impl StudyPoint {
    pub fn mse(&self) -> f64 {
        self.errors.iter().sum::<f64>() / self.errors.len() as f64
    }
}

/// One-sided paired z statistic for `mean(a - b) > 0`.
pub fn paired_z(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let m = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return if m > 0.0 { f64::INFINITY } else { 0.0 };
    }
    m / (var / n).sqrt()
}

/// One-sided 95% critical value of the standard normal.
pub const Z_95: f64 = 1.644_853_626_951_472_2;

struct Arm<'a> {
    grid: HypothesisGrid,
    model: Box<dyn GainModel + 'a>,
    g_max: f64,
}

fn codebook_arm<'a>(cb: &'a Codebook, grid: &HypothesisGrid, set: &'a [Codeword]) -> Arm<'a> {
    Arm { grid: grid.clone(), model: Box::new(CodebookGains { codebook: cb, codewords: set }), g_max: cb.g_max() }
}

fn estimate(arm: &Arm, truth: Direction, xi: Complex64, noise: &[Vec<Complex64>], pilots: usize) -> Result<(f64, f64)> {
    let mut g = vec![Complex64::new(0.0, 0.0); arm.model.len()];
    arm.model.gains(truth, &mut g);
    let pilot = vec![Complex64::new(1.0, 0.0); pilots];
    let received = g.iter().zip(noise).map(|(g, w)| w.iter().map(|w| g * xi + w).collect()).collect();
    let codewords = (0..g.len()).map(|i| Codeword::new(0, i)).collect();
    let ms = MeasurementSet::new(codewords, received, pilot)?;
    let ml = peak_ml_estimate(&ms, &arm.grid, arm.model.as_ref())?;
    let cov = music_covariance(&ms)?;
    let mu = music_estimate(&cov, &ms, &arm.grid, arm.model.as_ref())?;
    Ok((ml.direction.dist_sq(&truth), mu.estimate.direction.dist_sq(&truth)))
}

/// Monte-Carlo study of the squared estimation error for the quadratic and
/// `optimized` codebooks and for random phase configurations.
///
/// All arms share the hypothesis grid around the quadratic main lobe of the
/// central codeword, which is the region the optimised shape is designed for.
/// Each trial draws one offset inside the coverage square, one channel phase,
/// one set of random configurations and one noise realisation; all are
/// reused across MSNR values and codebooks. Noise power is normalised to
/// one, so `|xi| = sqrt(MSNR) / g_max`.
pub fn estimation_study(cfg: &StudyConfig, optimized: &BeamShape) -> Result<Vec<StudyPoint>> {
    cfg.validate()?;
    if optimized.len() != cfg.q {
        return Err(Error::Dimension(format!("optimized shape has {} cells, expected {}", optimized.len(), cfg.q)));
    }
    let (d, lambda) = (0.5, 1.0);
    let quad = Codebook::new(
        CodebookKind::Quadratic,
        quadratic_profile(cfg.q, cfg.m_count, d, lambda, 0)?,
        cfg.m_count,
        d,
        lambda,
        (0.0, 0.0),
    )?;
    let opt = Codebook::new(CodebookKind::Optimized, optimized.clone(), cfg.m_count, d, lambda, (0.0, 0.0))?;
    let center = Codeword::new(cfg.m_count / 2, cfg.m_count / 2);
    let set = adjacent_codeword_set(center, 1, cfg.m_count);
    // one region for every arm: the one the shape was designed for
    let grid = build_hypothesis_grid(center, &quad, cfg.grid_points)?;
    let width = coverage_width(cfg.m_count);
    let geometry = ArrayGeometry::new(cfg.q, cfg.q, d, lambda)?;
    let k = set.len();

    let per_trial: Vec<Vec<[f64; 8]>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| -> Result<Vec<[f64; 8]>> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(trial as u64);
            let u = [(rng.random::<f64>() - 0.5) * width, (rng.random::<f64>() - 0.5) * width];
            let phase = Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
            let noise: Vec<Vec<Complex64>> = (0..k).map(|_| (0..cfg.pilots).map(|_| complex_gaussian(&mut rng, 1.0)).collect()).collect();
            let configs: Vec<Vec<Complex64>> = (0..cfg.random_configs)
                .map(|_| (0..cfg.q * cfg.q).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)).collect())
                .collect();
            let guess = rng.random_range(0..cfg.grid_points * cfg.grid_points);
            let noise_r: Vec<Vec<Complex64>> =
                (0..cfg.random_configs).map(|_| (0..cfg.pilots).map(|_| complex_gaussian(&mut rng, 1.0)).collect()).collect();

            let arm_q = codebook_arm(&quad, &grid, &set);
            let arm_o = codebook_arm(&opt, &grid, &set);
            let arm_r = Arm {
                grid: grid.clone(),
                model: Box::new(ConfigGains::new(geometry, &configs, (0.0, 0.0))?),
                g_max: quad.g_max(),
            };
            let truth = Direction::new(grid.center.theta + u[0], grid.center.phi + u[1]);
            let mut rows = Vec::with_capacity(cfg.msnr_db.len());
            for &db in &cfg.msnr_db {
                let amp = from_db(db).sqrt();
                let (mlq, muq) = estimate(&arm_q, truth, phase * (amp / arm_q.g_max), &noise, cfg.pilots)?;
                let (mlo, muo) = estimate(&arm_o, truth, phase * (amp / arm_o.g_max), &noise, cfg.pilots)?;
                let (mlr, mur) = estimate(&arm_r, truth, phase * (amp / arm_r.g_max), &noise_r, cfg.pilots)?;
                let lb = grid.nearest(truth).dist_sq(&truth);
                let rg = grid.points[guess].dist_sq(&truth);
                rows.push([mlq, muq, mlo, muo, mlr, mur, lb, rg]);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (si, scheme) in StudyScheme::ALL.iter().enumerate() {
        for (pi, &db) in cfg.msnr_db.iter().enumerate() {
            out.push(StudyPoint { scheme: *scheme, msnr_db: db, errors: per_trial.iter().map(|t| t[pi][si]).collect() });
        }
    }
    Ok(out)
}
