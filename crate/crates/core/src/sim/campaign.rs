//! Monte-Carlo campaign over trajectories, noise seeds, codebook sizes and
//! transmit powers.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamopt::{optimize_beam_shape, DesignConfig, DesignReport};
use crate::codebook::{coverage_width, quadratic_profile, BeamShape};
use crate::error::{Error, Result};
use crate::sim::run::{mean, run_baseline, run_proposed, BaselineSeries, CodebookSet, PredictorKind, TrackingConfig};
use crate::sim::scenario::{Scenario, ScenarioParams};
use crate::sim::schedule::{overhead_ratio, to_f64, OverheadParams, ScheduleParams, Scheme, TimeBlockSchedule};
use crate::sim::trajectory::{generate_trajectory, Trajectory, TrajectoryKind};
use crate::{dbm_to_watts, to_db};

/// Mixed into the campaign seed for noise streams so they never coincide
/// with trajectory streams.
const NOISE_SEED_SALT: u64 = 0x6a09_e667_f3bc_c908;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub scenario: ScenarioParams,
    pub schedule: ScheduleParams,
    pub predictor: PredictorKind,
    pub grid_points: usize,
    pub loss_blocks: usize,
    pub metrics_stride: usize,
    pub trajectory: TrajectoryKind,
    pub m_values: Vec<usize>,
    pub ptx_dbm: Vec<f64>,
    pub trajectories: usize,
    pub noise_seeds: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    /// Estimation shape design; `q`, `m_count`, `coverage` and the spacing
    /// are filled in per codebook size.
    pub design: DesignConfig,
    /// Children per refinement level of the hierarchical search.
    pub hs_children: i64,
    pub hs_levels: i64,
}

impl CampaignConfig {
    /// Reference deployment with full-scale Monte-Carlo counts.
    pub fn reference() -> Self {
        Self {
            scenario: ScenarioParams::reference(),
            schedule: ScheduleParams::reference(),
            predictor: PredictorKind::Polynomial { history: 3, degree: 1 },
            grid_points: 10,
            loss_blocks: 2,
            metrics_stride: 1,
            trajectory: TrajectoryKind::Linear,
            m_values: vec![30, 40],
            ptx_dbm: vec![0.0, 10.0, 20.0, 30.0, 40.0],
            trajectories: 12,
            noise_seeds: 10,
            seed: 1,
            schemes: Scheme::ALL.to_vec(),
            design: DesignConfig::new(40, 30, 25.0),
            hs_children: 4,
            hs_levels: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.tracking()?.validate()?;
        if self.m_values.is_empty() || self.m_values.iter().any(|&m| m < 3) {
            return Err(Error::Validation("codebook sizes must be at least 3".into()));
        }
        if self.ptx_dbm.is_empty() || self.ptx_dbm.iter().any(|p| !p.is_finite()) {
            return Err(Error::Validation("transmit power sweep must be non-empty and finite".into()));
        }
        if self.trajectories == 0 || self.noise_seeds == 0 {
            return Err(Error::Validation("trajectory and seed counts must be positive".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Validation("no scheme selected".into()));
        }
        if self.hs_children != 4 || self.hs_levels != 2 {
            return Err(Error::Validation("hierarchical search supports N_HS = 4 and L_C = 2 only".into()));
        }
        Ok(())
    }

    pub fn tracking(&self) -> Result<TrackingConfig> {
        Ok(TrackingConfig {
            schedule: TimeBlockSchedule::derive(&self.schedule)?,
            predictor: self.predictor,
            grid_points: self.grid_points,
            loss_blocks: self.loss_blocks,
            metrics_stride: self.metrics_stride,
        })
    }

    /// Shape design for `M` codewords per axis on the scenario's IRS.
    pub fn design_for(&self, m_count: usize) -> DesignConfig {
        DesignConfig {
            q: self.scenario.irs_cells,
            m_count,
            coverage: coverage_width(m_count),
            spacing_over_wavelength: self.scenario.irs_spacing,
            ..self.design.clone()
        }
    }

    pub fn overhead_params(&self, m_count: usize) -> OverheadParams {
        let mw = m_count.div_ceil(2) as i64;
        OverheadParams {
            scatterers_t: self.scenario.scatterers_t as i64,
            scatterers_r: self.scenario.scatterers_r as i64,
            irs_cells: (self.scenario.irs_cells * self.scenario.irs_cells) as i64,
            hs_first_level: mw * mw,
            hs_children: self.hs_children,
            hs_levels: self.hs_levels,
        }
    }

    pub fn overhead(&self, scheme: Scheme, m_count: usize) -> Result<f64> {
        let s = TimeBlockSchedule::derive(&self.schedule)?;
        Ok(to_f64(overhead_ratio(scheme, &s, &self.overhead_params(m_count))?))
    }
}

/// Deterministic trajectory and scatterer draw of trajectory `index`.
pub fn trial_setup(cfg: &CampaignConfig, index: usize) -> Result<(Scenario, Trajectory)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let trajectory = generate_trajectory(cfg.trajectory, &cfg.scenario.motion, &mut rng)?;
    let scenario = Scenario::new(&cfg.scenario, &mut rng)?;
    Ok((scenario, trajectory))
}

/// Noise generator of trajectory `index` and noise seed `seed_index`.
pub fn noise_rng(cfg: &CampaignConfig, index: usize, seed_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ NOISE_SEED_SALT);
    rng.set_stream((index * cfg.noise_seeds + seed_index) as u64);
    rng
}

/// Estimation beam shape for `M` codewords, optimised from the quadratic
/// profile at the configured design SNR.
pub fn design_ide_shape(cfg: &CampaignConfig, m_count: usize) -> Result<(BeamShape, DesignReport)> {
    let q = cfg.scenario.irs_cells;
    let init = quadratic_profile(q, m_count, cfg.scenario.irs_element_spacing(), cfg.scenario.wavelength(), 0)?;
    optimize_beam_shape(&init, &cfg.design_for(m_count))
}

/// One aggregated CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub scheme: Scheme,
    pub ptx_dbm: f64,
    pub mean_snr_db: f64,
    pub mean_rate: f64,
    pub loss_prob: f64,
    pub trials: usize,
    pub m_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub rows: Vec<CampaignRow>,
    pub designs: Vec<DesignReport>,
    /// Estimation shape per codebook size, in `m_values` order.
    pub shapes: Vec<BeamShape>,
}

impl CampaignResult {
    pub fn row(&self, scheme: Scheme, m_count: usize, ptx_dbm: f64) -> Option<&CampaignRow> {
        self.rows.iter().find(|r| r.scheme == scheme && r.m_count == m_count && r.ptx_dbm == ptx_dbm)
    }
}

/// Stable CSV schema; new columns are only ever appended.
pub const CAMPAIGN_CSV_HEADER: &str = "scheme,ptx_dbm,mean_snr_db,mean_rate,loss_prob,trials,m";

pub fn rows_to_csv(rows: &[CampaignRow]) -> String {
    let mut s = String::from(CAMPAIGN_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{:.6},{},{}",
            r.scheme.as_str(),
            r.ptx_dbm,
            r.mean_snr_db,
            r.mean_rate,
            r.loss_prob,
            r.trials,
            r.m_count
        );
    }
    s
}

struct Prepared {
    scenario: Scenario,
    trajectory: Trajectory,
    /// Per codebook size: codebooks and baseline series per selected baseline.
    per_m: Vec<(CodebookSet, Vec<BaselineSeries>)>,
}

#[derive(Debug, Clone, Copy)]
struct RunSummary {
    mean_snr: f64,
    mean_rate: f64,
    lost: bool,
}

/// Runs the campaign. Work is split over trajectories and runs with rayon;
/// results are gathered in index order so output does not depend on the
/// thread count.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignResult> {
    cfg.validate()?;
    let tracking = cfg.tracking()?;
    let designed: Vec<(BeamShape, DesignReport)> =
        cfg.m_values.par_iter().map(|&m| design_ide_shape(cfg, m)).collect::<Result<_>>()?;
    let baselines: Vec<Scheme> = cfg.schemes.iter().copied().filter(|s| *s != Scheme::Proposed).collect();
    let prepared: Vec<Prepared> = (0..cfg.trajectories)
        .into_par_iter()
        .map(|j| -> Result<Prepared> {
            let (scenario, trajectory) = trial_setup(cfg, j)?;
            let per_m = cfg
                .m_values
                .iter()
                .zip(&designed)
                .map(|(&m, (shape, _))| {
                    let books = CodebookSet::new(&scenario, m, shape)?;
                    let series =
                        baselines.iter().map(|&b| run_baseline(b, &scenario, &books, &tracking, &trajectory)).collect::<Result<Vec<_>>>()?;
                    Ok((books, series))
                })
                .collect::<Result<_>>()?;
            Ok(Prepared { scenario, trajectory, per_m })
        })
        .collect::<Result<_>>()?;

    let run_proposed_scheme = cfg.schemes.contains(&Scheme::Proposed);
    let mut jobs = Vec::new();
    if run_proposed_scheme {
        for j in 0..cfg.trajectories {
            for s in 0..cfg.noise_seeds {
                for mi in 0..cfg.m_values.len() {
                    for pi in 0..cfg.ptx_dbm.len() {
                        jobs.push((j, s, mi, pi));
                    }
                }
            }
        }
    }
    let summaries: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(j, s, mi, pi)| -> Result<RunSummary> {
            let p = &prepared[j];
            let gamma = cfg.overhead(Scheme::Proposed, cfg.m_values[mi])?;
            let mut rng = noise_rng(cfg, j, s);
            let out = run_proposed(&p.scenario, &p.per_m[mi].0, &tracking, &p.trajectory, dbm_to_watts(cfg.ptx_dbm[pi]), gamma, &mut rng)?;
            Ok(RunSummary { mean_snr: out.mean_snr(), mean_rate: out.mean_rate(), lost: out.lost() })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (mi, &m) in cfg.m_values.iter().enumerate() {
        for &scheme in &cfg.schemes {
            let gamma = cfg.overhead(scheme, m)?;
            for (pi, &dbm) in cfg.ptx_dbm.iter().enumerate() {
                let watts = dbm_to_watts(dbm);
                let (snrs, rates, lost, trials): (Vec<f64>, Vec<f64>, usize, usize) = if scheme == Scheme::Proposed {
                    let sel: Vec<&RunSummary> =
                        jobs.iter().zip(&summaries).filter(|((_, _, a, b), _)| *a == mi && *b == pi).map(|(_, r)| r).collect();
                    let kept: Vec<&&RunSummary> = sel.iter().filter(|r| !r.lost).collect();
                    (
                        kept.iter().map(|r| r.mean_snr).collect(),
                        kept.iter().map(|r| r.mean_rate).collect(),
                        sel.len() - kept.len(),
                        sel.len(),
                    )
                } else {
                    let bi = baselines.iter().position(|b| *b == scheme).expect("baseline selected");
                    let mut snrs = Vec::new();
                    let mut rates = Vec::new();
                    for p in &prepared {
                        let recs = p.per_m[mi].1[bi].records(&p.scenario, watts, gamma);
                        snrs.push(mean(recs.iter().map(|r| r.snr)));
                        rates.push(mean(recs.iter().map(|r| r.rate)));
                    }
                    (snrs, rates, 0, prepared.len())
                };
                rows.push(CampaignRow {
                    scheme,
                    ptx_dbm: dbm,
                    mean_snr_db: to_db(mean(snrs.into_iter())),
                    mean_rate: mean(rates.into_iter()),
                    loss_prob: lost as f64 / trials as f64,
                    trials,
                    m_count: m,
                });
            }
        }
    }
    let (shapes, designs) = designed.into_iter().unzip();
    Ok(CampaignResult { rows, designs, shapes })
}

/// One point of a prediction-error time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub time_s: f64,
    pub pred_err: f64,
    pub scheme: String,
}

pub const SERIES_CSV_HEADER: &str = "time_s,pred_err,scheme";

pub fn series_to_csv(points: &[SeriesPoint]) -> String {
    let mut s = String::from(SERIES_CSV_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(s, "{:.6},{:e},{}", p.time_s, p.pred_err, p.scheme);
    }
    s
}

/// Per-block prediction error on trajectory `index`, averaged over the noise
/// seeds, for each predictor. Uses the first configured codebook size.
pub fn prediction_error_series(cfg: &CampaignConfig, index: usize, ptx_dbm: f64, predictors: &[PredictorKind]) -> Result<Vec<SeriesPoint>> {
    let (_, trajectory) = trial_setup(cfg, index)?;
    prediction_error_series_on(cfg, index, &trajectory, ptx_dbm, predictors)
}

/// As [`prediction_error_series`] on a given trajectory; scatterers and
/// noise still follow trajectory slot `index`.
pub fn prediction_error_series_on(
    cfg: &CampaignConfig,
    index: usize,
    trajectory: &Trajectory,
    ptx_dbm: f64,
    predictors: &[PredictorKind],
) -> Result<Vec<SeriesPoint>> {
    cfg.validate()?;
    if predictors.is_empty() {
        return Err(Error::Validation("at least one predictor is required".into()));
    }
    let m = cfg.m_values[0];
    let (shape, _) = design_ide_shape(cfg, m)?;
    let (scenario, _) = trial_setup(cfg, index)?;
    let books = CodebookSet::new(&scenario, m, &shape)?;
    let gamma = cfg.overhead(Scheme::Proposed, m)?;
    let jobs: Vec<(usize, usize)> = (0..predictors.len()).flat_map(|p| (0..cfg.noise_seeds).map(move |s| (p, s))).collect();
    let runs: Vec<Vec<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(p, s)| -> Result<Vec<(f64, f64)>> {
            let mut tracking = cfg.tracking()?;
            tracking.predictor = predictors[p];
            let mut rng = noise_rng(cfg, index, s);
            let out = run_proposed(&scenario, &books, &tracking, trajectory, dbm_to_watts(ptx_dbm), gamma, &mut rng)?;
            Ok(out.blocks.iter().map(|b| (b.start, b.mean_prediction_error)).collect())
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (p, kind) in predictors.iter().enumerate() {
        let mine: Vec<&Vec<(f64, f64)>> = jobs.iter().zip(&runs).filter(|((q, _), _)| *q == p).map(|(_, r)| r).collect();
        let label = kind.label();
        for b in 0..mine[0].len() {
            out.push(SeriesPoint {
                time_s: mine[0][b].0,
                pred_err: mine.iter().map(|r| r[b].1).sum::<f64>() / mine.len() as f64,
                scheme: label.clone(),
            });
        }
    }
    Ok(out)
}
