//! One tracking run of the proposed scheme and the noiseless baselines.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codebook::{quadratic_profile, BeamShape, Codebook, CodebookKind, Codeword};
use crate::error::{Error, Result};
use crate::estimation::{adjacent_codeword_set, build_hypothesis_grid, peak_ml_estimate, CodebookGains, MeasurementSet};
use crate::geometry::Direction;
use crate::sim::scenario::{select_combiner, AxisTable, Scenario};
use crate::sim::schedule::{to_f64, Scheme, Seconds, TimeBlockSchedule};
use crate::sim::trajectory::Trajectory;
use crate::tracking::{
    extrapolate, fit_polynomial, kalman_predict, kalman_update, nearest_codeword, EstimateHistory, KalmanState, TrajectoryModel,
};

/// Direction extrapolator driven by the estimation sub-blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PredictorKind {
    /// Least-squares polynomial over the last `history` estimates.
    Polynomial { history: usize, degree: usize },
    /// Constant-velocity Kalman filter.
    Kalman { process_var: f64, measurement_var: f64 },
}

impl PredictorKind {
    pub fn label(&self) -> String {
        match self {
            PredictorKind::Polynomial { history, degree } => format!("poly_s{history}_n{degree}"),
            PredictorKind::Kalman { .. } => "kalman".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
enum Predictor {
    Polynomial { history: EstimateHistory, degree: usize, model: Option<TrajectoryModel> },
    Kalman { process_var: f64, measurement_var: f64, state: Option<(f64, KalmanState)> },
}

impl Predictor {
    fn new(kind: PredictorKind) -> Result<Self> {
        Ok(match kind {
            PredictorKind::Polynomial { history, degree } => {
                Predictor::Polynomial { history: EstimateHistory::new(history)?, degree, model: None }
            }
            PredictorKind::Kalman { process_var, measurement_var } => Predictor::Kalman { process_var, measurement_var, state: None },
        })
    }

    fn update(&mut self, t: f64, d: Direction) -> Result<()> {
        match self {
            Predictor::Polynomial { history, degree, model } => {
                history.push(t, d)?;
                *model = Some(fit_polynomial(history, *degree)?);
            }
            Predictor::Kalman { process_var, measurement_var, state } => {
                let next = match state.take() {
                    None => KalmanState::new(d, *process_var, *measurement_var, 1.0)?,
                    Some((t_last, mut s)) => {
                        s.step = t - t_last;
                        kalman_update(&kalman_predict(&s), d)?
                    }
                };
                *state = Some((t, next));
            }
        }
        Ok(())
    }

    fn predict(&self, t: f64) -> Option<Direction> {
        match self {
            Predictor::Polynomial { model, .. } => model.as_ref().map(|m| extrapolate(m, t)),
            Predictor::Kalman { state, .. } => state.as_ref().map(|(t0, s)| s.direction_after(t - t0)),
        }
    }
}

/// Protocol parameters of a tracking run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingConfig {
    pub schedule: TimeBlockSchedule,
    pub predictor: PredictorKind,
    /// Hypotheses per axis `H`.
    pub grid_points: usize,
    /// Consecutive blocks with the user outside the hypothesis region that
    /// count as a tracking loss.
    pub loss_blocks: usize,
    /// Record metrics for every `metrics_stride`-th data slot.
    pub metrics_stride: usize,
}

impl TrackingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 2 {
            return Err(Error::Validation("hypothesis grid needs at least 2 points per axis".into()));
        }
        if self.loss_blocks == 0 || self.metrics_stride == 0 {
            return Err(Error::Validation("loss_blocks and metrics_stride must be at least 1".into()));
        }
        if self.schedule.ide_codewords != 9 {
            return Err(Error::Validation("the estimation sub-block measures the 3 x 3 neighbourhood, |M_k| must be 9".into()));
        }
        if let PredictorKind::Polynomial { history, .. } = self.predictor {
            if history == 0 {
                return Err(Error::Validation("S_max must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Data-transmission, estimation and wide search codebooks for one `M`.
#[derive(Debug, Clone)]
pub struct CodebookSet {
    pub dt: Codebook,
    pub ide: Codebook,
    /// First level of the hierarchical search, `ceil(M/2)` words per axis.
    pub wide: Codebook,
    pub dt_axes: AxisTable,
    pub wide_axes: AxisTable,
}

impl CodebookSet {
    /// Quadratic data codebook and estimation codebook with shape `ide_shape`,
    /// both for the scenario's incident direction.
    pub fn new(scenario: &Scenario, m_count: usize, ide_shape: &BeamShape) -> Result<Self> {
        let q = scenario.params.irs_cells;
        let (lambda, d) = (scenario.wavelength, scenario.params.irs_element_spacing());
        if ide_shape.len() != q {
            return Err(Error::Dimension(format!("estimation shape has {} cells, IRS has {q}", ide_shape.len())));
        }
        let inc = scenario.incident;
        let dt = Codebook::new(CodebookKind::Quadratic, quadratic_profile(q, m_count, d, lambda, 0)?, m_count, d, lambda, inc)?;
        let ide = Codebook::new(CodebookKind::Optimized, ide_shape.clone(), m_count, d, lambda, inc)?;
        let mw = m_count.div_ceil(2);
        let wide = Codebook::new(CodebookKind::Quadratic, quadratic_profile(q, mw, d, lambda, 0)?, mw, d, lambda, inc)?;
        Ok(Self { dt_axes: AxisTable::new(&dt), wide_axes: AxisTable::new(&wide), dt, ide, wide })
    }

    pub fn m_count(&self) -> usize {
        self.dt.m_count
    }

    /// Narrow codewords refined from wide word `w`: per axis the two narrow
    /// indices whose main lobes lie closest to the wide lobe. For even `M`
    /// these are `{2w, 2w+1}`.
    pub fn children(&self, w: Codeword) -> Vec<Codeword> {
        let wide = self.wide.main_lobe_factors(w);
        let axis = |target: f64, pick: fn((f64, f64)) -> f64| -> Vec<usize> {
            let mut idx: Vec<(f64, usize)> = (0..self.m_count())
                .map(|i| {
                    // lobes alias with period 2 in phase-factor space
                    let d = (pick(self.dt.main_lobe_factors(Codeword::new(i, i))) - target + 1.0).rem_euclid(2.0) - 1.0;
                    (d.abs(), i)
                })
                .collect();
            idx.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut two = vec![idx[0].1, idx[1].1];
            two.sort_unstable();
            two
        };
        let a1 = axis(wide.0, |f| f.0);
        let a2 = axis(wide.1, |f| f.1);
        let mut out = Vec::with_capacity(4);
        for &a in &a1 {
            for &b in &a2 {
                out.push(Codeword::new(a, b));
            }
        }
        out
    }
}

/// IRS reconfiguration instants, in exact schedule time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReconfigEvent {
    Uc { block: i64, time: Seconds },
    /// `index`-th codeword of the estimation sub-block.
    Ide { block: i64, index: usize, time: Seconds },
    Ce { block: i64, slot: i64, time: Seconds },
}

/// One data-slot sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub time: f64,
    pub block: usize,
    pub snr: f64,
    pub rate: f64,
    /// Squared angular prediction error in rad^2; zero for baselines.
    pub prediction_error: f64,
    pub codeword: Codeword,
    pub scheme: Scheme,
}

/// Per-block summary of the proposed scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub block: usize,
    pub start: f64,
    pub estimate: Direction,
    pub truth: Direction,
    /// Whether the truth lay inside the hypothesis region.
    pub covered: bool,
    /// Mean prediction error over the recorded data slots.
    pub mean_prediction_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub scheme: Scheme,
    pub records: Vec<MetricsRecord>,
    pub blocks: Vec<BlockRecord>,
    pub events: Vec<ReconfigEvent>,
    /// Block at which the loss criterion fired.
    pub loss_block: Option<usize>,
}

impl RunOutcome {
    pub fn lost(&self) -> bool {
        self.loss_block.is_some()
    }

    pub fn mean_snr(&self) -> f64 {
        mean(self.records.iter().map(|r| r.snr))
    }

    pub fn mean_rate(&self) -> f64 {
        mean(self.records.iter().map(|r| r.rate))
    }
}

pub(crate) fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Whole time blocks that fit into the trajectory.
pub fn block_count(trajectory: &Trajectory, schedule: &TimeBlockSchedule) -> usize {
    (trajectory.duration() / to_f64(schedule.block)).floor() as usize
}

/// Best codeword and combiner at `t` over the full data codebook, noiseless.
pub fn exhaustive_search(scenario: &Scenario, axes: &AxisTable, trajectory: &Trajectory, t: f64) -> Result<(Codeword, usize, f64)> {
    let cascades = scenario.cascades(trajectory.position(t))?;
    let m = axes.m_count();
    let mut best = (Codeword::new(0, 0), 0, f64::NEG_INFINITY);
    for (c, b) in cascades.iter().enumerate() {
        for (i, g) in axes.all_gains(b).iter().enumerate() {
            if g.norm_sqr() > best.2 {
                best = (Codeword::new(i / m, i % m), c, g.norm_sqr());
            }
        }
    }
    Ok(best)
}

/// Algorithm steps UC, IDE and per-slot data-codeword selection for every
/// whole time block of `trajectory`.
///
/// Initial access is a noiseless exhaustive search at `t = 0`. All noise is
/// drawn from `rng` in a fixed order, so runs at different powers share
/// their noise realisations.
pub fn run_proposed<R: Rng + ?Sized>(
    scenario: &Scenario,
    books: &CodebookSet,
    cfg: &TrackingConfig,
    trajectory: &Trajectory,
    tx_power: f64,
    overhead: f64,
    rng: &mut R,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let s = &cfg.schedule;
    let blocks = block_count(trajectory, s);
    let mut predictor = Predictor::new(cfg.predictor)?;
    let mut out = RunOutcome { scheme: Scheme::Proposed, records: Vec::new(), blocks: Vec::new(), events: Vec::new(), loss_block: None };
    let (init_dt, _, _) = exhaustive_search(scenario, &books.dt_axes, trajectory, 0.0)?;
    let init_ide = nearest_codeword(&books.ide, books.dt.main_lobe(init_dt));
    let mut outside = 0usize;
    let n_uc = s.n_uc as usize;
    let n_ide = s.n_ide as usize;
    let pilot = vec![num_complex::Complex64::new(tx_power.sqrt(), 0.0); n_ide];

    for k in 0..blocks {
        let kk = k as i64;
        let t_k = to_f64(s.block_start(kk));
        // UC: data codeword predicted for t_k, sweep the user combiners
        let m_dt = match predictor.predict(t_k) {
            Some(d) => nearest_codeword(&books.dt, d),
            None => init_dt,
        };
        out.events.push(ReconfigEvent::Uc { block: kk, time: s.block_start(kk) });
        let cascades = scenario.cascades(trajectory.position(t_k))?;
        let powers: Vec<f64> = cascades
            .iter()
            .map(|b| {
                let h = books.dt_axes.gain(b, m_dt.m1, m_dt.m2);
                scenario.observe(h, tx_power, n_uc, rng).iter().map(|r| r.norm_sqr()).sum()
            })
            .collect();
        let combiner = select_combiner(&powers);

        // IDE: 3 x 3 neighbourhood of the predicted estimation codeword
        let t_ide = to_f64(s.ide_start(kk));
        let center = match predictor.predict(t_ide) {
            Some(d) => nearest_codeword(&books.ide, d),
            None => init_ide,
        };
        let set = adjacent_codeword_set(center, 1, books.ide.m_count);
        let grid = build_hypothesis_grid(center, &books.ide, cfg.grid_points)?;
        let pos = trajectory.position(t_ide);
        let b = scenario.cascade(pos, combiner)?;
        let mut received = Vec::with_capacity(set.len());
        for (i, m) in set.iter().enumerate() {
            out.events.push(ReconfigEvent::Ide { block: kk, index: i, time: s.ide_start(kk) + s.symbol * (i as i64 * s.n_ide) });
            let omega = books.ide.full_codeword_vector(*m);
            let h: num_complex::Complex64 = b.iter().zip(&omega).map(|(b, w)| b * w).sum();
            received.push(scenario.observe(h, tx_power, n_ide, rng));
        }
        let ms = MeasurementSet::new(set.clone(), received, pilot.clone())?;
        let est = peak_ml_estimate(&ms, &grid, &CodebookGains { codebook: &books.ide, codewords: &set })?;
        let truth = scenario.true_direction(pos)?;
        let covered = grid.covers(truth);
        outside = if covered { 0 } else { outside + 1 };
        if outside >= cfg.loss_blocks && out.loss_block.is_none() {
            out.loss_block = Some(k);
        }
        predictor.update(t_ide, est.direction)?;

        // CE + D slots
        let mut err_sum = 0.0;
        let mut err_n = 0usize;
        for kappa in 0..s.eta {
            let ts = s.slot_start(kk, kappa);
            out.events.push(ReconfigEvent::Ce { block: kk, slot: kappa, time: ts });
            if kappa as usize % cfg.metrics_stride != 0 {
                continue;
            }
            let t = to_f64(ts);
            let pred = predictor.predict(t).expect("updated in this block");
            let m = nearest_codeword(&books.dt, pred);
            let p = trajectory.position(t);
            let truth = scenario.true_direction(p)?;
            let h = books.dt_axes.gain(&scenario.cascade(p, combiner)?, m.m1, m.m2);
            let snr = scenario.snr(h.norm_sqr(), tx_power);
            let err = pred.dist_sq(&truth);
            err_sum += err;
            err_n += 1;
            out.records.push(MetricsRecord {
                time: t,
                block: k,
                snr,
                rate: super::schedule::rate_from_snr(snr, overhead),
                prediction_error: err,
                codeword: m,
                scheme: Scheme::Proposed,
            });
        }
        out.blocks.push(BlockRecord {
            block: k,
            start: t_k,
            estimate: est.direction,
            truth,
            covered,
            mean_prediction_error: err_sum / err_n.max(1) as f64,
        });
    }
    Ok(out)
}

/// Noiseless gain magnitudes `|h|^2` of a baseline at every recorded slot.
///
/// Baselines do not depend on the transmit power except through a linear
/// SNR scale, so the series is shared across the power sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSeries {
    pub scheme: Scheme,
    pub times: Vec<f64>,
    pub blocks: Vec<usize>,
    pub gain_sq: Vec<f64>,
    pub codewords: Vec<Codeword>,
}

impl BaselineSeries {
    pub fn records(&self, scenario: &Scenario, tx_power: f64, overhead: f64) -> Vec<MetricsRecord> {
        (0..self.times.len())
            .map(|i| {
                let snr = scenario.snr(self.gain_sq[i], tx_power);
                MetricsRecord {
                    time: self.times[i],
                    block: self.blocks[i],
                    snr,
                    rate: super::schedule::rate_from_snr(snr, overhead),
                    prediction_error: 0.0,
                    codeword: self.codewords[i],
                    scheme: self.scheme,
                }
            })
            .collect()
    }
}

fn slot_times(cfg: &TrackingConfig, blocks: usize) -> Vec<(usize, f64)> {
    let s = &cfg.schedule;
    let mut out = Vec::new();
    for k in 0..blocks {
        for kappa in (0..s.eta).step_by(cfg.metrics_stride) {
            out.push((k, to_f64(s.slot_start(k as i64, kappa))));
        }
    }
    out
}

/// Two-level noiseless search at the estimation instant of each block; the
/// selected codeword and combiner are held for all data slots of the block.
fn hierarchical_pick(scenario: &Scenario, books: &CodebookSet, trajectory: &Trajectory, t: f64) -> Result<(Codeword, usize)> {
    let cascades = scenario.cascades(trajectory.position(t))?;
    let mw = books.wide.m_count;
    let mut best = (Codeword::new(0, 0), 0, f64::NEG_INFINITY);
    for (c, b) in cascades.iter().enumerate() {
        let wide = books.wide_axes.all_gains(b);
        let mut w = 0;
        for (i, g) in wide.iter().enumerate() {
            if g.norm_sqr() > wide[w].norm_sqr() {
                w = i;
            }
        }
        for m in books.children(Codeword::new(w / mw, w % mw)) {
            let p = books.dt_axes.gain(b, m.m1, m.m2).norm_sqr();
            if p > best.2 {
                best = (m, c, p);
            }
        }
    }
    Ok((best.0, best.1))
}

/// Noiseless baseline series on the same slot grid as [`run_proposed`].
pub fn run_baseline(scheme: Scheme, scenario: &Scenario, books: &CodebookSet, cfg: &TrackingConfig, trajectory: &Trajectory) -> Result<BaselineSeries> {
    cfg.validate()?;
    let blocks = block_count(trajectory, &cfg.schedule);
    let mut series = BaselineSeries { scheme, times: Vec::new(), blocks: Vec::new(), gain_sq: Vec::new(), codewords: Vec::new() };
    let mut held: Option<(usize, Codeword, usize)> = None;
    for (k, t) in slot_times(cfg, blocks) {
        let (g, m) = match scheme {
            Scheme::Proposed => return Err(Error::Validation("the proposed scheme is not a baseline".into())),
            Scheme::Perfect => {
                let (m, _, g) = exhaustive_search(scenario, &books.dt_axes, trajectory, t)?;
                (g, m)
            }
            Scheme::Focusing => {
                let cascades = scenario.cascades(trajectory.position(t))?;
                let g = cascades.iter().map(|b| b.iter().map(|x| x.norm()).sum::<f64>().powi(2)).fold(0.0, f64::max);
                (g, Codeword::new(0, 0))
            }
            Scheme::Hierarchical => {
                if held.map(|h| h.0) != Some(k) {
                    let t_search = to_f64(cfg.schedule.ide_start(k as i64));
                    let (m, c) = hierarchical_pick(scenario, books, trajectory, t_search)?;
                    held = Some((k, m, c));
                }
                let (_, m, c) = held.expect("set above");
                let b = scenario.cascade(trajectory.position(t), c)?;
                (books.dt_axes.gain(&b, m.m1, m.m2).norm_sqr(), m)
            }
        };
        series.times.push(t);
        series.blocks.push(k);
        series.gain_sq.push(g);
        series.codewords.push(m);
    }
    Ok(series)
}
