//! One function per subcommand. Each writes its files through an
//! [`OutputDir`] and returns a short summary for the terminal.

use std::f64::consts::PI;
use std::fmt::Write as _;

use irstrack::beamopt::{optimize_beam_shape, DesignReport};
use irstrack::codebook::{shape_to_text, CodebookKind};
use irstrack::sim::campaign::{
    noise_rng, prediction_error_series_on, rows_to_csv, series_to_csv, trial_setup, CampaignConfig,
};
use irstrack::sim::run::ReconfigEvent;
use irstrack::sim::schedule::to_f64;
use irstrack::sim::study::{paired_z, StudyPoint, StudyScheme};
use irstrack::sim::{
    estimation_study, nonlinear_trajectory_from, run_baseline, run_campaign, run_proposed, CodebookSet, MetricsRecord,
    PredictorKind, Scheme, TrajectoryKind,
};
use irstrack::{dbm_to_watts, to_db, BeamShape, Codebook, Codeword, Direction};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::OutputDir;
use crate::CliError;

/// Designed shape for `q x q` cells and `m_count` codewords per axis.
pub fn design_shape(cfg: &RunConfig, q: usize, m_count: usize) -> Result<(BeamShape, DesignReport), CliError> {
    let init = cfg.initial_shape(q, m_count)?;
    Ok(optimize_beam_shape(&init, &cfg.design_config(q, m_count))?)
}

/// Writes one shape file and report per codebook size. Returns whether
/// every design stopped before its iteration cap.
pub fn design_codebook(cfg: &RunConfig, out: &mut OutputDir) -> Result<bool, CliError> {
    let q = cfg.scenario.q;
    let mut converged = true;
    for m in cfg.m_values() {
        let (shape, report) = design_shape(cfg, q, m)?;
        log::info!(
            "M = {m}: {} iterations, {:?}, objective {:.6e} -> {:.6e}",
            report.iterations,
            report.stop_reason,
            report.initial_objective,
            report.final_objective
        );
        converged &= report.converged();
        out.text(&format!("shape_optimized_m{m}.txt"), &shape_to_text(&shape, CodebookKind::Optimized, m, cfg.scenario.spacing))?;
        out.json(&format!("design_report_m{m}.json"), &report)?;
    }
    Ok(converged)
}

pub const ESTIMATE_CSV_HEADER: &str = "scheme,msnr_db,mse,trials";

#[derive(Debug, Serialize)]
struct EstimateSummary<'a> {
    config: &'a RunConfig,
    design: &'a DesignReport,
    /// One-sided paired z of quadratic minus optimized ML error per MSNR.
    z_quadratic_minus_optimized: Vec<(f64, f64)>,
}

pub fn estimate_csv(points: &[StudyPoint]) -> String {
    let mut s = format!("{ESTIMATE_CSV_HEADER}\n");
    for p in points {
        let _ = writeln!(s, "{},{},{:.6e},{}", p.scheme.as_str(), p.msnr_db, p.mse(), p.errors.len());
    }
    s
}

pub fn estimate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<StudyPoint>, CliError> {
    let sc = cfg.study_config();
    // the study is normalized to half-wavelength spacing
    let mut dc = cfg.design_config(sc.q, sc.m_count);
    dc.spacing_over_wavelength = 0.5;
    let init = irstrack::codebook::quadratic_profile(sc.q, sc.m_count, 0.5, 1.0, 0)?;
    let (shape, report) = optimize_beam_shape(&init, &dc)?;
    let points = estimation_study(&sc, &shape)?;
    let z = sc
        .msnr_db
        .iter()
        .map(|&db| {
            let pick = |s: StudyScheme| points.iter().find(|p| p.scheme == s && p.msnr_db == db).expect("every scheme is run");
            (db, paired_z(&pick(StudyScheme::MlQuadratic).errors, &pick(StudyScheme::MlOptimized).errors))
        })
        .collect();
    out.csv("estimate.csv", &estimate_csv(&points))?;
    out.json("estimate_summary.json", &EstimateSummary { config: cfg, design: &report, z_quadratic_minus_optimized: z })?;
    Ok(points)
}

pub const TRACK_CSV_HEADER: &str = "time_s,block,scheme,snr_db,rate,pred_err,m1,m2";
pub const EVENTS_CSV_HEADER: &str = "kind,block,index,time_s";

fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut s = format!("{TRACK_CSV_HEADER}\n");
    for r in records {
        let _ = writeln!(
            s,
            "{:.9},{},{},{:.6},{:.6},{:.6e},{},{}",
            r.time,
            r.block,
            r.scheme.as_str(),
            to_db(r.snr),
            r.rate,
            r.prediction_error,
            r.codeword.m1,
            r.codeword.m2
        );
    }
    s
}

fn events_csv(events: &[ReconfigEvent]) -> String {
    let mut s = format!("{EVENTS_CSV_HEADER}\n");
    for e in events {
        let (kind, block, index, time) = match *e {
            ReconfigEvent::Uc { block, time } => ("uc", block, 0, time),
            ReconfigEvent::Ide { block, index, time } => ("ide", block, index as i64, time),
            ReconfigEvent::Ce { block, slot, time } => ("ce", block, slot, time),
        };
        let _ = writeln!(s, "{kind},{block},{index},{:.9}", to_f64(time));
    }
    s
}

/// Campaign config restricted to the `track` section's trajectory.
fn track_campaign(cfg: &RunConfig) -> Result<CampaignConfig, CliError> {
    let mut c = cfg.campaign_config()?;
    c.trajectory = TrajectoryKind::parse(&cfg.track.trajectory)?;
    c.noise_seeds = cfg.track.noise_seeds;
    c.trajectories = cfg.track.index + 1;
    Ok(c)
}

/// Single trajectory: per-slot metrics of every scheme, the IRS
/// reconfiguration log and the per-block prediction-error series.
pub fn track(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let camp = track_campaign(cfg)?;
    let t = &cfg.track;
    let (scenario, mut trajectory) = trial_setup(&camp, t.index)?;
    if camp.trajectory == TrajectoryKind::Nonlinear {
        if let (Some(entry), Some(sweep)) = (t.entry_deg, t.sweep_deg) {
            trajectory = nonlinear_trajectory_from(&camp.scenario.motion, entry.to_radians(), sweep.to_radians())?;
        }
    }
    let tracking = camp.tracking()?;
    let power = dbm_to_watts(t.ptx_dbm);
    for &m in &camp.m_values {
        let (shape, _) = design_shape(cfg, camp.scenario.irs_cells, m)?;
        let books = CodebookSet::new(&scenario, m, &shape)?;
        let mut records = Vec::new();
        for &scheme in &camp.schemes {
            let gamma = camp.overhead(scheme, m)?;
            if scheme == Scheme::Proposed {
                let run = run_proposed(&scenario, &books, &tracking, &trajectory, power, gamma, &mut noise_rng(&camp, t.index, 0))?;
                out.csv(&format!("track_events_m{m}.csv"), &events_csv(&run.events))?;
                records.extend(run.records);
            } else {
                records.extend(run_baseline(scheme, &scenario, &books, &tracking, &trajectory)?.records(&scenario, power, gamma));
            }
        }
        out.csv(&format!("track_metrics_m{m}.csv"), &metrics_csv(&records))?;
    }
    let mut predictors: Vec<PredictorKind> =
        t.s_max.iter().map(|&s| PredictorKind::Polynomial { history: s, degree: cfg.tracking.n }).collect();
    if t.kalman {
        predictors.push(PredictorKind::Kalman {
            process_var: cfg.tracking.kalman_process_var,
            measurement_var: cfg.tracking.kalman_measurement_var,
        });
    }
    let series = prediction_error_series_on(&camp, t.index, &trajectory, t.ptx_dbm, &predictors)?;
    out.csv("pred_err_series.csv", &series_to_csv(&series))?;
    let transitions: Vec<String> = trajectory.transitions().iter().map(|x| format!("{x:.6}")).collect();
    out.text("trajectory.txt", &format!("kind {}\nduration_s {:.6}\ntransitions_s {}\n", trajectory.kind.as_str(), trajectory.duration(), transitions.join(" ")))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct CampaignSummary<'a> {
    config: &'a RunConfig,
    rows: &'a [irstrack::sim::CampaignRow],
    designs: &'a [DesignReport],
    overhead: Vec<(String, usize, f64)>,
}

pub fn campaign(cfg: &RunConfig, out: &mut OutputDir) -> Result<irstrack::sim::CampaignResult, CliError> {
    let camp = cfg.campaign_config()?;
    let result = run_campaign(&camp)?;
    out.csv("campaign.csv", &rows_to_csv(&result.rows))?;
    let mut overhead = Vec::new();
    for &m in &camp.m_values {
        for &s in &camp.schemes {
            overhead.push((s.as_str().to_string(), m, camp.overhead(s, m)?));
        }
    }
    out.json("campaign_summary.json", &CampaignSummary { config: cfg, rows: &result.rows, designs: &result.designs, overhead })?;
    if cfg.campaign.beam_patterns {
        for (&m, shape) in camp.m_values.iter().zip(&result.shapes) {
            write_patterns(cfg, out, m, shape)?;
        }
    }
    Ok(result)
}

pub const BEAM_PATTERN_CSV_HEADER: &str = "theta_deg,amplitude";

/// `|g|` of the central codeword along a `theta` cut through its main lobe,
/// normal incidence.
pub fn beam_pattern_csv(cb: &Codebook, points: usize) -> String {
    let center = Codeword::new(cb.m_count / 2, cb.m_count / 2);
    let phi = cb.main_lobe(center).phi;
    let mut s = format!("{BEAM_PATTERN_CSV_HEADER}\n");
    for i in 0..points {
        let theta = -PI / 2.0 + PI * i as f64 / (points - 1) as f64;
        let theta = theta.clamp(-PI / 2.0 + 1e-9, PI / 2.0 - 1e-9);
        let g = cb.reflection_gain(center, Direction::new(theta, phi)).norm();
        let _ = writeln!(s, "{:.4},{:.9e}", theta.to_degrees(), g);
    }
    s
}

fn write_patterns(cfg: &RunConfig, out: &mut OutputDir, m: usize, shape: &BeamShape) -> Result<(), CliError> {
    let q = shape.len();
    let d = cfg.scenario.spacing;
    let quad = Codebook::new(CodebookKind::Quadratic, cfg.initial_shape(q, m)?, m, d, 1.0, (0.0, 0.0))?;
    let opt = Codebook::new(CodebookKind::Optimized, shape.clone(), m, d, 1.0, (0.0, 0.0))?;
    out.csv(&format!("beam_pattern_quadratic_m{m}.csv"), &beam_pattern_csv(&quad, cfg.beam_pattern.points))?;
    out.csv(&format!("beam_pattern_optimized_m{m}.csv"), &beam_pattern_csv(&opt, cfg.beam_pattern.points))?;
    Ok(())
}

/// Quadratic and optimized central-codeword patterns for every codebook size.
pub fn beam_pattern(cfg: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    for m in cfg.m_values() {
        let (shape, _) = design_shape(cfg, cfg.scenario.q, m)?;
        write_patterns(cfg, out, m, &shape)?;
    }
    Ok(())
}
