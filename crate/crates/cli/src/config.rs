//! Run configuration: TOML sections with reference defaults, environment
//! overrides and conversion into the library's typed configs.
//!
//! Angles are given in degrees, powers in dBm and speeds in km/h; everything
//! is converted to radians, watts and m/s on the way in.

use std::path::Path;

use irstrack::beamopt::DesignConfig;
use irstrack::codebook::quadratic_profile;
use irstrack::sim::schedule::seconds_from_f64;
use irstrack::sim::{
    CampaignConfig, MotionParams, PredictorKind, ScenarioParams, ScheduleParams, Scheme, StudyConfig, TrajectoryKind,
};
use irstrack::{BeamShape, Position};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Prefix of environment variables that override config keys, e.g.
/// `IRSTRACK_CAMPAIGN__TRAJECTORIES=3` or `IRSTRACK_SEED=7`.
pub const ENV_PREFIX: &str = "IRSTRACK_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioSection,
    pub schedule: ScheduleSection,
    pub codebook: CodebookSection,
    pub design: DesignSection,
    pub tracking: TrackingSection,
    pub campaign: CampaignSection,
    pub estimate: EstimateSection,
    pub track: TrackSection,
    pub beam_pattern: BeamPatternSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scenario: ScenarioSection::default(),
            schedule: ScheduleSection::default(),
            codebook: CodebookSection::default(),
            design: DesignSection::default(),
            tracking: TrackingSection::default(),
            campaign: CampaignSection::default(),
            estimate: EstimateSection::default(),
            track: TrackSection::default(),
            beam_pattern: BeamPatternSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    /// Meters.
    pub bs_position: [f64; 3],
    pub irs_position: [f64; 3],
    /// Center of the movement region.
    pub center: [f64; 3],
    /// IRS cells per axis.
    #[serde(alias = "Q")]
    pub q: usize,
    /// IRS element spacing in wavelengths.
    pub spacing: f64,
    /// Rows x columns.
    pub bs_array: [usize; 2],
    pub ue_array: [usize; 2],
    pub carrier_ghz: f64,
    pub noise_dbm: f64,
    /// Rice factors of the BS-IRS and IRS-user links.
    pub k_t: f64,
    pub k_r: f64,
    /// Scatterers per link.
    pub l_t: usize,
    pub l_r: usize,
    pub scatterer_box_m: f64,
    pub scatterer_clearance_m: f64,
    pub r1: f64,
    pub r2: f64,
    pub speed_kmh: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            bs_position: [0.0, 0.0, 10.0],
            irs_position: [-40.0, 40.0, 5.0],
            center: [0.0, 40.0, 0.0],
            q: 40,
            spacing: 0.5,
            bs_array: [16, 4],
            ue_array: [2, 2],
            carrier_ghz: 28.0,
            noise_dbm: -120.0,
            k_t: 10.0,
            k_r: 10.0,
            l_t: 4,
            l_r: 4,
            scatterer_box_m: 20.0,
            scatterer_clearance_m: 2.0,
            r1: 10.0,
            r2: 5.0,
            speed_kmh: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub block_s: f64,
    /// `T_CE + T_DT`.
    pub slot_ms: f64,
    pub symbol_us: f64,
    pub n_uc: i64,
    pub n_ide: i64,
    pub n_ce: i64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { block_s: 1.5, slot_ms: 1.29, symbol_us: 4.16, n_uc: 5, n_ide: 5, n_ce: 1 }
    }
}

/// A scalar or a list in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookSection {
    /// Codewords per axis; a list runs every size.
    #[serde(alias = "M")]
    pub m: OneOrMany<usize>,
    /// Hypotheses per axis.
    #[serde(alias = "H")]
    pub h: usize,
}

impl Default for CodebookSection {
    fn default() -> Self {
        Self { m: OneOrMany::Many(vec![30, 40]), h: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    /// Linear design SNR of the shape objective.
    pub design_snr: f64,
    /// Quadrature points per axis.
    pub grid_g: usize,
    pub step: f64,
    pub decay: f64,
    pub stop_tol: f64,
    pub max_iter: usize,
}

impl Default for DesignSection {
    fn default() -> Self {
        let d = DesignConfig::new(1, 1, 25.0);
        Self { design_snr: d.design_snr, grid_g: d.grid_g, step: d.step, decay: d.decay, stop_tol: d.stop_tol, max_iter: d.max_iter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorName {
    Polynomial,
    Kalman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackingSection {
    pub predictor: PredictorName,
    pub s_max: usize,
    /// Polynomial order.
    pub n: usize,
    pub kalman_process_var: f64,
    pub kalman_measurement_var: f64,
    /// Consecutive uncovered blocks that count as a loss.
    pub loss_blocks: usize,
    /// Record every n-th data slot.
    pub metrics_stride: usize,
}

impl Default for TrackingSection {
    fn default() -> Self {
        Self {
            predictor: PredictorName::Polynomial,
            s_max: 3,
            n: 1,
            kalman_process_var: 1e-6,
            kalman_measurement_var: 1e-4,
            loss_blocks: 2,
            metrics_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSection {
    pub trajectory: String,
    pub ptx_dbm: Vec<f64>,
    pub trajectories: usize,
    pub noise_seeds: usize,
    pub schemes: Vec<String>,
    /// Children per hierarchical level and number of levels.
    pub n_hs: i64,
    pub l_c: i64,
    /// Also write the beam patterns of every codebook.
    pub beam_patterns: bool,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            trajectory: "linear".into(),
            ptx_dbm: vec![0.0, 10.0, 20.0, 30.0, 40.0],
            trajectories: 12,
            noise_seeds: 10,
            schemes: Scheme::ALL.iter().map(|s| s.as_str().to_string()).collect(),
            n_hs: 4,
            l_c: 2,
            beam_patterns: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateSection {
    pub q: usize,
    pub m: usize,
    pub h: usize,
    pub trials: usize,
    pub msnr_db: Vec<f64>,
    pub pilots: usize,
    pub random_configs: usize,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self { q: 40, m: 25, h: 10, trials: 500, msnr_db: vec![0.0, 10.0, 20.0, 30.0], pilots: 5, random_configs: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackSection {
    pub trajectory: String,
    /// Trajectory draw (and scatterer draw) index.
    pub index: usize,
    /// Fixed nonlinear entry angle and arc sweep; drawn at random when absent.
    pub entry_deg: Option<f64>,
    pub sweep_deg: Option<f64>,
    pub ptx_dbm: f64,
    pub noise_seeds: usize,
    /// Polynomial histories compared in the prediction-error series.
    pub s_max: Vec<usize>,
    /// Add the Kalman tracker to the series.
    pub kalman: bool,
}

impl Default for TrackSection {
    fn default() -> Self {
        Self {
            trajectory: "nonlinear".into(),
            index: 0,
            entry_deg: None,
            sweep_deg: None,
            ptx_dbm: 20.0,
            noise_seeds: 10,
            s_max: vec![2, 3],
            kalman: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamPatternSection {
    /// Samples over `[-90, 90]` degrees.
    pub points: usize,
}

impl Default for BeamPatternSection {
    fn default() -> Self {
        Self { points: 721 }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Parses a TOML value from an environment string, falling back to a plain
/// string for bare words.
fn env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    /// Parses config text; errors carry the offending line.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            match line {
                Some(l) => CliError::Config(format!("line {l}: {}", e.message())),
                None => CliError::Config(e.message().to_string()),
            }
        })
    }

    /// Reads `path` (or starts from defaults), applies `IRSTRACK_*` overrides
    /// from `vars` and validates.
    pub fn load(path: Option<&Path>, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
            None => String::new(),
        };
        let mut cfg = Self::from_toml(&text)?;
        let overrides: Vec<(String, String)> =
            vars.into_iter().filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v))).collect();
        if !overrides.is_empty() {
            let mut table = toml::Table::try_from(&cfg).map_err(|e| CliError::Config(e.to_string()))?;
            for (key, raw) in &overrides {
                let path: Vec<&str> = key.split("__").collect();
                let (last, sections) = path.split_last().expect("split yields one item");
                let mut node = &mut table;
                for s in sections {
                    node = node
                        .get_mut(*s)
                        .and_then(|v| v.as_table_mut())
                        .ok_or_else(|| CliError::Config(format!("{ENV_PREFIX}{}: unknown section '{s}'", key.to_ascii_uppercase())))?;
                }
                node.insert(last.to_string(), env_value(raw));
            }
            cfg = table.try_into().map_err(|e: toml::de::Error| CliError::Config(format!("environment override: {}", e.message())))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical TOML of the resolved config; hashed into every manifest.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario_params()?.validate()?;
        self.campaign_config()?.validate()?;
        self.design_config(self.scenario.q, self.m_values()[0]).validate()?;
        self.study_config().validate()?;
        TrajectoryKind::parse(&self.track.trajectory)?;
        if self.track.noise_seeds == 0 || self.track.s_max.contains(&0) {
            return Err(invalid("track.noise_seeds and every track.s_max must be at least 1"));
        }
        if self.track.s_max.is_empty() && !self.track.kalman {
            return Err(invalid("track needs at least one predictor"));
        }
        for a in [self.track.entry_deg, self.track.sweep_deg].into_iter().flatten() {
            if !a.is_finite() {
                return Err(invalid("track angles must be finite"));
            }
        }
        if self.track.sweep_deg.is_some_and(|s| s <= 0.0) {
            return Err(invalid("track.sweep_deg must be positive"));
        }
        if self.beam_pattern.points < 2 {
            return Err(invalid("beam_pattern.points must be at least 2"));
        }
        Ok(())
    }

    pub fn m_values(&self) -> Vec<usize> {
        self.codebook.m.to_vec()
    }

    pub fn scenario_params(&self) -> Result<ScenarioParams, CliError> {
        let s = &self.scenario;
        let p = |v: [f64; 3]| Position::new(v[0], v[1], v[2]);
        if !(s.carrier_ghz > 0.0) {
            return Err(invalid("scenario.carrier_ghz must be positive"));
        }
        if !(s.r2 > 0.0 && s.r1 > s.r2) {
            return Err(invalid("scenario radii must satisfy 0 < r2 < r1"));
        }
        Ok(ScenarioParams {
            bs_position: p(s.bs_position),
            irs_position: p(s.irs_position),
            irs_cells: s.q,
            irs_spacing: s.spacing,
            bs_rows: s.bs_array[0],
            bs_cols: s.bs_array[1],
            ue_rows: s.ue_array[0],
            ue_cols: s.ue_array[1],
            carrier_hz: s.carrier_ghz * 1e9,
            noise_dbm: s.noise_dbm,
            rice_t: s.k_t,
            rice_r: s.k_r,
            scatterers_t: s.l_t,
            scatterers_r: s.l_r,
            scatterer_box: s.scatterer_box_m,
            scatterer_clearance: s.scatterer_clearance_m,
            motion: MotionParams { center: p(s.center), outer_radius: s.r1, inner_radius: s.r2, speed: s.speed_kmh / 3.6 },
        })
    }

    pub fn schedule_params(&self) -> Result<ScheduleParams, CliError> {
        let s = &self.schedule;
        Ok(ScheduleParams {
            block: seconds_from_f64(s.block_s)?,
            slot: seconds_from_f64(s.slot_ms * 1e-3)?,
            symbol: seconds_from_f64(s.symbol_us * 1e-6)?,
            ue_antennas: (self.scenario.ue_array[0] * self.scenario.ue_array[1]) as i64,
            n_uc: s.n_uc,
            n_ide: s.n_ide,
            ide_codewords: 9,
            n_ce: s.n_ce,
        })
    }

    pub fn predictor(&self) -> PredictorKind {
        let t = &self.tracking;
        match t.predictor {
            PredictorName::Polynomial => PredictorKind::Polynomial { history: t.s_max, degree: t.n },
            PredictorName::Kalman => {
                PredictorKind::Kalman { process_var: t.kalman_process_var, measurement_var: t.kalman_measurement_var }
            }
        }
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>, CliError> {
        if self.campaign.schemes.is_empty() {
            return Err(invalid("campaign.schemes must not be empty"));
        }
        self.campaign.schemes.iter().map(|s| Ok(Scheme::parse(s)?)).collect()
    }

    pub fn campaign_config(&self) -> Result<CampaignConfig, CliError> {
        let c = &self.campaign;
        Ok(CampaignConfig {
            scenario: self.scenario_params()?,
            schedule: self.schedule_params()?,
            predictor: self.predictor(),
            grid_points: self.codebook.h,
            loss_blocks: self.tracking.loss_blocks,
            metrics_stride: self.tracking.metrics_stride,
            trajectory: TrajectoryKind::parse(&c.trajectory)?,
            m_values: self.m_values(),
            ptx_dbm: c.ptx_dbm.clone(),
            trajectories: c.trajectories,
            noise_seeds: c.noise_seeds,
            seed: self.seed,
            schemes: self.schemes()?,
            design: self.design_config(self.scenario.q, 1),
            hs_children: c.n_hs,
            hs_levels: c.l_c,
        })
    }

    /// Shape design for a `q x q` IRS with `m_count` codewords per axis.
    pub fn design_config(&self, q: usize, m_count: usize) -> DesignConfig {
        let d = &self.design;
        let mut dc = DesignConfig::new(q, m_count.max(1), d.design_snr);
        dc.grid_g = d.grid_g;
        dc.step = d.step;
        dc.decay = d.decay;
        dc.stop_tol = d.stop_tol;
        dc.max_iter = d.max_iter;
        dc.spacing_over_wavelength = self.scenario.spacing;
        dc
    }

    /// Quadratic starting shape of the design.
    pub fn initial_shape(&self, q: usize, m_count: usize) -> Result<BeamShape, CliError> {
        Ok(quadratic_profile(q, m_count, self.scenario.spacing, 1.0, 0)?)
    }

    pub fn study_config(&self) -> StudyConfig {
        let e = &self.estimate;
        StudyConfig {
            q: e.q,
            m_count: e.m,
            grid_points: e.h,
            trials: e.trials,
            msnr_db: e.msnr_db.clone(),
            pilots: e.pilots,
            random_configs: e.random_configs,
            seed: self.seed,
        }
    }
}
