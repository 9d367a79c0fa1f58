//! Time-block protocol simulation: schedule, trajectories, channel
//! evaluation, the tracking loop, baselines and Monte-Carlo drivers.

pub mod campaign;
pub mod run;
pub mod scenario;
pub mod schedule;
pub mod study;
pub mod trajectory;

pub use campaign::{run_campaign, CampaignConfig, CampaignResult, CampaignRow};
pub use run::{run_baseline, run_proposed, CodebookSet, MetricsRecord, PredictorKind, RunOutcome, TrackingConfig};
pub use scenario::{Scenario, ScenarioParams};
pub use schedule::{overhead_ratio, snr_and_rate, ScheduleParams, Scheme, TimeBlockSchedule};
pub use study::{estimation_study, StudyConfig, StudyPoint, StudyScheme};
pub use trajectory::{generate_trajectory, nonlinear_trajectory_from, MotionParams, Trajectory, TrajectoryKind};
