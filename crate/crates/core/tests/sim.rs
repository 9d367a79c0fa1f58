use irstrack::codebook::quadratic_profile;
use irstrack::geometry::position_along;
use irstrack::sim::campaign::{noise_rng, rows_to_csv, trial_setup};
use irstrack::sim::run::ReconfigEvent;
use irstrack::sim::trajectory::Segment;
use irstrack::sim::schedule::{overhead_ratio, rate_from_snr, to_f64, Seconds};
use irstrack::sim::{
    nonlinear_trajectory_from, run_baseline, run_campaign, run_proposed, snr_and_rate, CampaignConfig, CodebookSet, ScheduleParams,
    Scheme, TimeBlockSchedule, Trajectory, TrajectoryKind,
};
use irstrack::{Direction, Position};
use num_complex::Complex64;
use num_rational::Ratio;
use proptest::prelude::*;

fn small_config() -> CampaignConfig {
    let mut c = CampaignConfig::reference();
    c.scenario.irs_cells = 16;
    c.m_values = vec![15];
    c.metrics_stride = 50;
    c
}

fn static_trajectory(p: Position, blocks: usize) -> Trajectory {
    let xy = [p.x, p.y];
    Trajectory {
        kind: TrajectoryKind::Linear,
        speed: 0.0,
        height: p.z,
        segments: vec![Segment::Line { t0: 0.0, t1: 1.5 * blocks as f64 + 0.1, from: xy, to: xy }],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn schedule_identity_is_exact(
        block_ms in 200i64..3000,
        slot_us in 200i64..5000,
        symbol_ns in 100i64..10_000,
        n_uc in 1i64..8,
        n_ide in 1i64..8,
    ) {
        let p = ScheduleParams {
            block: Ratio::new(block_ms, 1000),
            slot: Ratio::new(slot_us, 1_000_000),
            symbol: Ratio::new(symbol_ns, 1_000_000_000),
            ue_antennas: 4,
            n_uc,
            n_ide,
            ide_codewords: 9,
            n_ce: 1,
        };
        if let Ok(s) = TimeBlockSchedule::derive(&p) {
            prop_assert_eq!(s.uc + s.ide + (s.ce + s.dt) * s.eta, s.block);
            prop_assert_eq!(s.uc, p.symbol * (4 * n_uc));
            prop_assert_eq!(s.ide, p.symbol * (9 * n_ide));
            prop_assert!(s.is_consistent());
        }
    }

    #[test]
    fn rate_is_monotone_in_overhead(snr in 0.0f64..1e4, a in 0.0f64..0.99, b in 0.0f64..0.99) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(rate_from_snr(snr, hi) <= rate_from_snr(snr, lo));
    }
}

#[test]
fn reference_overheads_are_ordered() {
    let cfg = CampaignConfig::reference();
    let s = TimeBlockSchedule::derive(&cfg.schedule).unwrap();
    let g = |scheme| overhead_ratio(scheme, &s, &cfg.overhead_params(30)).unwrap();
    let (p, h, b) = (g(Scheme::Proposed), g(Scheme::Hierarchical), g(Scheme::Focusing));
    assert!(p < h && h < b);
    let ide: Seconds = Ratio::new(1872, 10_000_000);
    assert_eq!(s.ide, ide);
}

#[test]
fn snr_and_rate_examples() {
    let (snr, rate) = snr_and_rate(Complex64::new(2.0, 0.0), 3.0, 1.0, 4, 0.5).unwrap();
    assert!((snr - 3.0).abs() < 1e-12);
    assert!((rate - 1.0).abs() < 1e-12);
    assert!((rate_from_snr(7.0, 0.0) - 3.0).abs() < 1e-12);
    assert!(snr_and_rate(Complex64::new(1.0, 0.0), 1.0, 1.0, 4, 1.0).is_err());
}

#[test]
fn event_log_matches_schedule() {
    let cfg = small_config();
    let tracking = cfg.tracking().unwrap();
    let s = tracking.schedule;
    let (scenario, trajectory) = trial_setup(&cfg, 0).unwrap();
    let shape = quadratic_profile(16, 15, 0.5, 1.0, 0).unwrap();
    let books = CodebookSet::new(&scenario, 15, &shape).unwrap();
    let run = run_proposed(&scenario, &books, &tracking, &trajectory, 1.0, 0.0, &mut noise_rng(&cfg, 0, 0)).unwrap();
    let blocks = run.blocks.len() as i64;
    assert!(blocks > 0);
    let mut expected = Vec::new();
    for k in 0..blocks {
        expected.push(ReconfigEvent::Uc { block: k, time: s.block_start(k) });
        // the 3 x 3 neighbourhood is clipped at the codebook edge
        let set_len = run.events.iter().filter(|e| matches!(e, ReconfigEvent::Ide { block, .. } if *block == k)).count();
        assert!([4, 6, 9].contains(&set_len), "block {k}: {set_len} estimation codewords");
        for i in 0..set_len {
            expected.push(ReconfigEvent::Ide { block: k, index: i, time: s.ide_start(k) + s.symbol * (i as i64 * s.n_ide) });
        }
        for kappa in 0..s.eta {
            expected.push(ReconfigEvent::Ce { block: k, slot: kappa, time: s.slot_start(k, kappa) });
        }
    }
    assert_eq!(run.events, expected);
    // slots tile the block exactly
    assert_eq!(s.slot_start(0, s.eta), s.block_start(1));
}

#[test]
fn baselines_bound_the_proposed_scheme_per_sample() {
    let cfg = small_config();
    let tracking = cfg.tracking().unwrap();
    let shape = quadratic_profile(16, 15, 0.5, 1.0, 0).unwrap();
    for index in 0..2 {
        let (scenario, trajectory) = trial_setup(&cfg, index).unwrap();
        let books = CodebookSet::new(&scenario, 15, &shape).unwrap();
        let power = 0.1;
        let proposed = run_proposed(&scenario, &books, &tracking, &trajectory, power, 0.0, &mut noise_rng(&cfg, index, 0)).unwrap();
        let perfect = run_baseline(Scheme::Perfect, &scenario, &books, &tracking, &trajectory).unwrap().records(&scenario, power, 0.0);
        let focusing = run_baseline(Scheme::Focusing, &scenario, &books, &tracking, &trajectory).unwrap().records(&scenario, power, 0.0);
        assert_eq!(proposed.records.len(), perfect.len());
        for ((a, b), c) in proposed.records.iter().zip(&perfect).zip(&focusing) {
            assert_eq!(a.time, b.time);
            assert!(a.snr >= 0.0 && a.rate >= 0.0);
            assert!(b.snr >= a.snr * (1.0 - 1e-12), "perfect {} < proposed {} at {}", b.snr, a.snr, a.time);
            assert!(c.snr >= b.snr * (1.0 - 1e-12), "focusing {} < perfect {} at {}", c.snr, b.snr, a.time);
        }
    }
}

#[test]
fn static_user_keeps_one_codeword() {
    let cfg = small_config();
    let tracking = cfg.tracking().unwrap();
    let (scenario, _) = trial_setup(&cfg, 0).unwrap();
    let shape = quadratic_profile(16, 15, 0.5, 1.0, 0).unwrap();
    let books = CodebookSet::new(&scenario, 15, &shape).unwrap();
    let irs = cfg.scenario.irs_position;
    for d in [Direction::new(0.05, -0.02), Direction::new(-0.2, 0.1)] {
        let trajectory = static_trajectory(position_along(&irs, d, 40.0), 6);
        // 80 dBm makes the measurements effectively noiseless
        let run = run_proposed(&scenario, &books, &tracking, &trajectory, 1e5, 0.0, &mut noise_rng(&cfg, 0, 0)).unwrap();
        let after_first: Vec<_> = run.records.iter().filter(|r| r.block > 0).collect();
        assert!(!after_first.is_empty());
        assert!(after_first.iter().all(|r| r.codeword == after_first[0].codeword));
        assert!(after_first.iter().all(|r| (r.snr - after_first[0].snr).abs() <= 1e-9 * r.snr));
        assert!(!run.lost());
    }
}

#[test]
fn hierarchical_search_matches_exhaustive_for_static_user() {
    let cfg = small_config();
    let tracking = cfg.tracking().unwrap();
    let shape = quadratic_profile(16, 15, 0.5, 1.0, 0).unwrap();
    let irs = cfg.scenario.irs_position;
    for index in 0..3 {
        let (scenario, _) = trial_setup(&cfg, index).unwrap();
        for m_count in [15, 20] {
            let books = CodebookSet::new(&scenario, m_count, &shape).unwrap();
            for d in [Direction::new(0.0, 0.0), Direction::new(0.12, -0.05), Direction::new(-0.3, 0.2)] {
                let trajectory = static_trajectory(position_along(&irs, d, 40.0), 2);
                let h = run_baseline(Scheme::Hierarchical, &scenario, &books, &tracking, &trajectory).unwrap();
                let p = run_baseline(Scheme::Perfect, &scenario, &books, &tracking, &trajectory).unwrap();
                assert_eq!(h.codewords, p.codewords, "trajectory {index}, M = {m_count}, {d:?}");
            }
        }
    }
}

#[test]
fn nonlinear_path_has_two_kinks_and_arc_rate() {
    let motion = CampaignConfig::reference().scenario.motion;
    let t = nonlinear_trajectory_from(&motion, 0.3, 2.0).unwrap();
    let tr = t.transitions();
    assert_eq!(tr.len(), 2);
    assert!(((tr[1] - tr[0]) - motion.inner_radius * 2.0 / motion.speed).abs() < 1e-12);
    assert!(nonlinear_trajectory_from(&motion, 0.3, 0.0).is_err());
}

#[test]
fn proposed_runs_are_deterministic() {
    let cfg = small_config();
    let tracking = cfg.tracking().unwrap();
    let (scenario, trajectory) = trial_setup(&cfg, 1).unwrap();
    let shape = quadratic_profile(16, 15, 0.5, 1.0, 0).unwrap();
    let books = CodebookSet::new(&scenario, 15, &shape).unwrap();
    let run = || run_proposed(&scenario, &books, &tracking, &trajectory, 0.01, 0.1, &mut noise_rng(&cfg, 1, 3)).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let bits = |r: &irstrack::sim::RunOutcome| r.records.iter().map(|x| x.snr.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn tiny_campaign_is_deterministic_and_lossless_at_high_power() {
    let mut cfg = small_config();
    cfg.scenario.irs_cells = 10;
    cfg.m_values = vec![9];
    cfg.trajectories = 2;
    cfg.noise_seeds = 2;
    cfg.metrics_stride = 200;
    cfg.ptx_dbm = vec![70.0];
    cfg.design.max_iter = 5;
    cfg.design.grid_g = 8;
    let a = run_campaign(&cfg).unwrap();
    let b = run_campaign(&cfg).unwrap();
    assert_eq!(rows_to_csv(&a.rows), rows_to_csv(&b.rows));
    for row in &a.rows {
        assert_eq!(row.loss_prob, 0.0, "{}", row.scheme.as_str());
        // baselines are noise-free, so they run once per trajectory
        let trials = if row.scheme == Scheme::Proposed { 4 } else { 2 };
        assert_eq!(row.trials, trials);
    }
    assert!(to_f64(cfg.tracking().unwrap().schedule.block) == 1.5);
}
