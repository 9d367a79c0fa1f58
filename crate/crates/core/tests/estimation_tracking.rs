use irstrack::channel::complex_gaussian;
use irstrack::codebook::Codebook;
use irstrack::estimation::{
    adjacent_codeword_set, build_hypothesis_grid, log_likelihood, music_covariance, music_estimate, peak_ml_estimate, xi_tilde,
    CodebookGains, GainModel, MeasurementSet,
};
use irstrack::tracking::{
    fit_polynomial, extrapolate, kalman_predict, kalman_update, nearest_codeword, EstimateHistory, KalmanState,
};
use irstrack::{Codeword, Direction};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noisy_set(cb: &Codebook, center: Codeword, truth: Direction, seed: u64, noise: f64) -> MeasurementSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set = adjacent_codeword_set(center, 1, cb.m_count);
    let xi = complex_gaussian(&mut rng, 1.0) / cb.g_max();
    let pilot = vec![Complex64::new(1.0, 0.0); 5];
    let received = set
        .iter()
        .map(|m| {
            let g = cb.reflection_gain(*m, truth);
            pilot.iter().map(|s| g * xi * s + complex_gaussian(&mut rng, noise)).collect()
        })
        .collect();
    MeasurementSet::new(set, received, pilot).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn concentrated_xi_dominates(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..10);
        let n = rng.random_range(1..8);
        let pilot: Vec<Complex64> = (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let g: Vec<Complex64> = (0..k).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let received = (0..k).map(|_| (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect()).collect();
        let ms = MeasurementSet::new((0..k).map(|i| Codeword::new(0, i)).collect(), received, pilot).unwrap();
        let best = log_likelihood(&ms, &g, xi_tilde(&ms, &g).unwrap());
        for _ in 0..100 {
            let xi = complex_gaussian(&mut rng, 4.0);
            prop_assert!(log_likelihood(&ms, &g, xi) <= best + 1e-9 * best.abs().max(1.0));
        }
    }

    #[test]
    fn estimates_stay_on_grid(seed in 0u64..10_000, dt in -0.1f64..0.1, dp in -0.1f64..0.1) {
        let cb = Codebook::quadratic(12, 9, 0.5, 1.0).unwrap();
        let center = Codeword::new(4, 4);
        let grid = build_hypothesis_grid(center, &cb, 6).unwrap();
        let lobe = cb.main_lobe(center);
        let ms = noisy_set(&cb, center, Direction::new(lobe.theta + dt, lobe.phi + dp), seed, 1e-3);
        let model = CodebookGains { codebook: &cb, codewords: &ms.codewords };
        let ml = peak_ml_estimate(&ms, &grid, &model).unwrap();
        prop_assert_eq!(grid.points[ml.index], ml.direction);
        let mu = music_estimate(&music_covariance(&ms).unwrap(), &ms, &grid, &model).unwrap();
        prop_assert!(grid.points.contains(&mu.estimate.direction));
    }

    #[test]
    fn music_ignores_common_phase(seed in 0u64..10_000, phase in -3.0f64..3.0) {
        let cb = Codebook::quadratic(12, 9, 0.5, 1.0).unwrap();
        let center = Codeword::new(3, 5);
        let grid = build_hypothesis_grid(center, &cb, 6).unwrap();
        let lobe = cb.main_lobe(center);
        let ms = noisy_set(&cb, center, Direction::new(lobe.theta + 0.02, lobe.phi - 0.03), seed, 1e-4);
        let c = Complex64::from_polar(1.0, phase);
        let rotated = MeasurementSet::new(
            ms.codewords.clone(),
            ms.received.iter().map(|r| r.iter().map(|x| x * c).collect()).collect(),
            ms.pilot.clone(),
        )
        .unwrap();
        let model = CodebookGains { codebook: &cb, codewords: &ms.codewords };
        let a = music_estimate(&music_covariance(&ms).unwrap(), &ms, &grid, &model).unwrap();
        let b = music_estimate(&music_covariance(&rotated).unwrap(), &rotated, &grid, &model).unwrap();
        prop_assert_eq!(a.estimate.index, b.estimate.index);
    }

    #[test]
    fn polynomial_fit_is_exact_up_to_its_degree(
        coef in prop::collection::vec(-0.05f64..0.05, 3),
        n in 0usize..3,
        extra in 0usize..3,
        t0 in 0.0f64..100.0,
    ) {
        let truth = |t: f64| {
            let x = (t - t0) / 10.0;
            let c: Vec<f64> = coef.iter().take(n + 1).copied().collect();
            let v = c.iter().rev().fold(0.0, |acc, b| acc * x + b);
            Direction::new(v, -v)
        };
        let s = n + 1 + extra;
        let mut h = EstimateHistory::new(s).unwrap();
        for k in 0..s {
            let t = t0 + 1.5 * k as f64;
            h.push(t, truth(t)).unwrap();
        }
        let model = fit_polynomial(&h, n).unwrap();
        prop_assert_eq!(model.theta.len(), n + 1);
        let t = t0 + 1.5 * s as f64 + 0.7;
        prop_assert!((extrapolate(&model, t).theta - truth(t).theta).abs() < 1e-9);
    }

    #[test]
    fn normal_equations_have_zero_residual_gradient(
        values in prop::collection::vec(-0.3f64..0.3, 3..6),
        n in 0usize..3,
    ) {
        let mut h = EstimateHistory::new(values.len()).unwrap();
        for (k, v) in values.iter().enumerate() {
            h.push(1.5 * k as f64, Direction::new(*v, 0.0)).unwrap();
        }
        let model = fit_polynomial(&h, n).unwrap();
        // d/db_r sum (p(t) - y)^2 = 2 sum (p(t) - y) tau^r
        for r in 0..=model.degree {
            let g: f64 = h.iter().map(|(t, d)| (extrapolate(&model, *t).theta - d.theta) * (t - model.origin).powi(r as i32)).sum();
            prop_assert!(g.abs() < 1e-8);
        }
    }

    #[test]
    fn kalman_covariance_stays_psd(seed in 0u64..10_000, q in 0.0f64..1e-3, r in 1e-6f64..1e-2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = KalmanState::new(Direction::new(0.1, -0.1), q, r, 1.5).unwrap();
        for _ in 0..30 {
            s = kalman_predict(&s);
            let z = Direction::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            s = kalman_update(&s, z).unwrap();
            prop_assert!((s.p - s.p.transpose()).abs().max() == 0.0);
            let eig = s.p.symmetric_eigen();
            prop_assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-10));
        }
    }
}

#[test]
fn noiseless_estimators_hit_every_grid_point() {
    let cb = Codebook::quadratic(16, 15, 0.5, 1.0).unwrap();
    let center = Codeword::new(7, 6);
    let grid = build_hypothesis_grid(center, &cb, 10).unwrap();
    let set = adjacent_codeword_set(center, 1, cb.m_count);
    let model = CodebookGains { codebook: &cb, codewords: &set };
    let mut g = vec![Complex64::default(); model.len()];
    for (i, truth) in grid.points.iter().enumerate() {
        model.gains(*truth, &mut g);
        let pilot = vec![Complex64::new(1.0, 0.0); 4];
        let received = g.iter().map(|g| vec![g * Complex64::new(0.01, 0.02); 4]).collect();
        let ms = MeasurementSet::new(set.clone(), received, pilot).unwrap();
        assert_eq!(peak_ml_estimate(&ms, &grid, &model).unwrap().index, i);
        assert_eq!(music_estimate(&music_covariance(&ms).unwrap(), &ms, &grid, &model).unwrap().estimate.index, i);
    }
}

#[test]
fn codeword_selection_is_scale_free() {
    // the selected codeword depends only on the ordering of lobe distances
    let cb = Codebook::quadratic(16, 15, 0.5, 1.0).unwrap();
    for d in [Direction::new(0.1, 0.05), Direction::new(-0.3, 0.2), Direction::new(0.0, -0.45)] {
        let m = nearest_codeword(&cb, d);
        let dist = |c: Codeword| cb.main_lobe(c).dist_sq(&d);
        let best = cb.codewords().min_by(|a, b| (3.7 * dist(*a)).total_cmp(&(3.7 * dist(*b)))).unwrap();
        assert_eq!(m, best);
    }
}

#[test]
fn model_matched_kalman_predicts_exactly() {
    let truth = |t: f64| Direction::new(-0.2 + 0.003 * t, 0.05 + 0.001 * t);
    let mut s = KalmanState::new(truth(0.0), 0.0, 0.0, 1.5).unwrap();
    for k in 1..12 {
        s = kalman_update(&kalman_predict(&s), truth(1.5 * k as f64)).unwrap();
        if k >= 2 {
            let t = 1.5 * k as f64 + 0.9;
            assert!(s.direction_after(0.9).dist_sq(&truth(t)).sqrt() < 1e-12);
        }
    }
}
