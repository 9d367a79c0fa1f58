use irstrack::beamopt::{mse_hat, mse_hat_gradient, optimize_beam_shape, DesignConfig, MseObjectiveCache};
use irstrack::codebook::quadratic_profile;
use irstrack::BeamShape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(design_snr: f64) -> DesignConfig {
    let mut c = DesignConfig::new(10, 9, design_snr);
    c.grid_g = 8;
    c
}

/// Quadratic profile with random phase jitter; keeps the lobe near broadside.
fn random_shape(rng: &mut ChaCha8Rng, q: usize) -> BeamShape {
    let base = quadratic_profile(q, 9, 0.5, 1.0, 0).unwrap();
    BeamShape::from_phases(base.phases.iter().map(|p| p + rng.random_range(-0.5..0.5)).collect()).unwrap()
}

#[test]
fn objective_is_non_increasing_in_design_snr() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let shape = random_shape(&mut rng, 10);
        let mut last = f64::INFINITY;
        for snr in [0.0, 1.0, 5.0, 25.0, 100.0] {
            let cache = MseObjectiveCache::for_shape(&small(snr), &shape).unwrap();
            let v = cache.value(&shape).unwrap();
            assert!(v <= last + 1e-12, "snr {snr}: {v} > {last}");
            last = v;
        }
    }
}

#[test]
fn zero_snr_objective_has_zero_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let shape = random_shape(&mut rng, 10);
    assert!(mse_hat_gradient(&shape, &small(0.0)).unwrap().iter().all(|g| g.abs() < 1e-15));
    assert!((mse_hat(&shape, &small(0.0)).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn gradient_ignores_global_phase() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shape = random_shape(&mut rng, 10);
    let shifted = BeamShape::from_phases(shape.phases.iter().map(|p| p + 0.8).collect()).unwrap();
    let cfg = small(20.0);
    let cache = MseObjectiveCache::for_shape(&cfg, &shape).unwrap();
    let (_, a) = cache.value_and_gradient(&shape).unwrap();
    let (_, b) = cache.value_and_gradient(&shifted).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-8);
    }
    // the objective depends on |.| only, so the gradient sums to zero
    assert!(a.iter().sum::<f64>().abs() < 1e-8 * a.iter().map(|x| x.abs()).sum::<f64>().max(1.0));
}

#[test]
fn gradient_matches_central_differences() {
    let cfg = small(25.0);
    let shape = quadratic_profile(10, 9, 0.5, 1.0, 0).unwrap();
    let cache = MseObjectiveCache::for_shape(&cfg, &shape).unwrap();
    let (_, grad) = cache.value_and_gradient(&shape).unwrap();
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let h = 1e-5;
    for i in 0..10 {
        let mut up = shape.clone();
        up.phases[i] += h;
        let mut dn = shape.clone();
        dn.phases[i] -= h;
        let fd = (cache.value(&up).unwrap() - cache.value(&dn).unwrap()) / (2.0 * h);
        assert!((fd - grad[i]).abs() <= 1e-4 * grad[i].abs().max(1e-3 * scale), "component {i}: {fd} vs {}", grad[i]);
    }
}

#[test]
fn optimization_descends_and_keeps_unit_modulus() {
    let cfg = DesignConfig { max_iter: 60, ..small(25.0) };
    let init = quadratic_profile(10, 9, 0.5, 1.0, 0).unwrap();
    let (shape, report) = optimize_beam_shape(&init, &cfg).unwrap();
    assert!(report.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(report.final_objective < report.initial_objective);
    assert!(shape.omega().iter().all(|w| (w.norm() - 1.0).abs() < 1e-12));
    assert_eq!(report.history.len(), report.iterations + 1);
}
