mod common;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weave_mcmc::kernels::{
    adaptive_pretune, tune_acceptance, Kernel, KernelKind, DEFAULT_PROBE_LEN,
};
use weave_mcmc::targets::{gaussian_target, TargetModel};
use weave_mcmc::transforms::Preconditioner;

use common::{lag1_asymmetry, run_chain};

#[test]
fn lag_one_pairs_are_exchangeable() {
    let id = |v: f64| v;
    let sq = |v: f64| v * v;
    // In one dimension every bounce is a full reflection, so the weave
    // kernels never move there; the two-dimensional run covers them.
    for d in [1, 2] {
        let model = gaussian_target(d, DVector::zeros(d), DMatrix::identity(d, d)).unwrap();
        let pre = Preconditioner::new(DVector::from_element(d, 0.2), DMatrix::identity(d, d) * 1.5).unwrap();
        for (i, kind) in KernelKind::ALL.into_iter().enumerate() {
            let kernel = common::default_kernel(kind, pre.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
            let x0 = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let draws = run_chain(&kernel, &model, x0.clone(), 100_000, 200 + i as u64);
            let series: Vec<f64> = draws.column(0).iter().copied().collect();
            if d == 1 && matches!(kind, KernelKind::Wm | KernelKind::Hwm) {
                assert!(series.iter().all(|&v| (v - x0[0]).abs() < 1e-9), "{kind} moved in one dimension");
                continue;
            }
            let (mean, se) = lag1_asymmetry(&series, id, sq);
            assert!(mean.abs() <= 4.0 * se, "{kind}, d = {d}: {mean} vs mcse {se}");
        }
    }
}

#[test]
fn tuned_random_walk_hits_quarter_acceptance() {
    let d = 10;
    let model = gaussian_target(d, DVector::zeros(d), DMatrix::identity(d, d)).unwrap();
    let kernel = Kernel::new(KernelKind::Rwm, Preconditioner::identity(d), 1.0, 1, 0.0).unwrap();
    let state = kernel.init(&model, DVector::zeros(d), 3).unwrap();
    let tuned = tune_acceptance(&kernel, &model, state, 0.25, 0.02, DEFAULT_PROBE_LEN).unwrap();
    assert!(tuned.within_tolerance);
    let kernel = kernel.with_step_size(tuned.step_size).unwrap();
    let mut state = tuned.state;
    let n = 20_000;
    let acc = (0..n).filter(|_| kernel.step(&model, &mut state).unwrap().accepted).count();
    let rate = acc as f64 / n as f64;
    assert!((rate - 0.25).abs() <= 0.05, "{rate}");
}

#[test]
fn pretune_recovers_gaussian_location() {
    let d = 3;
    let mean = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, 2.0, 0.3, 0.0, 0.3, 0.5]);
    let model = gaussian_target(d, mean.clone(), cov.clone()).unwrap();
    let res = adaptive_pretune(&model, DVector::zeros(d), 100_000, 4).unwrap();
    // Adaptive Metropolis in d = 3 has integrated autocorrelation well below
    // 50, so the standard error per coordinate is at most √(50 σ²/75 000).
    for i in 0..d {
        let mcse = (50.0 * cov[(i, i)] / 75_000.0).sqrt();
        assert!((res.pre.center()[i] - mean[i]).abs() <= 5.0 * mcse, "coord {i}");
    }
    let rel = (res.pre.sigma() - &cov).amax() / cov.amax();
    assert!(rel < 0.15, "{rel}");
    assert_eq!(model.dim(), res.final_x.len());
}
