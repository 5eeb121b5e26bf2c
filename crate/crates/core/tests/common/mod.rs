#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use weave_mcmc::diagnostics::mcse_mean;
use weave_mcmc::kernels::{Kernel, KernelKind};
use weave_mcmc::targets::TargetModel;
use weave_mcmc::transforms::Preconditioner;

/// Adaptive Simpson quadrature of `f` on `[a, b]`, started from `pieces`
/// equal panels so that narrow peaks are not skipped.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let width = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * width;
            let hi = lo + width;
            let (flo, fhi) = (f(lo), f(hi));
            let (m, fm, whole) = simpson(f, lo, flo, hi, fhi);
            recurse(f, lo, flo, hi, fhi, m, fm, whole, tol / pieces as f64, 50)
        })
        .sum()
}

pub fn lag1_asymmetry(draws: &[f64], f: fn(f64) -> f64, g: fn(f64) -> f64) -> (f64, f64) {
    let series: Vec<f64> = draws
        .windows(2)
        .map(|w| f(w[0]) * g(w[1]) - g(w[0]) * f(w[1]))
        .collect();
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    (mean, mcse_mean(&series).unwrap())
}

/// Runs `iters` transitions and returns the visited positions, one row each.
pub fn run_chain<M: TargetModel + ?Sized>(kernel: &Kernel, model: &M, x0: DVector<f64>, iters: usize, seed: u64) -> DMatrix<f64> {
    let d = x0.len();
    let mut state = kernel.init(model, x0, seed).unwrap();
    let mut out = DMatrix::zeros(iters, d);
    for i in 0..iters {
        kernel.step(model, &mut state).unwrap();
        out.set_row(i, &state.x().transpose());
    }
    out
}

/// A reasonable fixed tuning for each kernel on a unit-scale target in `d`
/// dimensions with an exact preconditioner.
pub fn default_kernel(kind: KernelKind, pre: Preconditioner) -> Kernel {
    let d = pre.dim() as f64;
    let (h, steps) = match kind {
        KernelKind::Rwm => (2.38 * 2.38 / d, 1),
        KernelKind::Pcn | KernelKind::Mpcn => (0.6, 1),
        KernelKind::InfHmc | KernelKind::Wm | KernelKind::Hwm => (0.5, 3),
        KernelKind::Hmc | KernelKind::Hug => (0.5, 3),
    };
    Kernel::new(kind, pre, h, steps, 0.0).unwrap()
}
