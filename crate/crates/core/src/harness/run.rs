use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, StepSetting};
use super::{chain_stream, seed_split, tune_stream, PRETUNE_STREAM};
use crate::diagnostics::{summarize, write_summaries_csv, ChainRecord, RunSummary};
use crate::error::{Error, Result};
use crate::kernels::{adaptive_pretune, ascend_log_density, tune_acceptance, Kernel, KernelKind, PretuneResult, DEFAULT_PROBE_LEN};
use crate::targets::TargetModel;
use crate::transforms::Preconditioner;

/// Environment variable capping the number of chains run at once.
pub const WORKERS_ENV: &str = "WEAVE_WORKERS";

/// Trial steps of the gradient-ascent warm start that precedes pre-tuning.
pub const WARM_START_ITERS: usize = 2_000;

/// Half-width of the acceptance band the tuner must reach.
pub const TUNE_TOLERANCE: f64 = 0.05;

/// How one kernel's step size was chosen.
#[derive(Clone, Debug, Serialize)]
pub struct TuningRecord {
    pub method: String,
    pub step_size: f64,
    pub steps: usize,
    pub jitter: f64,
    /// `None` when the step size was fixed in the configuration.
    pub target_ar: Option<f64>,
    pub tuned_ar: Option<f64>,
    pub within_tolerance: Option<bool>,
}

/// Per-chain bookkeeping that does not fit the summary table.
#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub method: String,
    pub chain: usize,
    pub seed: u64,
    pub failures: u64,
}

/// Everything an experiment produces. Rows are sorted by method, then chain.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub pretune_ar: f64,
    pub tuning: Vec<TuningRecord>,
    pub chains: Vec<ChainReport>,
    pub rows: Vec<RunSummary>,
}

impl ExperimentReport {
    /// Writes `summary.csv` and `report.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_summaries_csv(fs::File::create(dir.join("summary.csv"))?, &self.rows)?;
        serde_json::to_writer_pretty(fs::File::create(dir.join("report.json"))?, self)?;
        Ok(())
    }
}

/// Runs `iters` transitions from `x0`, keeping everything after `burnin`.
///
/// The wall time covers all `iters` transitions. Returns the record and the
/// number of numerically failed proposals.
pub fn sample_chain<M: TargetModel + ?Sized>(
    kernel: &Kernel,
    model: &M,
    x0: DVector<f64>,
    seed: u64,
    iters: usize,
    burnin: usize,
) -> Result<(ChainRecord, u64)> {
    if burnin >= iters {
        return Err(Error::invalid("burnin", "must be smaller than the number of iterations"));
    }
    let d = x0.len();
    let kept = iters - burnin;
    let mut draws = DMatrix::zeros(kept, d);
    let mut ll = Vec::with_capacity(kept);
    let mut accepted = Vec::with_capacity(kept);
    let start = Instant::now();
    let mut state = kernel.init(model, x0, seed)?;
    for i in 0..iters {
        let out = kernel.step(model, &mut state)?;
        if i >= burnin {
            draws.set_row(i - burnin, &state.x().transpose());
            ll.push(out.log_like_leb);
            accepted.push(out.accepted);
        }
    }
    let wall = start.elapsed().as_secs_f64();
    Ok((ChainRecord::new(draws, ll, accepted, wall)?, state.failures()))
}

fn ordinal(kind: KernelKind) -> usize {
    KernelKind::ALL.iter().position(|&k| k == kind).expect("every kind is listed")
}

fn initial_step(kind: KernelKind, d: usize) -> f64 {
    match kind {
        KernelKind::Rwm => 2.38 * 2.38 / d as f64,
        _ => 0.5,
    }
}

fn prepare(cfg: &ExperimentConfig) -> Result<(Box<dyn TargetModel>, PretuneResult)> {
    cfg.validate()?;
    let model = cfg.target.build(cfg.dataset.as_deref())?;
    let d = model.dim();
    // Compatibility only depends on the target and the reference kind, so any
    // preconditioner will do for the check.
    for &kind in &cfg.kernels {
        Kernel::new(kind, Preconditioner::identity(d), 0.5, 1, 0.0)?.check_model(model.as_ref())?;
    }
    let start = ascend_log_density(model.as_ref(), model.initial_point(), WARM_START_ITERS)?;
    let pretune = adaptive_pretune(
        model.as_ref(),
        start,
        cfg.pretune_iters,
        seed_split(cfg.seed, PRETUNE_STREAM),
    )?;
    Ok((model, pretune))
}

fn tuned_kernel(
    cfg: &ExperimentConfig,
    kind: KernelKind,
    model: &dyn TargetModel,
    pretune: &PretuneResult,
) -> Result<(Kernel, TuningRecord)> {
    let d = model.dim();
    let setting = if kind == KernelKind::Rwm { cfg.s } else { cfg.h };
    let base = Kernel::new(
        kind,
        pretune.pre.clone(),
        match setting {
            StepSetting::Fixed(v) => v,
            StepSetting::Auto => initial_step(kind, d),
        },
        cfg.steps,
        cfg.jitter,
    )?;
    let mut record = TuningRecord {
        method: kind.name().to_string(),
        step_size: base.step_size(),
        steps: cfg.steps,
        jitter: cfg.jitter,
        target_ar: None,
        tuned_ar: None,
        within_tolerance: None,
    };
    if setting == StepSetting::Auto {
        let target = cfg.auto_ar.unwrap_or(kind.default_target_rate());
        let state = base.init(model, pretune.final_x.clone(), seed_split(cfg.seed, tune_stream(ordinal(kind))))?;
        let probe = (cfg.iters / 5).clamp(500, DEFAULT_PROBE_LEN);
        let tuned = tune_acceptance(&base, model, state, target, TUNE_TOLERANCE, probe)?;
        record.step_size = tuned.step_size;
        record.target_ar = Some(target);
        record.tuned_ar = Some(tuned.rate);
        record.within_tolerance = Some(tuned.within_tolerance);
        return Ok((base.with_step_size(tuned.step_size)?, record));
    }
    Ok((base, record))
}

fn worker_cap(value: Option<&str>) -> Result<Option<usize>> {
    let Some(v) = value else { return Ok(None) };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(Some(n)),
        _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
    }
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_cap(std::env::var(WORKERS_ENV).ok().as_deref())? {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Pre-tune, tune where requested, run every chain, and summarise.
///
/// Pre-tuning starts from the target's [`TargetModel::initial_point`] after a
/// short gradient-ascent warm start ([`ascend_log_density`]).
///
/// Every chain of every kernel starts at the final pre-tuning state. Seeds
/// depend only on the master seed, the kernel and the chain index, so the
/// non-timing output does not depend on the worker count or on which other
/// kernels are in the run. If `out` is set the report is written there too.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (model, pretune) = prepare(cfg)?;
    let model = model.as_ref();
    let mut kernels = Vec::new();
    let mut tuning = Vec::new();
    for &kind in &cfg.kernels {
        if kernels.iter().any(|k: &Kernel| k.kind() == kind) {
            continue;
        }
        let (kernel, record) = tuned_kernel(cfg, kind, model, &pretune)?;
        kernels.push(kernel);
        tuning.push(record);
    }
    let jobs: Vec<(usize, usize)> = (0..kernels.len())
        .flat_map(|k| (0..cfg.chains).map(move |c| (k, c)))
        .collect();
    let burnin = cfg.burnin();
    let results = worker_pool()?.install(|| {
        jobs.par_iter()
            .map(|&(k, c)| {
                let kernel = &kernels[k];
                let seed = seed_split(cfg.seed, chain_stream(ordinal(kernel.kind()), c));
                let (record, failures) =
                    sample_chain(kernel, model, pretune.final_x.clone(), seed, cfg.iters, burnin)?;
                let row = summarize(&record, kernel.kind().name())?;
                let report = ChainReport {
                    method: kernel.kind().name().to_string(),
                    chain: c,
                    seed,
                    failures,
                };
                Ok((row, report))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut results = results;
    results.sort_by(|a, b| (a.1.method.as_str(), a.1.chain).cmp(&(b.1.method.as_str(), b.1.chain)));
    let (rows, chains) = results.into_iter().unzip();
    let report = ExperimentReport {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        pretune_ar: pretune.acceptance_rate,
        tuning,
        chains,
        rows,
    };
    if let Some(dir) = &cfg.out {
        report.write_to(dir)?;
    }
    Ok(report)
}

/// Pre-tuning alone: the estimated center and scale and the final state.
pub fn pretune_only(cfg: &ExperimentConfig) -> Result<PretuneResult> {
    prepare(cfg).map(|(_, p)| p)
}

/// Pre-tuning followed by step-size selection, without sampling.
pub fn tune_only(cfg: &ExperimentConfig) -> Result<Vec<TuningRecord>> {
    let (model, pretune) = prepare(cfg)?;
    let mut out: Vec<TuningRecord> = Vec::new();
    for &kind in &cfg.kernels {
        if out.iter().all(|r| r.method != kind.name()) {
            out.push(tuned_kernel(cfg, kind, model.as_ref(), &pretune)?.1);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kernel: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::parse(&format!(
            "target = gaussian:d=3\nkernel = {kernel}\niters = 1500\npretune_iters = 2000\nseed = 11"
        ))
        .unwrap();
        cfg.h = StepSetting::Fixed(0.5);
        cfg.s = StepSetting::Fixed(0.8);
        cfg
    }

    #[test]
    fn rows_sorted_and_seeded() {
        let mut cfg = small("wm,pcn,rwm");
        cfg.chains = 2;
        let a = run_experiment(&cfg).unwrap();
        let names: Vec<_> = a.chains.iter().map(|c| (c.method.clone(), c.chain)).collect();
        assert_eq!(
            names,
            [("pcn", 0), ("pcn", 1), ("rwm", 0), ("rwm", 1), ("wm", 0), ("wm", 1)]
                .map(|(m, c)| (m.to_string(), c))
        );
        let b = run_experiment(&cfg).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!((x.essl, x.ess_min, x.msjd, x.ar), (y.essl, y.ess_min, y.msjd, y.ar));
        }
        // A kernel's chains do not depend on the other kernels in the run.
        let alone = run_experiment(&small("wm")).unwrap();
        assert_eq!(alone.rows[0].msjd, a.rows[4].msjd);
    }

    #[test]
    fn haar_kernel_runs_on_posterior() {
        let mut cfg = small("hwm");
        cfg.target = "sv:T=5".parse().unwrap();
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].ar > 0.0);
    }

    #[test]
    fn bad_worker_cap_is_config_error() {
        assert_eq!(worker_cap(None).unwrap(), None);
        assert_eq!(worker_cap(Some(" 3")).unwrap(), Some(3));
        assert!(matches!(worker_cap(Some("0")), Err(Error::Config(_))));
        assert!(matches!(worker_cap(Some("many")), Err(Error::Config(_))));
    }

    #[test]
    fn auto_tuning_is_recorded() {
        let mut cfg = small("pcn");
        cfg.h = StepSetting::Auto;
        let recs = tune_only(&cfg).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].target_ar, Some(0.40));
        assert!(recs[0].tuned_ar.is_some());
    }
}
