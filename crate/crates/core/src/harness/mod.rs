//! Configuration, seeded experiment execution, multi-chain orchestration and
//! table/trace emission.

mod config;
mod run;
mod trace;

pub use config::{ExperimentConfig, StepSetting, TargetSpec, CONFIG_KEYS};
pub use run::{
    pretune_only, run_experiment, sample_chain, tune_only, ChainReport, ExperimentReport, TuningRecord, TUNE_TOLERANCE,
    WARM_START_ITERS, WORKERS_ENV,
};
pub use trace::{run_limit_check, run_trace, write_limit_csv, write_trace_csv, LimitRow, LIMIT_COLUMNS};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derives the seed of stream `index` from a master seed.
///
/// This is the SplitMix64 output for state `master + (index + 1)·γ`. The
/// finaliser is a bijection of `u64`, so distinct indices below `2⁶⁴` never
/// collide for a fixed master seed.
pub fn seed_split(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream index of the pre-tuning run.
pub(crate) const PRETUNE_STREAM: u64 = 0;

/// Stream index of the step-size tuner for a kernel.
pub(crate) fn tune_stream(kernel_ordinal: usize) -> u64 {
    1 + kernel_ordinal as u64
}

/// Stream index of chain `chain` of a kernel. Chains live above `2³²` so
/// they never meet the tuner streams.
pub(crate) fn chain_stream(kernel_ordinal: usize, chain: usize) -> u64 {
    ((kernel_ordinal as u64 + 1) << 32) + chain as u64
}
