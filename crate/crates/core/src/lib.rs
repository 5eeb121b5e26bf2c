//! Weave-Metropolis and Haar-Weave-Metropolis samplers with the baseline
//! kernels, benchmark posteriors, diagnostics and limit-dynamics checks used
//! to compare them.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod targets;
pub mod transforms;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/command-line.md")]
    struct CommandLine;
    #[doc = include_str!("../../../book/src/transforms.md")]
    struct Transforms;
    #[doc = include_str!("../../../book/src/targets.md")]
    struct Targets;
    #[doc = include_str!("../../../book/src/kernels.md")]
    struct Kernels;
    #[doc = include_str!("../../../book/src/diagnostics.md")]
    struct Diagnostics;
    #[doc = include_str!("../../../book/src/dynamics.md")]
    struct Dynamics;
    #[doc = include_str!("../../../book/src/harness.md")]
    struct Harness;
}
