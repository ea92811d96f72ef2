// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ao;
pub mod beamforming;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod learning;
pub mod numerics;
pub mod phase_opt;

pub use error::{Error, Result};

// The guide's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/beamforming.md")]
    mod beamforming {}
    #[doc = include_str!("../../../book/src/phase_opt.md")]
    mod phase_opt {}
    #[doc = include_str!("../../../book/src/ao.md")]
    mod ao {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
