//! Max-min energy-efficient beamforming for multicell joint-transmission
//! downlinks.

pub mod algorithms;
pub mod cli;
pub mod conic;
pub mod error;
pub mod model;
pub mod scenario;
pub mod wmmse;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use model::{BeamformerSet, ChannelSet, LinkGains, NetworkConfig, UserMetrics, C64};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/wmmse.md")]
    mod wmmse {}
    #[doc = include_str!("../../../book/src/conic.md")]
    mod conic {}
    #[doc = include_str!("../../../book/src/algorithms.md")]
    mod algorithms {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
