//! Finite-key security analysis for 4-state reference-frame-independent
//! quantum key distribution with weak-coherent decoy states.
//!
//! The pipeline runs bottom-up:
//!
//! 1. [`channel`] or [`simulate`] produce [`ObservedTallies`], the only input
//!    the estimators see;
//! 2. [`decoy`] bounds vacuum and single-photon contributions;
//! 3. [`security`] turns single-photon error rates into the rotation-invariant
//!    statistic `C44` and a bound on Eve's information;
//! 4. [`keyrate`] computes the finite-key length, optionally after grouping
//!    drifting data.
//!
//! ```
//! use rfi_qkd::{analyze, channel::expected_tallies, AnalysisOptions, Setup};
//! let s = Setup::default();
//! let t = expected_tallies(&s.protocol, &s.channel, 200.0);
//! let r = analyze(&t, &s.protocol.intensities, &s.security, &AnalysisOptions::default()).unwrap();
//! assert!(r.key_rate > 1e-6);
//! ```

pub mod baseline;
pub mod channel;
pub mod config;
pub mod decoy;
pub mod error;
pub mod keyrate;
pub mod report;
pub mod security;
pub mod simulate;
pub mod tally;
pub mod tallyfile;
pub mod types;

pub use config::{
    validate_config, ChannelParams, Intensities, IntensityLevel, ProtocolConfig, SecurityParams,
    Setup,
};
pub use error::{Error, Result};
pub use keyrate::{analyze, AnalysisOptions, KeyRateReport};
pub use tally::{CellCount, ObservedTallies};
pub use types::{BasisLabel, CellId, Intensity, StateLabel};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub mod intro {}
    #[doc = include_str!("../../../book/src/channel.md")]
    pub mod channel {}
    #[doc = include_str!("../../../book/src/decoy.md")]
    pub mod decoy {}
    #[doc = include_str!("../../../book/src/channel-quality.md")]
    pub mod channel_quality {}
    #[doc = include_str!("../../../book/src/finite-key.md")]
    pub mod finite_key {}
    #[doc = include_str!("../../../book/src/drift.md")]
    pub mod drift {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
