//! Analog joint source-channel coding (AJSCC) of two biosignals over a
//! simulated FM link.
//!
//! The pipeline runs source generation ([`source`]), the two-dimensional
//! mapping ([`codec`]), complex-baseband FM ([`modem`]), propagation
//! ([`channel`]) and receiver-side evaluation ([`analysis`]). [`harness`]
//! wires them into configurable runs and sweeps, and [`experiments`]
//! holds the canned figure and table reproductions.

// Range checks are written as `!(x > 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod codec;
pub mod error;
pub mod experiments;
pub mod harness;
pub mod modem;
pub mod source;
pub mod trace;

pub use analysis::{KsResult, MsePair, PulseEvent};
pub use channel::{ChannelFamily, ChannelSpec, Csnr, TapProfile};
pub use codec::{AjsccParams, EncodedSample};
pub use error::{Error, Result};
pub use experiments::Experiment;
pub use harness::{Design, RunConfig, RunReport, SourceSpec};
pub use modem::{ModemConfig, Profile};
pub use source::{CytometrySynthSpec, FrontEndSpec, GsrSynthSpec};
pub use trace::SourceTrace;
