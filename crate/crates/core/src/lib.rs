//! Index-modulated, phase-coded FMCW waveforms for secure integrated
//! sensing and communication: synthesis, ambiguity functions, codebook
//! design, propagation and the three receivers.

pub mod ambiguity;
pub mod channel;
pub mod codebook;
pub mod comms_rx;
pub mod dsp;
pub mod error;
pub mod eve_rx;
pub mod radar_rx;
pub mod rng;
pub mod waveform;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/waveform.md")]
    pub mod waveform {}
    #[doc = include_str!("../../../book/src/ambiguity.md")]
    pub mod ambiguity {}
    #[doc = include_str!("../../../book/src/codebook.md")]
    pub mod codebook {}
    #[doc = include_str!("../../../book/src/sensing.md")]
    pub mod sensing {}
    #[doc = include_str!("../../../book/src/communications.md")]
    pub mod communications {}
}
