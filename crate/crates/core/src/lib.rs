//! Emphasis control for a non-autoregressive TTS pipeline by dilating the
//! predicted durations of a flagged word, alongside a mel-domain baseline,
//! an acoustic analysis toolkit and listening-test statistics.

pub mod acoustics;
pub mod analysis;
pub mod corpus;
pub mod duration;
pub mod error;
pub mod evalstats;
pub mod experiment;
pub mod melfile;
pub mod phonology;
pub mod pipeline;
pub mod vocoder;
pub mod wav;

pub use error::{Error, Result};
