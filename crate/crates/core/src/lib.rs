//! Semi-supervised iterated learning over seven-segment glyph images.
//!
//! An agent is four chained sigmoid MLPs: an image encoder, a word encoder,
//! a word decoder and an image decoder. Tutors teach naive pupils through a
//! bottleneck of image-signal pairs; unsupervised autoencoder episodes keep
//! the encoder and decoder halves consistent. Over generations the evolved
//! signal code is scored for expressivity, compositionality and stability.
//!
//! Module map:
//! - [`glyphset`] — glyph rasterization, noisy variant images, dataset files
//! - [`net`] — the minimal MLP engine (per-example SGD, chain training)
//! - [`agent`] — the four sub-networks and their training configurations
//! - [`ilm`] — bottleneck sampling and the tutor→pupil generation loop
//! - [`metrics`] — expressivity, stability, compositionality proxy
//! - [`rng`] — splittable deterministic random streams

pub mod agent;
pub mod error;
pub mod glyphset;
pub mod hash;
pub mod ilm;
pub mod metrics;
pub mod net;
pub mod rng;

pub use agent::{Agent, AgentArch, Signal};
pub use error::CoreError;
pub use glyphset::{Dataset, GlyphId, Image, NoiseParams, SegmentLayout};
pub use ilm::{GenerationRecord, SimConfig};
pub use net::{ChainLink, Mlp, TrainConfig};
pub use rng::StreamKey;
