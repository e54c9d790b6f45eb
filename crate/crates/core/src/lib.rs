//! Streaming wavefront sensing from single-shot digital holography.
//!
//! The crate has two halves that meet at a binary frame stream: a simulator
//! that synthesizes coherent detector frames of a speckled target seen
//! through frozen-flow Kolmogorov turbulence, and a reconstructor that
//! recovers the turbulent phase frame by frame with a warm-started
//! expectation-maximization update cheap enough for real-time use (one
//! adjoint transform plus two transforms per EM pass).
//!
//! Modules are layered bottom-up: [`grid`] and [`fft`] hold the field types
//! and the centered unitary transform, [`forward`] the pupil-plane
//! measurement model, [`turbulence`] and [`scene`] the simulation inputs,
//! [`em`] and [`dynamic`] the reconstruction, [`metrics`] the Strehl-ratio
//! scoring, [`io`] the file formats, and [`config`]/[`pipeline`] the
//! orchestration used by the `dhwfs` binary.

pub mod config;
pub mod dynamic;
pub mod em;
pub mod error;
pub mod fft;
pub mod forward;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod scene;
pub mod turbulence;

pub use error::{Error, Result};
