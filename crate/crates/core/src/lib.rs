//! Visual-generalization benchmark for pixel-based continuous control.
//!
//! The crate is organized bottom-up:
//!
//! - [`envcore`]: 2D cartpole and two-link reacher dynamics, seeded only by a
//!   dynamics seed.
//! - [`visualgen`]: visual-seed sampling of appearance factors and a
//!   deterministic software rasterizer producing 84×84 frame stacks.
//! - [`augment`]: seedable image augmentations applied consistently across
//!   frame stacks and `(o, o')` pairs, plus batch mixing.
//! - [`nn`] and [`agent`]: a small hand-written network library and pixel SAC
//!   with augmented, mixed batches and an encoder-invariance penalty.
//! - [`evalproto`]: zero-shot generalization measurements.

pub mod agent;
pub mod augment;
pub mod envcore;
pub mod error;
pub mod evalproto;
pub mod nn;
pub mod rng;
pub mod visualgen;

pub use error::{Error, Result};
