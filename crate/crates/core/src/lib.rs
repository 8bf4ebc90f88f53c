//! Test-time adaptive image denoising.
//!
//! The crate is layered bottom-up:
//!
//! - [`tensor`] and [`nn`]: a small deterministic convolutional network core
//!   with hand-written gradients, losses and Adam.
//! - [`image`], [`noise`], [`resize`], [`patches`], [`imageio`], [`corpus`]:
//!   everything that happens to pixels around the network.
//! - [`adapt`]: supervised pre-training, Reptile meta-training, two-phase
//!   test-time adaptation and the blind-spot baseline.
//! - [`lab`]: Monte-Carlo checks of the estimator statistics behind the
//!   two-phase loss.
//!
//! Data-parallel loops go through [`exec`]. With the `parallel` feature
//! (default) they run on rayon; every reduction keeps a fixed order so the
//! results are bitwise identical either way.

pub mod adapt;
pub mod corpus;
pub mod error;
pub mod exec;
pub mod image;
pub mod imageio;
pub mod lab;
pub mod nn;
pub mod noise;
pub mod patches;
pub mod resize;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use image::ImageBuffer;
pub use nn::{Arch, NetworkParams};
pub use rng::Rng;
pub use tensor::{Shape4, Tensor4};
