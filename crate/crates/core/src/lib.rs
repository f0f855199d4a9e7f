//! Motion-primitive latent coding.
//!
//! The crate covers the whole pipeline used to study how robot motion
//! primitives can be encoded as low-dimensional latent vectors:
//!
//! - [`trajectory`]: a synthetic planar-arm dataset generator plus the
//!   preprocessing steps (frequency-domain resampling, per-joint
//!   normalization, flattening) and a tiny grayscale renderer for the
//!   sensory channel.
//! - [`projection`]: seeded Gaussian random projections of flattened motor
//!   sequences and Monte-Carlo checks of the inner-product statistics.
//! - [`clustering`]: closed-form low-rank self-expression, affine lifting,
//!   spectral clustering and the metrics used to pick the shrinkage
//!   parameter and score label recovery.
//! - [`mtrnn`]: a multiple-timescale recurrent decoder with multiplicative
//!   top-down connections, parametric-bias latent input and hand-written
//!   backpropagation through time.
//! - [`training`]: latent initialization modes, Adam-driven training
//!   phases and the intra-/inter-primitive experiment drivers.
//! - [`cli`]: the `primcodec` command-line front end.

pub mod cli;
pub mod clustering;
pub mod error;
pub mod mtrnn;
pub mod numeric;
pub mod projection;
pub mod training;
pub mod trajectory;

pub use error::{Error, ErrorClass, Result};
