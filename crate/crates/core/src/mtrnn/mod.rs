//! Multiple-timescale recurrent decoder.
//!
//! Each layer `i` keeps a state `d^(i)` updated once per step, slowest layer
//! first:
//!
//! ```text
//! h = (1 − 1/τ) d + (1/τ) (W d + U u + A(d, u) + b)
//! d ← LN(h)
//! ```
//!
//! where `u` is the freshly updated state of the layer above, or `p(z)` for
//! the top layer, and `A(d, u)_k = Σ_{l,m} A_{klm} d_l u_m`. Initial states
//! are `LN(G p(z) + c)`. Motor and sensory frames are read out of the
//! fastest layer.

mod arch;
mod checkpoint;
mod model;

pub use arch::{Activation, MtrnnArch};
pub use checkpoint::{CHECKPOINT_FORMAT_VERSION, load_latent, load_model, model_from_bytes, model_to_bytes, save_latent, save_model};
pub use model::{
    forward, gradients, init_params, loss, sample_losses, ForwardOutput, GradMode, Gradients, LatentCodes,
    LossWeights, MtrnnModel, LN_EPS,
};
