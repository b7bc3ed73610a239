//! Training-free scene recovery from spatial and frequency priors.
//!
//! The pipeline has three branches that are fused at the end:
//!
//! ```text
//! I ──► spatial::restore ──► J   (transmission from the spectral-direction
//! │                              projection, then scattering-model inversion)
//! ├───► freq::enhance    ──► E   (adaptive radial mask in the Fourier domain)
//! └──────────────┬───────────┘
//!                ▼
//!        fusion::fuse(I, J, E) ──► O   (Lab a/b softmax weights, Haar L fusion,
//!                                        gamma + highlight compression)
//! ```
//!
//! [`oracle`] holds the synthetic degradation model, reference baselines and
//! the corpus statistics used to validate the priors.

pub mod error;
pub mod freq;
pub mod fusion;
pub mod image;
pub mod minimize;
pub mod oracle;
pub mod spatial;

pub use crate::image::{LabImage, PlanarImage, ScalarMap};
pub use error::{Result, SfpError};
