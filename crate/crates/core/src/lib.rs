//! Neural contextual bandits with perturbed-network online regression.
//!
//! The crate is organised bottom-up:
//!
//! - [`net`]: smooth feedforward network, initialization and backpropagation.
//! - [`perturb`]: Rademacher-perturbed predictor and averaged square/KL losses.
//! - [`regression`]: projected online gradient descent and regret accounting.
//! - [`policy`]: inverse-gap-weighting bandit policies built on the regressor.
//! - [`env`]: synthetic and dataset-derived bandit streams.
//! - [`diagnostics`]: NTK spectra, kernel-bandit bound analysis and numerical
//!   checks of the optimization landscape.
//! - [`harness`]: experiment configuration, orchestration and reporting.

pub mod error;
pub mod harness;
pub mod net;
pub mod diagnostics;
pub mod env;
pub mod perturb;
pub mod policy;
pub mod regression;
pub mod rng;

pub use error::{Error, Result};
