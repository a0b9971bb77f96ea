//! Tattoo retrieval through template reconstruction.
//!
//! The pipeline has four stages:
//!
//! 1. [`synthgen`] blends clean tattoo templates onto skin images to build a
//!    balanced, labelled training set with paired clean-template targets.
//! 2. [`model`] trains a cyclic image-to-template translator together with
//!    two angular-margin embedding backbones, one over the raw image and one
//!    over the reconstructed template.
//! 3. [`retrieval`] enrols concatenated `2K` features and answers ranked
//!    cosine-similarity searches with open-set thresholding.
//! 4. [`evalkit`] measures closed-set (CMC) and open-set (FNIR/FPIR)
//!    identification performance over repeated random splits.

pub mod error;
pub mod evalkit;
pub mod imaging;
pub mod model;
pub mod nn;
pub mod par;
pub mod pipeline;
pub mod retrieval;
pub mod seed;
pub mod synthgen;

pub use error::{Error, Result};
