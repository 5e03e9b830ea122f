//! Affine short-rate models driven by spectrally positive stable noise.
//!
//! See the guide in `book/` for a walk through each module.

pub mod analysis;
pub mod calibration;
pub mod classification;
pub mod error;
pub mod format;
pub mod market_data;
pub mod numerics;
pub mod simulation;
pub mod model;
pub mod stable_noise;
pub mod term_structure;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/pricing.md")]
    mod pricing {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
}
