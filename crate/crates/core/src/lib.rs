//! Entropy-only HEVC front end for compressed-domain face detection.
//!
//! The pipeline stops at the output of the entropy decoder: an Annex-B
//! stream is split into NAL units ([`bitio`]), parameter sets and the slice
//! header are parsed ([`paramsets`]), slice data is CABAC-decoded
//! ([`cabac`]) while walking the full intra syntax ([`syntax`]), and the
//! resulting per-prediction-unit records become a three-channel feature
//! image ([`featimg`]). No dequantization, inverse transform, prediction or
//! reconstruction code exists anywhere in this crate.

pub mod bitio;
pub mod cabac;
pub mod error;
pub mod featimg;
pub mod paramsets;
pub mod syntax;

pub use error::{Error, Result};
pub use featimg::FeatureImage;
pub use syntax::{parse_stream, ParsedPicture, PuRecord};
