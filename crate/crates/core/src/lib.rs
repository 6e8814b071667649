//! Thermal-dissipation sensing: from a sequence of thermal frames of a
//! touched object to the object's material.
//!
//! The pipeline stages are:
//!
//! 1. [`preprocess`]: normalization to 8-bit intensity, rejection of frames
//!    with a jumping background, median denoising.
//! 2. [`fingerprint`]: hot-area trajectory of the fingerprint, as a
//!    fixed-length dissipation vector, and its dissipation time.
//! 3. [`segment`]: several objects in one scene, each with its own vector.
//! 4. [`learn`]: random forest, linear SVM and MLP material classifiers.
//!
//! [`simulate`] renders synthetic captures with closed-form ground truth and
//! [`bench`] times the whole pipeline. Frames are stored in the MTDF
//! container ([`mtdf`]).

pub mod bench;
pub mod dataset;
pub mod error;
pub mod fingerprint;
pub mod frame;
pub mod learn;
pub mod mtdf;
pub mod pipeline;
pub mod preprocess;
pub mod segment;
pub mod simulate;

pub use error::{Error, Result};
pub use frame::{DissipationVector, FrameSequence, GrayFrame, RawFrame};
