//! Social gaze analytics for therapy-session video.
//!
//! Turns per-frame mutual-gaze scores for child–trainer pairs into gaze
//! measures (ratio, duration, human-coded ratio), runs the statistical
//! comparisons used to evaluate them, predicts expert social visual behavior
//! scores with a bootstrap-evaluated regression ablation, and provides the
//! supporting pieces: a synthetic session generator with known ground truth
//! and the Gaussian head-map encoding used by the gaze detector.

pub mod error;
pub mod headmap;
pub mod measures;
pub mod model;
pub mod predict;
pub mod report;
pub mod stats;
pub mod synth;

mod io;

pub use error::{Error, Result};
pub use measures::{MeasureConfig, MeasureSet};
pub use model::{Activity, Cohort, Group, SessionRecord};
