//! Semi-supervised anomaly detection for multivariate robot time series.
//!
//! Autoencoder-family models (AE, VAE, VAE-CNN) are trained on nominal task
//! executions only. Per-feature thresholds are calibrated from held-out
//! nominal runs, and a streaming detector scores every incoming frame against
//! them. The crate also ships a synthetic contact-task generator with labeled
//! failure onsets and the evaluation metrics needed to compare thresholds.
//!
//! Pipeline:
//!
//! ```text
//! synth / io ──▶ preprocessing ──▶ training ──▶ calibration ──▶ detector
//!                                     │                            │
//!                                     └──────── metrics ◀──────────┘
//! ```

pub mod calibration;
pub mod detector;
mod error;
pub mod evaluation;
pub mod io;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod preprocessing;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
