//! Window scoring and failure-data-free thresholds.
//!
//! The score of a window is its mean absolute reconstruction error, overall
//! and per channel. Thresholds are the largest errors seen on held-out nominal
//! runs, optionally inflated by `1 + tolerance_factor`. A window is anomalous
//! when any channel error strictly exceeds its threshold.

use serde::{Deserialize, Serialize};

use crate::models::ModelBundle;
use crate::nn::Matrix;
use crate::preprocessing::{window_ends, NormalizedSeries, TimeSeries, Window};
use crate::{Error, Result};

/// Rows reconstructed per batch when scoring a whole series.
const SCORE_BATCH: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowError {
    pub mean_abs: f64,
    pub per_feature: Vec<f64>,
}

/// Mean absolute error between a flattened window and its reconstruction,
/// overall and per channel, accumulated in `f64`.
pub fn error_between(x: &[f32], recon: &[f32], n_channels: usize) -> Result<WindowError> {
    if x.len() != recon.len() || n_channels == 0 || x.len() % n_channels != 0 {
        return Err(Error::input("window and reconstruction shapes differ"));
    }
    let rows = x.len() / n_channels;
    let mut per_feature = vec![0.0f64; n_channels];
    for (xr, yr) in x.chunks_exact(n_channels).zip(recon.chunks_exact(n_channels)) {
        for ((acc, &a), &b) in per_feature.iter_mut().zip(xr).zip(yr) {
            *acc += (a as f64 - b as f64).abs();
        }
    }
    let total: f64 = per_feature.iter().sum();
    for v in &mut per_feature {
        *v /= rows as f64;
    }
    Ok(WindowError {
        mean_abs: total / x.len() as f64,
        per_feature,
    })
}

pub fn window_error(m: &ModelBundle, w: &Window) -> Result<WindowError> {
    let recon = m.reconstruct(w)?;
    error_between(&w.values, &recon.values, w.n_channels)
}

/// Errors of every window of a series, in order of `end_indices`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesScores {
    pub end_indices: Vec<usize>,
    pub errors: Vec<WindowError>,
}

impl SeriesScores {
    pub fn mean_abs(&self) -> Vec<f64> {
        self.errors.iter().map(|e| e.mean_abs).collect()
    }
}

/// Scores every window of `series` at the given stride.
pub fn score_series(m: &ModelBundle, series: &TimeSeries, stride: usize) -> Result<SeriesScores> {
    let t = m.window_len();
    let n = m.n_channels();
    let ends = window_ends(series.len(), t, stride)?;
    let norm = NormalizedSeries::new(series, &m.norm)?;
    let mut errors = Vec::with_capacity(ends.len());
    for chunk in ends.chunks(SCORE_BATCH) {
        let mut batch = Matrix::zeros(chunk.len(), t * n);
        for (r, &end) in chunk.iter().enumerate() {
            batch.row_mut(r).copy_from_slice(norm.window(end, t));
        }
        let recon = m.model.reconstruct_batch(&batch)?;
        for r in 0..chunk.len() {
            errors.push(error_between(batch.row(r), recon.row(r), n)?);
        }
    }
    Ok(SeriesScores {
        end_indices: ends,
        errors,
    })
}

/// Outcome of applying a profile to one window error.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub anomalous: bool,
    /// Channels whose error exceeds their threshold.
    pub triggering: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdProfile {
    pub channels: Vec<String>,
    /// Per-channel thresholds, tolerance already applied.
    pub per_feature: Vec<f64>,
    pub tolerance_factor: f64,
    /// Threshold on the overall mean absolute error.
    pub aggregate: Option<f64>,
    /// Completion threshold on the overall error.
    pub lower: Option<f64>,
    /// Over-processing guard on the overall error.
    pub upper: Option<f64>,
    /// Maxima observed on the calibration windows, before tolerance.
    pub observed_per_feature: Vec<f64>,
    pub observed_aggregate: f64,
    pub calibration_windows: usize,
}

impl ThresholdProfile {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite() && v >= 0.0;
        if self.per_feature.len() != self.channels.len() || !self.per_feature.iter().all(|&v| finite(v)) {
            return Err(Error::input("per-feature thresholds must be finite, non-negative, one per channel"));
        }
        if !finite(self.tolerance_factor) {
            return Err(Error::input("tolerance factor must be finite and non-negative"));
        }
        for v in [self.aggregate, self.lower, self.upper].into_iter().flatten() {
            if !finite(v) {
                return Err(Error::input("thresholds must be finite and non-negative"));
            }
        }
        if let (Some(lo), Some(hi)) = (self.lower, self.upper) {
            if lo >= hi {
                return Err(Error::input(format!("lower threshold {lo} must be below upper {hi}")));
            }
        }
        Ok(())
    }

    /// Per-feature OR rule with strict exceedance.
    pub fn classify(&self, e: &WindowError) -> Classification {
        let triggering: Vec<usize> = e
            .per_feature
            .iter()
            .zip(&self.per_feature)
            .enumerate()
            .filter(|(_, (&err, &c))| err > c)
            .map(|(f, _)| f)
            .collect();
        Classification {
            anomalous: !triggering.is_empty(),
            triggering,
        }
    }

    /// Whether the overall error exceeds the aggregate threshold.
    pub fn exceeds_aggregate(&self, e: &WindowError) -> Option<bool> {
        self.aggregate.map(|a| e.mean_abs > a)
    }
}

fn holdout_maxima(m: &ModelBundle, runs: &[TimeSeries]) -> Result<(Vec<f64>, f64, usize, Vec<f64>)> {
    let mut per = vec![0.0f64; m.n_channels()];
    let mut agg = 0.0f64;
    let mut count = 0;
    let mut all = Vec::new();
    for run in runs {
        let scores = score_series(m, run, 1)?;
        for e in &scores.errors {
            for (p, &v) in per.iter_mut().zip(&e.per_feature) {
                *p = p.max(v);
            }
            agg = agg.max(e.mean_abs);
            all.push(e.mean_abs);
        }
        count += scores.errors.len();
    }
    Ok((per, agg, count, all))
}

/// Per-feature and aggregate thresholds from held-out nominal runs.
pub fn calibrate(m: &ModelBundle, holdout: &[TimeSeries], tolerance_factor: f64) -> Result<ThresholdProfile> {
    if holdout.is_empty() {
        return Err(Error::input("calibration needs at least one held-out nominal run"));
    }
    if !(tolerance_factor.is_finite() && tolerance_factor >= 0.0) {
        return Err(Error::input("tolerance factor must be finite and non-negative"));
    }
    let (per, agg, count, _) = holdout_maxima(m, holdout)?;
    let scale = 1.0 + tolerance_factor;
    let profile = ThresholdProfile {
        channels: m.channel_names(),
        per_feature: per.iter().map(|v| v * scale).collect(),
        tolerance_factor,
        aggregate: Some(agg * scale),
        lower: None,
        upper: None,
        observed_per_feature: per,
        observed_aggregate: agg,
        calibration_windows: count,
    };
    profile.validate()?;
    Ok(profile)
}

/// Completion thresholds for a model trained on finished-state data.
///
/// `lower` is the calibrated aggregate threshold on `target` runs. `upper`
/// sits halfway between `lower` and the median error of those `rough` windows
/// that exceed `lower`.
pub fn calibrate_dual(
    m: &ModelBundle,
    rough: &[TimeSeries],
    target: &[TimeSeries],
    tolerance_factor: f64,
) -> Result<ThresholdProfile> {
    if rough.is_empty() || target.is_empty() {
        return Err(Error::input("dual calibration needs rough and target runs"));
    }
    let mut profile = calibrate(m, target, tolerance_factor)?;
    let lower = profile.aggregate.expect("calibrate sets the aggregate");
    let (_, _, _, rough_scores) = holdout_maxima(m, rough)?;
    let mut above: Vec<f64> = rough_scores.into_iter().filter(|&s| s > lower).collect();
    if above.is_empty() {
        return Err(Error::input(
            "no rough-state window exceeds the completion threshold; the model cannot tell the states apart",
        ));
    }
    above.sort_by(f64::total_cmp);
    let median = above[above.len() / 2];
    profile.lower = Some(lower);
    profile.upper = Some(0.5 * (lower + median));
    profile.validate()?;
    Ok(profile)
}
