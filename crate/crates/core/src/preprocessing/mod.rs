//! Normalization and sliding windows.
//!
//! A window ending at row `t` holds rows `[t - T + 1, t]` of the normalized
//! series. Windows are flattened time-major: element `(i, c)` sits at
//! `i * n + c`, which is also the row layout of [`NormalizedSeries`], so a
//! window is a contiguous slice of it.

mod series;

use serde::{Deserialize, Serialize};

pub use series::{Channel, ChannelKind, FailureLabel, FailureTag, TimeSeries};

use crate::{Error, Result};

/// Smallest standard deviation used for scaling; constant channels would
/// otherwise divide by zero.
pub const STD_FLOOR: f64 = 1e-6;

/// Per-channel z-score statistics fitted on nominal training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub channels: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn n_channels(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize_value(&self, c: usize, x: f64) -> f32 {
        ((x - self.mean[c]) / self.std[c]) as f32
    }

    pub fn normalize_into(&self, frame: &[f64], out: &mut [f32]) {
        for (c, (o, &x)) in out.iter_mut().zip(frame).enumerate() {
            *o = self.normalize_value(c, x);
        }
    }

    pub fn denormalize_value(&self, c: usize, z: f64) -> f64 {
        z * self.std[c] + self.mean[c]
    }
}

/// Fits mean and (population) standard deviation per channel over all rows
/// of all training series. Standard deviations are floored at [`STD_FLOOR`].
pub fn fit_norm(train: &[TimeSeries]) -> Result<NormStats> {
    let first = train
        .first()
        .ok_or_else(|| Error::input("normalization needs at least one series"))?;
    let names: Vec<String> = first.channels().iter().map(|c| c.name.clone()).collect();
    for s in &train[1..] {
        if s.channels().iter().map(|c| &c.name).ne(names.iter()) {
            return Err(Error::input("training series disagree on the channel schema"));
        }
    }
    let n = names.len();
    let count: usize = train.iter().map(TimeSeries::len).sum();
    let mut mean = vec![0.0f64; n];
    for s in train {
        for row in s.data().chunks_exact(n) {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let mut var = vec![0.0f64; n];
    for s in train {
        for row in s.data().chunks_exact(n) {
            for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
    }
    let std = var.iter().map(|v| (v / count as f64).sqrt().max(STD_FLOOR)).collect();
    Ok(NormStats {
        channels: names,
        mean,
        std,
    })
}

/// A series after z-scoring, stored as `f32` rows ready for model input.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedSeries {
    n_channels: usize,
    data: Vec<f32>,
}

impl NormalizedSeries {
    pub fn new(series: &TimeSeries, stats: &NormStats) -> Result<Self> {
        check_schema(series, stats)?;
        let n = stats.n_channels();
        let mut data = vec![0.0f32; series.data().len()];
        for (out, row) in data.chunks_exact_mut(n).zip(series.data().chunks_exact(n)) {
            stats.normalize_into(row, out);
        }
        Ok(Self { n_channels: n, data })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n_channels
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flattened window ending at row `end` (inclusive).
    pub fn window(&self, end: usize, window_len: usize) -> &[f32] {
        let n = self.n_channels;
        &self.data[(end + 1 - window_len) * n..(end + 1) * n]
    }
}

fn check_schema(series: &TimeSeries, stats: &NormStats) -> Result<()> {
    if series.channels().iter().map(|c| &c.name).ne(stats.channels.iter()) {
        return Err(Error::input(format!(
            "series channels {:?} do not match the model channels {:?}",
            series.channel_names(),
            stats.channels
        )));
    }
    Ok(())
}

/// End rows of all windows: `T-1, T-1+stride, ...`.
pub fn window_ends(len: usize, window_len: usize, stride: usize) -> Result<Vec<usize>> {
    if window_len == 0 || stride == 0 {
        return Err(Error::input("window length and stride must be positive"));
    }
    if len < window_len {
        return Err(Error::input(format!(
            "series of length {len} is shorter than the window length {window_len}"
        )));
    }
    Ok((window_len - 1..len).step_by(stride).collect())
}

/// `T × n` slice of a normalized series, flattened time-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    /// Index of the newest row covered by the window.
    pub end_index: usize,
    pub window_len: usize,
    pub n_channels: usize,
    pub values: Vec<f32>,
}

impl Window {
    pub fn get(&self, t: usize, c: usize) -> f32 {
        self.values[t * self.n_channels + c]
    }
}

pub fn make_windows(series: &TimeSeries, stats: &NormStats, window_len: usize, stride: usize) -> Result<Vec<Window>> {
    let ends = window_ends(series.len(), window_len, stride)?;
    let norm = NormalizedSeries::new(series, stats)?;
    Ok(ends
        .into_iter()
        .map(|end| Window {
            end_index: end,
            window_len,
            n_channels: norm.n_channels(),
            values: norm.window(end, window_len).to_vec(),
        })
        .collect())
}

pub fn flatten_window(w: &Window) -> Vec<f32> {
    w.values.clone()
}

pub fn unflatten_window(values: Vec<f32>, window_len: usize, n_channels: usize, end_index: usize) -> Result<Window> {
    if values.len() != window_len * n_channels {
        return Err(Error::input(format!(
            "flat window of length {} does not match {window_len} x {n_channels}",
            values.len()
        )));
    }
    Ok(Window {
        end_index,
        window_len,
        n_channels,
        values,
    })
}

/// Lazily materialized training windows over several normalized series.
#[derive(Clone, Debug)]
pub struct WindowSet {
    series: Vec<NormalizedSeries>,
    index: Vec<(u32, u32)>,
    window_len: usize,
    n_channels: usize,
}

impl WindowSet {
    pub fn new(series: &[TimeSeries], stats: &NormStats, window_len: usize, stride: usize) -> Result<Self> {
        let mut normalized = Vec::with_capacity(series.len());
        let mut index = Vec::new();
        for (i, s) in series.iter().enumerate() {
            let ends = window_ends(s.len(), window_len, stride)?;
            index.extend(ends.into_iter().map(|e| (i as u32, e as u32)));
            normalized.push(NormalizedSeries::new(s, stats)?);
        }
        Ok(Self {
            series: normalized,
            index,
            window_len,
            n_channels: stats.n_channels(),
        })
    }

    /// Builds a set from already flattened windows (one per entry).
    pub fn from_windows(windows: &[Vec<f32>], window_len: usize, n_channels: usize) -> Result<Self> {
        let mut series = Vec::with_capacity(windows.len());
        for w in windows {
            if w.len() != window_len * n_channels {
                return Err(Error::input("window does not match the declared shape"));
            }
            series.push(NormalizedSeries {
                n_channels,
                data: w.clone(),
            });
        }
        let index = (0..windows.len()).map(|i| (i as u32, (window_len - 1) as u32)).collect();
        Ok(Self {
            series,
            index,
            window_len,
            n_channels,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn input_dim(&self) -> usize {
        self.window_len * self.n_channels
    }

    pub fn window(&self, i: usize) -> &[f32] {
        let (s, e) = self.index[i];
        self.series[s as usize].window(e as usize, self.window_len)
    }
}
