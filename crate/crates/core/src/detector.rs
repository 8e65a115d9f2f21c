//! Streaming detection over a rolling window.
//!
//! Frames are normalized into a ring buffer of the last `T` accepted frames.
//! Once warm, every frame yields a [`Verdict`]. In failure mode a stop is
//! issued after `debounce` consecutive anomalous verdicts and then latched. In
//! completion mode the first window whose overall error drops below the lower
//! threshold signals completion; afterwards, errors above the upper threshold
//! issue a stop.
//!
//! Non-finite frames are rejected: they are not buffered, produce an
//! anomalous verdict with no score, and count towards a stop.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::{error_between, ThresholdProfile};
use crate::models::ModelBundle;
use crate::preprocessing::TimeSeries;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    FailureDetection,
    CompletionDetection,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "failure" | "failure_detection" => Ok(Mode::FailureDetection),
            "completion" | "completion_detection" => Ok(Mode::CompletionDetection),
            other => Err(Error::input(format!("unknown detector mode '{other}' (failure, completion)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Continue,
    Stop,
    TaskComplete,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Continue => "continue",
            Action::Stop => "stop",
            Action::TaskComplete => "task_complete",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub mode: Mode,
    /// Consecutive anomalous verdicts required before a stop.
    pub debounce: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            mode: Mode::FailureDetection,
            debounce: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub frame_index: usize,
    pub anomalous: bool,
    /// Overall error of the window; `None` for a rejected frame.
    pub mean_abs: Option<f64>,
    pub per_feature: Vec<f64>,
    pub triggering: Vec<String>,
    pub action: Action,
    #[serde(default)]
    pub rejected: bool,
}

impl Verdict {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("verdicts always serialize")
    }
}

/// Streaming state for one input stream.
#[derive(Clone, Debug)]
pub struct Detector<'a> {
    model: &'a ModelBundle,
    profile: &'a ThresholdProfile,
    config: DetectorConfig,
    ring: Vec<f32>,
    head: usize,
    accepted: usize,
    frames_seen: usize,
    consecutive: usize,
    completed: bool,
    stopped: bool,
    window: Vec<f32>,
    frame: Vec<f32>,
}

impl<'a> Detector<'a> {
    pub fn new(model: &'a ModelBundle, profile: &'a ThresholdProfile, config: DetectorConfig) -> Result<Self> {
        profile.validate()?;
        if profile.channels != model.channel_names() {
            return Err(Error::input("threshold profile and model disagree on channels"));
        }
        if config.debounce == 0 {
            return Err(Error::input("debounce must be at least 1"));
        }
        if config.mode == Mode::CompletionDetection && (profile.lower.is_none() || profile.upper.is_none()) {
            return Err(Error::input("completion mode needs a profile with lower and upper thresholds"));
        }
        let (t, n) = (model.window_len(), model.n_channels());
        Ok(Self {
            model,
            profile,
            config,
            ring: vec![0.0; t * n],
            head: 0,
            accepted: 0,
            frames_seen: 0,
            consecutive: 0,
            completed: false,
            stopped: false,
            window: vec![0.0; t * n],
            frame: vec![0.0; n],
        })
    }

    pub fn config(&self) -> DetectorConfig {
        self.config
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }

    pub fn is_warm(&self) -> bool {
        self.accepted >= self.model.window_len()
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn is_completed(&self) -> bool {
        self.completed
    }

    pub fn reset(&mut self) {
        self.ring.fill(0.0);
        self.head = 0;
        self.accepted = 0;
        self.frames_seen = 0;
        self.consecutive = 0;
        self.completed = false;
        self.stopped = false;
    }

    /// Ingests one raw frame. After a stop the detector ignores input and
    /// returns `None` until [`Detector::reset`].
    pub fn push_frame(&mut self, frame: &[f64]) -> Result<Option<Verdict>> {
        let n = self.model.n_channels();
        if frame.len() != n {
            return Err(Error::input(format!("frame has {} values, expected {n}", frame.len())));
        }
        if self.stopped {
            return Ok(None);
        }
        let index = self.frames_seen;
        self.frames_seen += 1;

        if frame.iter().any(|v| !v.is_finite()) {
            let action = self.register(true);
            return Ok(Some(Verdict {
                frame_index: index,
                anomalous: true,
                mean_abs: None,
                per_feature: Vec::new(),
                triggering: Vec::new(),
                action,
                rejected: true,
            }));
        }

        self.model.norm.normalize_into(frame, &mut self.frame);
        self.ring[self.head * n..(self.head + 1) * n].copy_from_slice(&self.frame);
        let t = self.model.window_len();
        self.head = (self.head + 1) % t;
        self.accepted += 1;
        if self.accepted < t {
            return Ok(None);
        }

        let split = self.head * n;
        let tail = self.ring.len() - split;
        self.window[..tail].copy_from_slice(&self.ring[split..]);
        self.window[tail..].copy_from_slice(&self.ring[..split]);
        let recon = self.model.model.reconstruct_flat(&self.window)?;
        let err = error_between(&self.window, &recon, n)?;

        let verdict = match self.config.mode {
            Mode::FailureDetection => {
                let class = self.profile.classify(&err);
                let action = self.register(class.anomalous);
                Verdict {
                    frame_index: index,
                    anomalous: class.anomalous,
                    mean_abs: Some(err.mean_abs),
                    triggering: class.triggering.iter().map(|&f| self.profile.channels[f].clone()).collect(),
                    per_feature: err.per_feature,
                    action,
                    rejected: false,
                }
            }
            Mode::CompletionDetection => {
                let lower = self.profile.lower.expect("checked in new");
                let upper = self.profile.upper.expect("checked in new");
                let over = err.mean_abs > upper;
                let action = if !self.completed {
                    if err.mean_abs < lower {
                        self.completed = true;
                        Action::TaskComplete
                    } else {
                        Action::Continue
                    }
                } else {
                    self.register(over)
                };
                Verdict {
                    frame_index: index,
                    anomalous: over,
                    mean_abs: Some(err.mean_abs),
                    triggering: Vec::new(),
                    per_feature: err.per_feature,
                    action,
                    rejected: false,
                }
            }
        };
        Ok(Some(verdict))
    }

    /// Updates the debounce counter and latches a stop when it is reached.
    fn register(&mut self, anomalous: bool) -> Action {
        if !anomalous {
            self.consecutive = 0;
            return Action::Continue;
        }
        if self.config.mode == Mode::CompletionDetection && !self.completed {
            // Rejected frames before completion are unsafe to continue on.
            self.stopped = true;
            return Action::Stop;
        }
        self.consecutive += 1;
        if self.consecutive >= self.config.debounce {
            self.stopped = true;
            Action::Stop
        } else {
            Action::Continue
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub sample_rate: f64,
    pub verdicts: Vec<Verdict>,
    /// Frame index of the stop, if one was issued.
    pub stop_index: Option<usize>,
    pub completion_index: Option<usize>,
    pub onset: Option<usize>,
    /// `(stop_index − onset) / sample_rate`; negative when the stop came first.
    pub latency_s: Option<f64>,
    /// The stop preceded the labeled onset.
    pub early: bool,
    pub final_action: Action,
}

impl DetectionReport {
    pub fn scores(&self) -> Vec<f64> {
        self.verdicts.iter().filter_map(|v| v.mean_abs).collect()
    }

    pub fn detected(&self) -> bool {
        self.stop_index.is_some()
    }
}

/// Signed detection latency in seconds.
pub fn latency_seconds(stop_index: usize, onset: usize, sample_rate: f64) -> f64 {
    (stop_index as f64 - onset as f64) / sample_rate
}

/// Replays a recorded series through a fresh detector.
pub fn run_offline(
    model: &ModelBundle,
    profile: &ThresholdProfile,
    series: &TimeSeries,
    config: DetectorConfig,
) -> Result<DetectionReport> {
    if series.len() < model.window_len() {
        return Err(Error::input(format!(
            "series of length {} is shorter than the window length {}",
            series.len(),
            model.window_len()
        )));
    }
    if series.channel_names() != model.channel_names() {
        return Err(Error::input("series channels do not match the model"));
    }
    let mut det = Detector::new(model, profile, config)?;
    let mut verdicts = Vec::new();
    for i in 0..series.len() {
        if let Some(v) = det.push_frame(series.row(i))? {
            verdicts.push(v);
        }
        if det.is_stopped() {
            break;
        }
    }
    let stop_index = verdicts.iter().find(|v| v.action == Action::Stop).map(|v| v.frame_index);
    let completion_index = verdicts
        .iter()
        .find(|v| v.action == Action::TaskComplete)
        .map(|v| v.frame_index);
    let onset = series.labels().first().map(|l| l.onset);
    let latency_s = match (stop_index, onset) {
        (Some(s), Some(o)) => Some(latency_seconds(s, o, series.sample_rate())),
        _ => None,
    };
    let final_action = if stop_index.is_some() {
        Action::Stop
    } else if completion_index.is_some() {
        Action::TaskComplete
    } else {
        Action::Continue
    };
    Ok(DetectionReport {
        sample_rate: series.sample_rate(),
        verdicts,
        stop_index,
        completion_index,
        onset,
        latency_s,
        early: matches!((stop_index, onset), (Some(s), Some(o)) if s < o),
        final_action,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_arithmetic() {
        assert_eq!(latency_seconds(190, 100, 500.0), 0.18);
        assert_eq!(latency_seconds(100, 100, 500.0), 0.0);
        assert!(latency_seconds(90, 100, 500.0) < 0.0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("failure".parse::<Mode>().unwrap(), Mode::FailureDetection);
        assert_eq!("completion".parse::<Mode>().unwrap(), Mode::CompletionDetection);
        assert!("other".parse::<Mode>().is_err());
    }

    #[test]
    fn verdict_json_line() {
        let v = Verdict {
            frame_index: 3,
            anomalous: true,
            mean_abs: Some(0.5),
            per_feature: vec![0.5],
            triggering: vec!["fx".into()],
            action: Action::Stop,
            rejected: false,
        };
        let line = v.to_json_line();
        assert!(line.contains("\"action\":\"stop\""));
        assert!(!line.contains('\n'));
        let back: Verdict = serde_json::from_str(&line).unwrap();
        assert_eq!(back, v);
    }
}
