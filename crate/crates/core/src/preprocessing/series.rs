use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Semantic kind of a recorded channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Force,
    Torque,
    JointPosition,
    JointVelocity,
    JointTorque,
    Pose,
    Gripper,
    Other,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 8] = [
        ChannelKind::Force,
        ChannelKind::Torque,
        ChannelKind::JointPosition,
        ChannelKind::JointVelocity,
        ChannelKind::JointTorque,
        ChannelKind::Pose,
        ChannelKind::Gripper,
        ChannelKind::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Force => "force",
            ChannelKind::Torque => "torque",
            ChannelKind::JointPosition => "joint_position",
            ChannelKind::JointVelocity => "joint_velocity",
            ChannelKind::JointTorque => "joint_torque",
            ChannelKind::Pose => "pose",
            ChannelKind::Gripper => "gripper",
            ChannelKind::Other => "other",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown channel kind '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub kind: ChannelKind,
    #[serde(default)]
    pub unit: String,
}

impl Channel {
    pub fn new(name: impl Into<String>, kind: ChannelKind, unit: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind,
            unit: unit.into(),
        }
    }
}

/// Failure taxonomy used for generated labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureTag {
    DisturbanceSpike,
    MisalignmentOffset,
    MissingContact,
    WrongPartProfile,
    ObstructedTarget,
    TextureChange,
    DisplacedObject,
}

impl FailureTag {
    pub const ALL: [FailureTag; 7] = [
        FailureTag::DisturbanceSpike,
        FailureTag::MisalignmentOffset,
        FailureTag::MissingContact,
        FailureTag::WrongPartProfile,
        FailureTag::ObstructedTarget,
        FailureTag::TextureChange,
        FailureTag::DisplacedObject,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureTag::DisturbanceSpike => "disturbance_spike",
            FailureTag::MisalignmentOffset => "misalignment_offset",
            FailureTag::MissingContact => "missing_contact",
            FailureTag::WrongPartProfile => "wrong_part_profile",
            FailureTag::ObstructedTarget => "obstructed_target",
            FailureTag::TextureChange => "texture_change",
            FailureTag::DisplacedObject => "displaced_object",
        }
    }
}

impl fmt::Display for FailureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FailureTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FailureTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown failure tag '{s}'")))
    }
}

/// Labeled anomalous interval `[onset, end)`; `end = None` runs to the end of
/// the series.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureLabel {
    pub onset: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<usize>,
    pub tag: FailureTag,
    /// Evaluation group; several classes may share one tag (e.g. a severe and
    /// a subtle offset).
    pub class: String,
}

impl FailureLabel {
    pub fn end_or(&self, len: usize) -> usize {
        self.end.unwrap_or(len).min(len)
    }
}

/// Uniformly sampled multichannel signal, stored row-major `[len × channels]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    sample_rate: f64,
    channels: Vec<Channel>,
    data: Vec<f64>,
    labels: Vec<FailureLabel>,
}

impl TimeSeries {
    pub fn new(sample_rate: f64, channels: Vec<Channel>, data: Vec<f64>, labels: Vec<FailureLabel>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::input(format!("sample rate must be positive, got {sample_rate}")));
        }
        let n = channels.len();
        if n == 0 {
            return Err(Error::input("time series needs at least one channel"));
        }
        for (i, c) in channels.iter().enumerate() {
            if channels[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::input(format!("duplicate channel name '{}'", c.name)));
            }
        }
        if data.is_empty() || data.len() % n != 0 {
            return Err(Error::input(format!(
                "data length {} is not a positive multiple of {n} channels",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite sample at row {}, channel '{}'",
                pos / n,
                channels[pos % n].name
            )));
        }
        let len = data.len() / n;
        for l in &labels {
            if l.onset >= len || l.end.is_some_and(|e| e <= l.onset || e > len) {
                return Err(Error::input(format!(
                    "label interval [{}, {:?}) outside series of length {len}",
                    l.onset, l.end
                )));
            }
        }
        Ok(Self {
            sample_rate,
            channels,
            data,
            labels,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.channels.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.channels.len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn labels(&self) -> &[FailureLabel] {
        &self.labels
    }

    pub fn with_labels(mut self, labels: Vec<FailureLabel>) -> Result<Self> {
        let len = self.len();
        if labels.iter().any(|l| l.onset >= len || l.end.is_some_and(|e| e <= l.onset || e > len)) {
            return Err(Error::input("label outside series"));
        }
        self.labels = labels;
        Ok(self)
    }

    /// True if any labeled interval covers sample `i`.
    pub fn is_anomalous_at(&self, i: usize) -> bool {
        self.labels.iter().any(|l| i >= l.onset && i < l.end_or(self.len()))
    }

    /// True if any labeled interval intersects rows `[first, last]`.
    pub fn is_anomalous_between(&self, first: usize, last: usize) -> bool {
        self.labels.iter().any(|l| l.onset <= last && l.end_or(self.len()) > first)
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    /// New series with only the named channels, in the given order.
    pub fn select(&self, names: &[impl AsRef<str>]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.channel_index(n.as_ref())
                    .ok_or_else(|| Error::input(format!("series has no channel named '{}'", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        let channels = idx.iter().map(|&i| self.channels[i].clone()).collect();
        let mut data = Vec::with_capacity(self.len() * idx.len());
        for r in 0..self.len() {
            let row = self.row(r);
            data.extend(idx.iter().map(|&i| row[i]));
        }
        Self::new(self.sample_rate, channels, data, self.labels.clone())
    }
}
