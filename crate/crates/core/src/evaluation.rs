//! End-to-end evaluation: train on nominal runs, calibrate on held-out
//! nominal runs, score failure runs, and compare thresholds per failure
//! class. Also runs the ablation sweeps.
//!
//! Window labels: a window is positive when it overlaps the labeled failure
//! interval of its run. Each class is evaluated on the windows of its own
//! failure runs, so the negatives are the windows before the onset and after
//! the end of the failure.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, score_series, SeriesScores, ThresholdProfile};
use crate::detector::{run_offline, DetectorConfig};
use crate::metrics::{best_f1_threshold, confusion, latency_stats, prf, roc_auroc, Granularity, ScoredSet};
use crate::models::{ArchitectureSpec, ModelBundle, Variant};
use crate::preprocessing::{ChannelKind, TimeSeries};
use crate::training::{train, TrainConfig, TrainRecord, TrainingData};
use crate::{Error, Result};

/// Splits nominal runs into training and calibration sets; the last
/// `ceil(fraction · n)` runs are held out, keeping at least one on each side.
pub fn holdout_split<T>(nominal: &[T], fraction: f64) -> Result<(&[T], &[T])> {
    if nominal.len() < 2 {
        return Err(Error::input("need at least two nominal runs to hold one out"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::input(format!("holdout fraction {fraction} outside (0, 1)")));
    }
    let k = ((fraction * nominal.len() as f64).ceil() as usize).clamp(1, nominal.len() - 1);
    Ok(nominal.split_at(nominal.len() - k))
}

/// Window-level scored set of one run, labeled by interval overlap.
pub fn labeled_windows(series: &TimeSeries, scores: &SeriesScores, window_len: usize) -> ScoredSet {
    let items = scores
        .end_indices
        .iter()
        .zip(&scores.errors)
        .map(|(&end, e)| (e.mean_abs, series.is_anomalous_between(end + 1 - window_len, end)))
        .collect();
    ScoredSet::new(items, Granularity::Window)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Stride between scored windows.
    pub stride: usize,
    pub debounce: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { stride: 1, debounce: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassEval {
    pub class: String,
    pub runs: usize,
    pub positive_windows: usize,
    pub negative_windows: usize,
    /// F1 at the calibrated aggregate threshold.
    pub f1_ours: f64,
    /// F1 of the per-feature OR rule.
    pub f1_ours_feature: f64,
    /// F1 at the threshold that is best for this class alone.
    pub f1_max: f64,
    /// F1 at the single threshold that is best over all classes.
    pub f1_global: f64,
    pub auroc: f64,
    pub latency_ms: Option<f64>,
    pub detected: usize,
    pub early: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classes: Vec<ClassEval>,
    pub overall_auroc: f64,
    pub threshold_ours: f64,
    pub threshold_global: f64,
}

impl EvaluationReport {
    pub const CSV_HEADER: &'static str = "class,runs,positive_windows,negative_windows,f1_ours,f1_ours_feature,f1_max,f1_global,auroc,latency_ms,detected,early";

    pub fn class(&self, name: &str) -> Option<&ClassEval> {
        self.classes.iter().find(|c| c.class == name)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for c in &self.classes {
            writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}",
                c.class,
                c.runs,
                c.positive_windows,
                c.negative_windows,
                c.f1_ours,
                c.f1_ours_feature,
                c.f1_max,
                c.f1_global,
                c.auroc,
                c.latency_ms.map_or(String::new(), |l| format!("{l:.3}")),
                c.detected,
                c.early
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }
}

fn class_of(series: &TimeSeries) -> Result<String> {
    series
        .labels()
        .first()
        .map(|l| l.class.clone())
        .ok_or_else(|| Error::input("failure run has no label"))
}

/// Scores failure runs and compares thresholds per class.
pub fn evaluate(
    bundle: &ModelBundle,
    profile: &ThresholdProfile,
    failures: &[&TimeSeries],
    config: &EvalConfig,
) -> Result<EvaluationReport> {
    let ours = profile
        .aggregate
        .ok_or_else(|| Error::input("evaluation needs a profile with an aggregate threshold"))?;
    let t = bundle.window_len();
    let mut order: Vec<String> = Vec::new();
    let mut sets: BTreeMap<String, (ScoredSet, usize, usize, usize)> = BTreeMap::new();
    let mut reports = Vec::new();
    for &series in failures {
        let class = class_of(series)?;
        if !order.contains(&class) {
            order.push(class.clone());
        }
        let scores = score_series(bundle, series, config.stride)?;
        let windows = labeled_windows(series, &scores, t);
        let entry = sets.entry(class.clone()).or_default();
        // Per-feature OR rule confusion on the same windows.
        for (e, &(_, label)) in scores.errors.iter().zip(&windows.items) {
            match (profile.classify(e).anomalous, label) {
                (true, true) => entry.1 += 1,
                (true, false) => entry.2 += 1,
                (false, true) => entry.3 += 1,
                (false, false) => {}
            }
        }
        entry.0.extend(&windows);
        let det = DetectorConfig {
            debounce: config.debounce,
            ..DetectorConfig::default()
        };
        reports.push((class, run_offline(bundle, profile, series, det)?));
    }
    if order.is_empty() {
        return Err(Error::input("evaluation needs at least one failure run"));
    }
    let mut union = ScoredSet::default();
    for (set, ..) in sets.values() {
        union.extend(set);
    }
    let (global, _) = best_f1_threshold(&union)?;
    let latency = latency_stats(&reports)?;
    let mut classes = Vec::new();
    for name in order {
        let (set, tp, fp, fn_) = &sets[&name];
        let runs = failures.iter().filter(|s| class_of(s).ok().as_deref() == Some(&name)).count();
        let lat = latency.per_class.get(&name).cloned().unwrap_or_default();
        classes.push(ClassEval {
            class: name.clone(),
            runs,
            positive_windows: set.positives(),
            negative_windows: set.negatives(),
            f1_ours: prf(confusion(set, ours)).f1,
            f1_ours_feature: prf(crate::metrics::Confusion {
                tp: *tp,
                fp: *fp,
                tn: 0,
                fn_: *fn_,
            })
            .f1,
            f1_max: best_f1_threshold(set)?.1,
            f1_global: prf(confusion(set, global)).f1,
            auroc: roc_auroc(set)?.auroc,
            latency_ms: lat.mean_ms,
            detected: lat.detected,
            early: lat.early,
        });
    }
    Ok(EvaluationReport {
        classes,
        overall_auroc: roc_auroc(&union)?.auroc,
        threshold_ours: ours,
        threshold_global: global,
    })
}

/// Everything needed to go from nominal and failure runs to a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub variant: Variant,
    pub train: TrainConfig,
    pub hidden_widths: Vec<usize>,
    pub latent_dim: usize,
    pub holdout_fraction: f64,
    pub tolerance_factor: f64,
    pub eval: EvalConfig,
    /// Channel subset; `None` uses every channel.
    pub features: Option<Vec<String>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Vae,
            train: TrainConfig::default(),
            hidden_widths: vec![30, 30, 30],
            latent_dim: 15,
            holdout_fraction: 0.2,
            tolerance_factor: 0.0,
            eval: EvalConfig::default(),
            features: None,
        }
    }
}

impl PipelineConfig {
    /// Reduced budget for a single CPU core: fewer epochs and a sparser set
    /// of training windows. Architecture and scoring are unchanged.
    pub fn desk_scale() -> Self {
        Self {
            train: TrainConfig {
                epochs: 40,
                stride: 25,
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn architecture(&self, n_channels: usize) -> ArchitectureSpec {
        let mut spec = ArchitectureSpec::new(self.variant, self.train.window_len, n_channels);
        spec.hidden_widths = self.hidden_widths.clone();
        spec.latent_dim = self.latent_dim;
        spec
    }
}

pub struct PipelineResult {
    pub bundle: ModelBundle,
    pub record: TrainRecord,
    pub profile: ThresholdProfile,
    pub report: EvaluationReport,
}

fn select_all(runs: &[&TimeSeries], features: &Option<Vec<String>>) -> Result<Vec<TimeSeries>> {
    runs.iter()
        .map(|s| match features {
            Some(f) => s.select(f),
            None => Ok((*s).clone()),
        })
        .collect()
}

/// Trains on the first `train_runs` nominal runs left after the holdout
/// split (all of them when `None`).
pub fn run_pipeline_subset(
    nominal: &[&TimeSeries],
    failures: &[&TimeSeries],
    config: &PipelineConfig,
    train_runs: Option<usize>,
) -> Result<PipelineResult> {
    let (train_set, holdout) = holdout_split(nominal, config.holdout_fraction)?;
    let k = train_runs.unwrap_or(train_set.len()).clamp(1, train_set.len());
    let train_series = select_all(&train_set[..k], &config.features)?;
    let holdout = select_all(holdout, &config.features)?;
    let failures = select_all(failures, &config.features)?;

    let data = TrainingData::from_series(&train_series, config.train.window_len, config.train.stride)?;
    let spec = config.architecture(data.channels.len());
    let (bundle, record) = train(&spec, &config.train, &data)?;
    let profile = calibrate(&bundle, &holdout, config.tolerance_factor)?;
    let refs: Vec<&TimeSeries> = failures.iter().collect();
    let report = evaluate(&bundle, &profile, &refs, &config.eval)?;
    Ok(PipelineResult {
        bundle,
        record,
        profile,
        report,
    })
}

pub fn run_pipeline(nominal: &[&TimeSeries], failures: &[&TimeSeries], config: &PipelineConfig) -> Result<PipelineResult> {
    run_pipeline_subset(nominal, failures, config, None)
}

/// Named channel subsets for the feature ablation.
pub fn feature_subset(name: &str, series: &TimeSeries) -> Result<Vec<String>> {
    let kinds: &[ChannelKind] = match name {
        "all" => &ChannelKind::ALL,
        "wrench" => &[ChannelKind::Force, ChannelKind::Torque],
        "joints" => &[ChannelKind::JointPosition, ChannelKind::JointVelocity, ChannelKind::JointTorque],
        "pose" => &[ChannelKind::Pose],
        "wrench_pose" => &[ChannelKind::Force, ChannelKind::Torque, ChannelKind::Pose],
        other => {
            return Err(Error::input(format!(
                "unknown feature subset '{other}' (all, wrench, joints, pose, wrench_pose)"
            )))
        }
    };
    let names: Vec<String> = series
        .channels()
        .iter()
        .filter(|c| kinds.contains(&c.kind))
        .map(|c| c.name.clone())
        .collect();
    if names.is_empty() {
        return Err(Error::input(format!("feature subset '{name}' selects no channels")));
    }
    Ok(names)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    Variant,
    Window,
    Features,
    Fraction,
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variant" => Ok(Self::Variant),
            "window" => Ok(Self::Window),
            "features" => Ok(Self::Features),
            "fraction" => Ok(Self::Fraction),
            other => Err(Error::input(format!(
                "unknown ablation axis '{other}' (variant, window, features, fraction)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub axis: AblationAxis,
    pub value: String,
    pub auroc: f64,
    pub f1_ours: f64,
    pub train_windows: usize,
}

pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "axis,value,auroc,f1_ours,train_windows")?;
    for r in rows {
        let axis = serde_json::to_string(&r.axis).expect("serializes");
        writeln!(
            out,
            "{},{},{:.6},{:.6},{}",
            axis.trim_matches('"'),
            r.value,
            r.auroc,
            r.f1_ours,
            r.train_windows
        )?;
    }
    Ok(())
}

fn overall_f1(report: &EvaluationReport) -> f64 {
    let n = report.classes.len() as f64;
    report.classes.iter().map(|c| c.f1_ours).sum::<f64>() / n
}

fn row(axis: AblationAxis, value: String, r: &PipelineResult) -> AblationRow {
    AblationRow {
        axis,
        value,
        auroc: r.report.overall_auroc,
        f1_ours: overall_f1(&r.report),
        train_windows: r.bundle.meta.train_windows,
    }
}

/// Sweeps one axis; every point trains a fresh model with the base seed.
/// `values` are variant names, window lengths, subset names or fractions.
pub fn ablate(
    nominal: &[&TimeSeries],
    failures: &[&TimeSeries],
    base: &PipelineConfig,
    axis: AblationAxis,
    values: &[String],
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    match axis {
        AblationAxis::Fraction => {
            let fractions = values
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| Error::input(format!("'{v}' is not a fraction"))))
                .collect::<Result<Vec<_>>>()?;
            let (train_set, _) = holdout_split(nominal, base.holdout_fraction)?;
            let n = train_set.len();
            let mut last = None;
            let curve = crate::metrics::data_efficiency(&fractions, |f| {
                let k = ((f * n as f64).ceil() as usize).clamp(1, n);
                match run_pipeline_subset(nominal, failures, base, Some(k)) {
                    Ok(r) => {
                        let auroc = r.report.overall_auroc;
                        last = Some(row(AblationAxis::Fraction, format!("{f}"), &r));
                        Ok(Some(auroc))
                    }
                    Err(Error::Input(msg)) if msg.contains("fewer than one batch") => {
                        last = None;
                        Ok(None)
                    }
                    Err(e) => Err(e),
                }
                .inspect(|_| {
                    if let Some(r) = last.take() {
                        rows.push(r);
                    }
                })
            })?;
            debug_assert_eq!(curve.len(), rows.len());
        }
        _ => {
            for v in values {
                let mut cfg = base.clone();
                match axis {
                    AblationAxis::Variant => cfg.variant = v.parse()?,
                    AblationAxis::Window => {
                        cfg.train.window_len = v
                            .parse()
                            .map_err(|_| Error::input(format!("'{v}' is not a window length")))?
                    }
                    AblationAxis::Features => {
                        let first = nominal.first().ok_or_else(|| Error::input("no nominal runs"))?;
                        cfg.features = Some(feature_subset(v, first)?);
                    }
                    AblationAxis::Fraction => unreachable!(),
                }
                let r = run_pipeline(nominal, failures, &cfg)?;
                rows.push(row(axis, v.clone(), &r));
            }
        }
    }
    Ok(rows)
}
