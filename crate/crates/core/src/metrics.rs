//! Detection metrics: confusion counts, precision/recall/F1, ROC and AUROC,
//! threshold sweeps, data-efficiency curves and latency aggregation.
//!
//! Throughout, a score is predicted positive iff `score > threshold`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::detector::DetectionReport;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Window,
    Run,
}

/// Scores with ground-truth labels (`true` = anomalous).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredSet {
    pub items: Vec<(f64, bool)>,
    pub granularity: Granularity,
}

impl ScoredSet {
    pub fn new(items: Vec<(f64, bool)>, granularity: Granularity) -> Self {
        Self { items, granularity }
    }

    /// One item per run, scored by its largest window score.
    pub fn run_level<'a, I>(runs: I) -> Self
    where
        I: IntoIterator<Item = (&'a [f64], bool)>,
    {
        let items = runs
            .into_iter()
            .map(|(s, label)| (s.iter().copied().fold(f64::NEG_INFINITY, f64::max), label))
            .collect();
        Self::new(items, Granularity::Run)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.items.iter().filter(|i| i.1).count()
    }

    pub fn negatives(&self) -> usize {
        self.items.len() - self.positives()
    }

    pub fn extend(&mut self, other: &ScoredSet) {
        self.items.extend_from_slice(&other.items);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(set: &ScoredSet, threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for &(s, label) in &set.items {
        match (s > threshold, label) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

/// Precision, recall, F1 and FPR. Any 0/0 ratio is reported as 0 and sets
/// `degenerate`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub degenerate: bool,
}

pub fn prf(c: Confusion) -> Prf {
    let mut degenerate = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let fpr = ratio(c.fp, c.fp + c.tn);
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf {
        precision,
        recall,
        f1,
        fpr,
        degenerate,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores strictly above this value are positive at this point.
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auroc: f64,
}

impl RocCurve {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "fpr,tpr,threshold")?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.fpr, p.tpr, p.threshold)?;
        }
        Ok(())
    }
}

fn sorted_desc(set: &ScoredSet) -> Result<Vec<(f64, bool)>> {
    if set.items.iter().any(|i| i.0.is_nan()) {
        return Err(Error::Metric("scores must not be NaN".into()));
    }
    let mut items = set.items.clone();
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(items)
}

/// Sweeps every distinct score; tied scores enter together, so the AUROC is
/// the Mann-Whitney statistic with ties counted one half.
pub fn roc_auroc(set: &ScoredSet) -> Result<RocCurve> {
    let (p, n) = (set.positives(), set.negatives());
    if p == 0 || n == 0 {
        return Err(Error::Metric(format!(
            "ROC needs both classes, got {p} positive and {n} negative"
        )));
    }
    let items = sorted_desc(set)?;
    let (pf, nf) = (p as f64, n as f64);
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: items[0].0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut twice_area = 0.0f64;
    let mut i = 0;
    while i < items.len() {
        let s = items[i].0;
        let (tp0, fp0) = (tp, fp);
        while i < items.len() && items[i].0 == s {
            if items[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += (fp - fp0) as f64 * (tp + tp0) as f64;
        let threshold = items.get(i).map_or(f64::NEG_INFINITY, |x| x.0);
        points.push(RocPoint {
            fpr: fp as f64 / nf,
            tpr: tp as f64 / pf,
            threshold,
        });
    }
    Ok(RocCurve {
        points,
        auroc: twice_area / (2.0 * pf * nf),
    })
}

/// Threshold maximizing F1 over `{−∞} ∪ scores`; among equal F1 values the
/// highest threshold wins.
pub fn best_f1_threshold(set: &ScoredSet) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::Metric("cannot sweep thresholds over an empty set".into()));
    }
    let items = sorted_desc(set)?;
    let p = set.positives();
    let f1_at = |tp: usize, fp: usize| prf(Confusion { tp, fp, tn: 0, fn_: p - tp }).f1;
    let mut best = (items[0].0, f1_at(0, 0));
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < items.len() {
        let s = items[i].0;
        while i < items.len() && items[i].0 == s {
            if items[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let threshold = items.get(i).map_or(f64::NEG_INFINITY, |x| x.0);
        let f1 = f1_at(tp, fp);
        if f1 > best.1 {
            best = (threshold, f1);
        }
    }
    Ok(best)
}

/// AUROC against training-data fraction. `run` trains and evaluates one
/// fraction and returns `None` when the subset is too small to train on;
/// such fractions are skipped.
pub fn data_efficiency<R>(fractions: &[f64], mut run: R) -> Result<Vec<(f64, f64)>>
where
    R: FnMut(f64) -> Result<Option<f64>>,
{
    let mut curve = Vec::new();
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::input(format!("data fraction {f} outside (0, 1]")));
        }
        match run(f)? {
            Some(auroc) => curve.push((f, auroc)),
            None => log::warn!("skipping data fraction {f}: fewer training windows than one batch"),
        }
    }
    Ok(curve)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassLatency {
    pub mean_ms: Option<f64>,
    pub detected: usize,
    pub undetected: usize,
    pub early: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    /// Mean over detected runs; `None` if nothing was detected.
    pub mean_ms: Option<f64>,
    pub detected: usize,
    pub undetected: usize,
    /// Detected runs whose stop preceded the labeled onset.
    pub early: usize,
    pub per_class: BTreeMap<String, ClassLatency>,
}

fn summarize<'a>(reports: impl Iterator<Item = &'a DetectionReport>) -> ClassLatency {
    let mut c = ClassLatency::default();
    let mut sum = 0.0;
    for r in reports {
        match r.latency_s {
            Some(l) => {
                c.detected += 1;
                sum += l * 1000.0;
                c.early += r.early as usize;
            }
            None => c.undetected += 1,
        }
    }
    c.mean_ms = (c.detected > 0).then(|| sum / c.detected as f64);
    c
}

/// Aggregates latencies of labeled reports, keyed by failure class.
pub fn latency_stats(reports: &[(String, DetectionReport)]) -> Result<LatencyStats> {
    let labeled: Vec<&(String, DetectionReport)> = reports.iter().filter(|r| r.1.onset.is_some()).collect();
    if labeled.is_empty() {
        return Err(Error::Metric("latency needs at least one report with a labeled onset".into()));
    }
    let all = summarize(labeled.iter().map(|r| &r.1));
    let mut classes: BTreeMap<String, Vec<&DetectionReport>> = BTreeMap::new();
    for (class, r) in labeled {
        classes.entry(class.clone()).or_default().push(r);
    }
    Ok(LatencyStats {
        mean_ms: all.mean_ms,
        detected: all.detected,
        undetected: all.undetected,
        early: all.early,
        per_class: classes
            .into_iter()
            .map(|(k, v)| (k, summarize(v.into_iter())))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[(f64, bool)]) -> ScoredSet {
        ScoredSet::new(items.to_vec(), Granularity::Window)
    }

    #[test]
    fn confusion_examples() {
        let c = confusion(&set(&[(0.0, true), (0.0, false)]), 1.0);
        assert_eq!((c.tp, c.fp), (0, 0));
        assert_eq!(c.tn + c.fn_, 2);
        let c = confusion(&set(&[(2.0, true), (1.0, false)]), 1.5);
        assert_eq!(c, Confusion { tp: 1, fp: 0, tn: 1, fn_: 0 });
    }

    #[test]
    fn prf_examples() {
        let r = prf(Confusion { tp: 1, fp: 0, tn: 0, fn_: 0 });
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        let r = prf(Confusion { tp: 1, fp: 1, tn: 0, fn_: 1 });
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));
        let r = prf(Confusion { tp: 0, fp: 0, tn: 0, fn_: 5 });
        assert_eq!((r.recall, r.f1), (0.0, 0.0));
        assert!(r.degenerate);
    }

    #[test]
    fn separated_auroc_is_one() {
        let roc = roc_auroc(&set(&[(3.0, true), (2.0, true), (1.0, false), (0.5, false)])).unwrap();
        assert_eq!(roc.auroc, 1.0);
        assert_eq!(roc.points.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(roc.points.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
    }

    #[test]
    fn single_class_is_a_metric_error() {
        assert!(matches!(roc_auroc(&set(&[(1.0, true)])), Err(Error::Metric(_))));
    }

    #[test]
    fn all_ties_give_half() {
        let roc = roc_auroc(&set(&[(1.0, true), (1.0, false), (1.0, true)])).unwrap();
        assert_eq!(roc.auroc, 0.5);
        assert_eq!(roc.points.len(), 2);
    }

    #[test]
    fn best_f1_on_separated_set() {
        let (t, f1) = best_f1_threshold(&set(&[(3.0, true), (2.0, true), (1.0, false)])).unwrap();
        assert_eq!(f1, 1.0);
        assert_eq!(t, 1.0);
    }

    #[test]
    fn best_f1_all_positive_needs_minus_infinity() {
        let (t, f1) = best_f1_threshold(&set(&[(1.0, true), (1.0, true)])).unwrap();
        assert_eq!((t, f1), (f64::NEG_INFINITY, 1.0));
    }

    #[test]
    fn run_level_takes_maximum() {
        let a = [0.1, 0.7, 0.2];
        let b = [0.3];
        let s = ScoredSet::run_level([(&a[..], true), (&b[..], false)]);
        assert_eq!(s.items, vec![(0.7, true), (0.3, false)]);
        assert_eq!(s.granularity, Granularity::Run);
    }

    #[test]
    fn data_efficiency_skips_and_validates() {
        let curve = data_efficiency(&[0.1, 0.5, 1.0], |f| Ok((f > 0.2).then_some(f))).unwrap();
        assert_eq!(curve, vec![(0.5, 0.5), (1.0, 1.0)]);
        assert!(data_efficiency(&[0.0], |_| Ok(Some(1.0))).is_err());
    }
}
