//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Pass criterion numbers as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- 4 5`.
//! The process exits 0 even when a criterion fails unless
//! `ACCEPTANCE_STRICT=1` is set.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use reconad::calibration::{calibrate, score_series, ThresholdProfile};
use reconad::detector::{run_offline, Detector, DetectorConfig};
use reconad::evaluation::{
    ablate, holdout_split, run_pipeline, AblationAxis, EvaluationReport, PipelineConfig,
};
use reconad::io::{decode_model, encode_model, load_dataset, load_model, save_model, write_corpus, ModelArtifact};
use reconad::metrics::{latency_stats, roc_auroc, Granularity, ScoredSet};
use reconad::models::{ArchitectureSpec, Autoencoder, ModelBundle, TrainingMeta, Variant};
use reconad::preprocessing::{fit_norm, Channel, ChannelKind, FailureLabel, FailureTag, TimeSeries};
use reconad::synth::{default_failure_mix, gen_dataset, gen_nominal, TaskProfile};
use reconad::training::{kl_loss, recon_loss, train, TrainingData};
use reconad_oracle::auroc_pairwise;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_gradients() -> Outcome {
    use common::grad;
    let started = Instant::now();
    let trials = 100;
    let checks: [(&str, grad::Check); 8] = [
        ("dense", grad::dense(trials)),
        ("conv1d", grad::conv1d(trials)),
        ("conv_transpose", grad::conv_transpose(trials)),
        ("selu stack", grad::two_layer_selu(trials)),
        ("recon loss", grad::recon_loss_dense(trials)),
        ("ae loss", grad::model(Variant::Ae, trials)),
        ("vae loss", grad::model(Variant::Vae, trials)),
        ("vae_cnn loss", grad::model(Variant::VaeCnn, trials)),
    ];
    for (name, c) in checks {
        c.map_err(|e| format!("{name}: {e}"))?;
    }
    let took = started.elapsed();
    ensure(took < Duration::from_secs(60), || format!("took {took:?}"))?;
    Ok(format!("8 layer/loss combinations x {trials} instances within 1e-4 in {:.1} s", took.as_secs_f64()))
}

fn c2_loss_identities() -> Outcome {
    let x = [0.3f64, -1.2, 4.0, 0.0];
    ensure(recon_loss(&x, &x).unwrap() == 0.0, || "recon_loss(x, x) != 0".into())?;
    ensure(kl_loss(&[0.0f64], &[0.0]).unwrap() == 0.0, || "kl(0, 0) != 0".into())?;
    let half = kl_loss(&[1.0f64], &[0.0]).unwrap();
    ensure(half == 0.5, || format!("kl([1], [0]) = {half}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut min = f64::INFINITY;
    for _ in 0..10_000 {
        let d = rng.random_range(1..=8);
        let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let lv: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
        let k = kl_loss(&mu, &lv).unwrap();
        ensure(k >= 0.0, || format!("negative KL {k} at mu {mu:?}, log_var {lv:?}"))?;
        min = min.min(k);
    }
    Ok(format!("identities exact; KL >= 0 on 10^4 draws (min {min:.3e})"))
}

fn c3_zero_fpr() -> Outcome {
    let corpus = common::small_corpus(31, 6);
    let mut checked = 0usize;
    for variant in [Variant::Ae, Variant::Vae, Variant::VaeCnn] {
        let mut cfg = common::quick_config();
        cfg.variant = variant;
        let (train_runs, hold) = holdout_split(&corpus.nominal, cfg.holdout_fraction).map_err(|e| e.to_string())?;
        let series: Vec<TimeSeries> = train_runs.iter().map(|r| r.series.clone()).collect();
        let hold: Vec<TimeSeries> = hold.iter().map(|r| r.series.clone()).collect();
        let data = TrainingData::from_series(&series, cfg.train.window_len, cfg.train.stride).unwrap();
        let (bundle, _) = train(&cfg.architecture(data.channels.len()), &cfg.train, &data).unwrap();
        for tol in [0.0, 0.1, 1.0] {
            let profile = calibrate(&bundle, &hold, tol).unwrap();
            for run in &hold {
                let scores = score_series(&bundle, run, 1).unwrap();
                let fp = scores
                    .errors
                    .iter()
                    .filter(|e| profile.classify(e).anomalous || profile.exceeds_aggregate(e) == Some(true))
                    .count();
                ensure(fp == 0, || format!("{variant} tol {tol}: {fp} false positives"))?;
                let r = run_offline(&bundle, &profile, run, DetectorConfig::default()).unwrap();
                ensure(!r.detected(), || format!("{variant} tol {tol}: streaming stop at {:?}", r.stop_index))?;
                checked += scores.errors.len();
            }
        }
    }
    Ok(format!("0 false positives over {checked} holdout windows (3 variants x 3 tolerances)"))
}

struct CablingRun {
    report: EvaluationReport,
    seconds: f64,
}

fn cabling() -> &'static CablingRun {
    static RUN: OnceLock<CablingRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let started = Instant::now();
        let profile = TaskProfile::cabling_like();
        let corpus = gen_dataset(&profile, 20, &default_failure_mix(&profile.name).unwrap(), 7).unwrap();
        let (nominal, failures) = common::split(&corpus);
        let config = PipelineConfig::desk_scale();
        let r = run_pipeline(&nominal, &failures, &config).unwrap();
        CablingRun {
            report: r.report,
            seconds: started.elapsed().as_secs_f64(),
        }
    })
}

fn c4_cabling_auroc() -> Outcome {
    let run = cabling();
    let auroc = |c: &str| run.report.class(c).map(|e| e.auroc).ok_or_else(|| format!("class {c} missing"));
    let summary = run
        .report
        .classes
        .iter()
        .map(|c| format!("{} {:.3}", c.class, c.auroc))
        .collect::<Vec<_>>()
        .join(", ");
    let spike = auroc("disturbance_spike")?;
    let contact = auroc("missing_contact")?;
    let offset = auroc("misalignment_offset")?;
    let subtle = auroc("misalignment_offset_subtle")?;
    ensure(spike >= 0.95, || format!("disturbance_spike AUROC {spike:.4} < 0.95; {summary}"))?;
    ensure(contact >= 0.95, || format!("missing_contact AUROC {contact:.4} < 0.95; {summary}"))?;
    ensure(offset >= 0.90, || format!("misalignment_offset AUROC {offset:.4} < 0.90; {summary}"))?;
    ensure(offset > subtle, || format!("severe {offset:.4} <= subtle {subtle:.4}"))?;
    ensure(run.seconds < 600.0, || format!("took {:.0} s", run.seconds))?;
    Ok(format!("{summary}; {:.0} s end-to-end", run.seconds))
}

fn c5_threshold_ordering() -> Outcome {
    let run = cabling();
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for c in &run.report.classes {
        rows.push(format!(
            "{} ours {:.3} global {:.3} max {:.3}",
            c.class, c.f1_ours, c.f1_global, c.f1_max
        ));
        if c.f1_ours > c.f1_global + 0.02 {
            failures.push(format!("{}: ours {:.3} > global {:.3} + 0.02", c.class, c.f1_ours, c.f1_global));
        }
        if c.f1_global > c.f1_max {
            failures.push(format!("{}: global {:.3} > max {:.3}", c.class, c.f1_global, c.f1_max));
        }
    }
    if failures.is_empty() {
        Ok(rows.join("; "))
    } else {
        Err(format!("{} [{}]", failures.join("; "), rows.join("; ")))
    }
}

fn c6_ablations() -> Outcome {
    let corpus = common::small_corpus(12, 10);
    let (nominal, failures) = common::split(&corpus);
    let mut base = common::quick_config();
    base.train.epochs = 3;
    base.eval.stride = 10;
    let fractions: Vec<String> = ["0.1", "0.25", "0.5", "0.75", "1.0"].iter().map(|s| s.to_string()).collect();
    let curve = ablate(&nominal, &failures, &base, AblationAxis::Fraction, &fractions).map_err(|e| e.to_string())?;
    ensure(curve.len() == fractions.len(), || format!("{} of 5 fractions trained", curve.len()))?;
    let sizes: Vec<String> = ["50", "100", "500"].iter().map(|s| s.to_string()).collect();
    let sweep = ablate(&nominal, &failures, &base, AblationAxis::Window, &sizes).map_err(|e| e.to_string())?;
    ensure(sweep.len() == 3, || "window sweep incomplete".into())?;
    for r in curve.iter().chain(&sweep) {
        ensure((0.0..=1.0).contains(&r.auroc), || format!("{:?} {}: AUROC {}", r.axis, r.value, r.auroc))?;
    }
    let fmt = |rows: &[reconad::evaluation::AblationRow]| {
        rows.iter()
            .map(|r| format!("{}={:.3}", r.value, r.auroc))
            .collect::<Vec<_>>()
            .join(" ")
    };
    Ok(format!("fraction AUROC {}; window AUROC {}", fmt(&curve), fmt(&sweep)))
}

fn bundle_for(series: &[TimeSeries], window_len: usize, seed: u64) -> ModelBundle {
    let norm = fit_norm(series).unwrap();
    let spec = ArchitectureSpec::new(Variant::Vae, window_len, series[0].n_channels());
    let model = Autoencoder::<f32>::build(&spec, seed).unwrap();
    ModelBundle::new(model, series[0].channels().to_vec(), norm, TrainingMeta::default()).unwrap()
}

fn c7_streaming() -> Outcome {
    let profile = TaskProfile::cabling_like().scaled_duration(1.5);
    let run = gen_nominal(&profile, 3).unwrap();
    let simulated = run.len() as f64 / run.sample_rate();
    ensure(simulated >= 60.0, || format!("stream covers only {simulated:.1} s"))?;
    let bundle = bundle_for(std::slice::from_ref(&run), 100, 1);
    let profile = calibrate(&bundle, std::slice::from_ref(&run), 0.0).unwrap();
    let mut det = Detector::new(&bundle, &profile, DetectorConfig::default()).unwrap();
    let started = Instant::now();
    let mut streamed = Vec::with_capacity(run.len());
    for i in 0..run.len() {
        if let Some(v) = det.push_frame(run.row(i)).unwrap() {
            streamed.push(v);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let fps = run.len() as f64 / secs;
    ensure(fps >= 500.0, || format!("{fps:.0} frames/s"))?;
    let offline = run_offline(&bundle, &profile, &run, DetectorConfig::default()).unwrap();
    ensure(offline.verdicts == streamed, || "offline replay differs from the stream".into())?;
    let batch = score_series(&bundle, &run, 1).unwrap();
    let same = batch
        .errors
        .iter()
        .zip(&streamed)
        .all(|(e, v)| v.mean_abs.map(f64::to_bits) == Some(e.mean_abs.to_bits()) && v.per_feature == e.per_feature);
    ensure(same && batch.errors.len() == streamed.len(), || "batch scores differ from the stream".into())?;
    Ok(format!(
        "{fps:.0} frames/s over {simulated:.1} simulated s; {} verdicts identical",
        streamed.len()
    ))
}

fn c8_latency() -> Outcome {
    // Constructed run: a step 90 samples after the labeled onset.
    let rate = 500.0;
    let channels = vec![
        Channel::new("fx", ChannelKind::Force, "N"),
        Channel::new("fz", ChannelKind::Force, "N"),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let len = 2000;
    let data: Vec<f64> = (0..len * 2)
        .map(|k| ((k / 2) as f64 * 0.01).sin() + 0.05 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let nominal = TimeSeries::new(rate, channels.clone(), data.clone(), Vec::new()).unwrap();
    let (onset, delay) = (1200, 90);
    let mut broken = data;
    for v in &mut broken[(onset + delay) * 2..] {
        *v += 50.0;
    }
    let label = FailureLabel {
        onset,
        end: None,
        tag: FailureTag::DisturbanceSpike,
        class: "step".into(),
    };
    let failure = TimeSeries::new(rate, channels, broken, vec![label]).unwrap();
    let bundle = bundle_for(std::slice::from_ref(&nominal), 100, 4);
    let profile = calibrate(&bundle, std::slice::from_ref(&nominal), 0.0).unwrap();
    let report = run_offline(&bundle, &profile, &failure, DetectorConfig::default()).unwrap();
    ensure(report.stop_index == Some(onset + delay), || format!("stop at {:?}", report.stop_index))?;
    let stats = latency_stats(&[("step".to_string(), report)]).unwrap();
    let ms = stats.mean_ms.unwrap();
    ensure(ms == 180.0, || format!("constructed delay reports {ms} ms"))?;

    // Synthetic failure runs: latency is the signed sample difference.
    let corpus = common::small_corpus(13, 3);
    let hold = vec![corpus.nominal[2].series.clone()];
    let bundle = bundle_for(&hold, 100, 5);
    let p: ThresholdProfile = calibrate(&bundle, &hold, 0.0).unwrap();
    let mut checked = 0;
    for run in &corpus.failures {
        let r = run_offline(&bundle, &p, &run.series, DetectorConfig::default()).unwrap();
        if let (Some(s), Some(o), Some(l)) = (r.stop_index, r.onset, r.latency_s) {
            let expected = (s as f64 - o as f64) / 500.0;
            ensure(l == expected, || format!("{}: {l} s vs {expected} s", run.name))?;
            checked += 1;
        }
    }
    ensure(checked > 0, || "no synthetic run was detected".into())?;
    Ok(format!("90-sample delay -> {ms} ms; {checked} synthetic runs match to the sample"))
}

fn c9_determinism() -> Outcome {
    let csv = |dir: &std::path::Path| -> String {
        let corpus = common::small_corpus(14, 5);
        write_corpus(&corpus, dir).unwrap();
        let ds = load_dataset(dir).unwrap();
        let nominal: Vec<&TimeSeries> = ds.nominal.iter().map(|r| &r.series).collect();
        let failures: Vec<&TimeSeries> = ds.failures.iter().map(|r| &r.series).collect();
        run_pipeline(&nominal, &failures, &common::quick_config())
            .unwrap()
            .report
            .to_csv_string()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = csv(a.path());
    ensure(first == csv(b.path()), || "evaluate CSV differs between identical runs".into())?;

    let corpus = common::small_corpus(15, 4);
    let (nominal, failures) = common::split(&corpus);
    let r = run_pipeline(&nominal, &failures, &common::quick_config()).unwrap();
    let artifact = ModelArtifact {
        bundle: r.bundle,
        profile: Some(r.profile),
    };
    let path = a.path().join("model.bin");
    save_model(&artifact, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    let p0 = artifact.profile.as_ref().unwrap();
    let p1 = loaded.profile.as_ref().unwrap();
    for run in corpus.runs() {
        let v0 = run_offline(&artifact.bundle, p0, &run.series, DetectorConfig::default()).unwrap();
        let v1 = run_offline(&loaded.bundle, p1, &run.series, DetectorConfig::default()).unwrap();
        ensure(v0 == v1, || format!("{}: verdicts differ after reload", run.name))?;
    }

    let bytes = encode_model(&artifact);
    let mut flips = 0;
    let positions: Vec<usize> = (0..bytes.len().min(4096)).chain((4096..bytes.len()).step_by(997)).collect();
    for i in positions.into_iter().chain([bytes.len() - 1]) {
        let mut bad = bytes.clone();
        bad[i] ^= 0x20;
        ensure(decode_model(&bad).is_err(), || format!("corruption at byte {i} accepted"))?;
        flips += 1;
    }
    Ok(format!(
        "evaluate CSV identical ({} bytes); reload verdicts identical; {flips} single-byte corruptions rejected",
        first.len()
    ))
}

fn c10_auroc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let n = rng.random_range(2..300);
        let mut items: Vec<(f64, bool)> = (0..n)
            .map(|_| {
                // Every other set uses coarse scores so ties are common.
                let s: f64 = rng.sample(StandardNormal);
                (if k % 2 == 0 { (s * 3.0).round() } else { s }, rng.random_bool(0.4))
            })
            .collect();
        items[0].1 = true;
        items[1].1 = false;
        let trapezoid = roc_auroc(&ScoredSet::new(items.clone(), Granularity::Window)).unwrap().auroc;
        let diff = (trapezoid - auroc_pairwise(&items)).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-9, || format!("set {k}: difference {diff}"))?;
    }
    Ok(format!("200 sets, max difference {worst:.1e}"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "gradient correctness", c1_gradients),
        (2, "loss identities", c2_loss_identities),
        (3, "zero false positives on calibration holdout", c3_zero_fpr),
        (4, "synthetic cabling detection", c4_cabling_auroc),
        (5, "threshold comparison ordering", c5_threshold_ordering),
        (6, "ablation curves", c6_ablations),
        (7, "streaming throughput and equivalence", c7_streaming),
        (8, "latency measurement", c8_latency),
        (9, "determinism and persistence", c9_determinism),
        (10, "AUROC oracle equivalence", c10_auroc_oracle),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                println!("criterion {id:>2} FAIL  {name}: {detail} ({secs:.1} s)");
                failed.push(id);
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed.len());
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
