use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use reconad::calibration::{calibrate, calibrate_dual};
use reconad::detector::{run_offline, Action, Detector, DetectorConfig, Mode};
use reconad::evaluation::{
    ablate, evaluate, feature_subset, holdout_split, write_ablation_csv, AblationAxis, EvalConfig, EvaluationReport,
    PipelineConfig,
};
use reconad::io::{digest_hex, load_dataset, load_model, read_run, save_model, write_corpus, Dataset, ModelArtifact};
use reconad::models::{ArchitectureSpec, ModelBundle, Variant};
use reconad::preprocessing::TimeSeries;
use reconad::synth::{default_failure_mix, gen_dataset, FailureMix, TaskProfile};
use reconad::training::{train, TrainingData};

mod config;

use config::{merge, ConfigFile};

/// Exit status when `detect` issues a stop.
const EXIT_ANOMALY: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "reconad", version, about = "Reconstruction-based anomaly detection for robot time series")]
struct Cli {
    /// TOML file with one table per subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus (CSV runs plus manifest.json).
    Generate(GenerateArgs),
    /// Train a model on the nominal runs of a corpus.
    Train(TrainArgs),
    /// Derive thresholds from the held-out nominal runs and store them in the model file.
    Calibrate(CalibrateArgs),
    /// Replay a run or stream frames from stdin; exits 2 on a stop.
    Detect(DetectArgs),
    /// Per-class F1, AUROC and latency on the failure runs of a corpus.
    Evaluate(EvaluateArgs),
    /// Sweep one setting and report AUROC per value.
    Ablate(AblateArgs),
    /// Summarize a model file or render an evaluation CSV.
    Report(ReportArgs),
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenerateArgs {
    /// cabling_like, screwing_like or polishing_like.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of nominal runs.
    #[arg(long)]
    nominal: Option<usize>,
    /// Failure runs per class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Multiplies the task duration, for small corpora.
    #[arg(long)]
    duration_scale: Option<f64>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainArgs {
    /// Corpus directory or manifest.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `desk` (reduced budget, default) or `full` (500 epochs, stride 1).
    #[arg(long)]
    preset: Option<String>,
    /// ae, vae or vae_cnn.
    #[arg(long)]
    variant: Option<String>,
    /// Window length in samples.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Step between training windows.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    kl_weight: Option<f64>,
    #[arg(long)]
    latent: Option<usize>,
    /// Comma-separated hidden widths, e.g. 30,30,30.
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Share of nominal runs held out for calibration.
    #[arg(long)]
    holdout: Option<f64>,
    /// Channel subset name (all, wrench, joints, pose, wrench_pose) or comma-separated channel names.
    #[arg(long)]
    features: Option<String>,
    /// Write per-epoch losses here.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CalibrateArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output model file; defaults to overwriting --model.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative margin added to every threshold.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Corpus of unfinished executions; enables completion thresholds.
    #[arg(long)]
    rough: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DetectArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Replay a recorded CSV run.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Read frames from stdin, one comma-separated row per line.
    #[arg(long)]
    stream: bool,
    /// failure or completion.
    #[arg(long)]
    mode: Option<String>,
    /// Consecutive anomalous verdicts before a stop.
    #[arg(long)]
    debounce: Option<usize>,
    /// Write the replay report as JSON (with --run).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvaluateArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Step between scored windows.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    debounce: Option<usize>,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AblateArgs {
    /// variant, window, features or fraction.
    #[arg(long)]
    axis: Option<String>,
    /// Comma-separated values; each axis has defaults.
    #[arg(long)]
    values: Option<String>,
    /// Step between scored windows.
    #[arg(long)]
    eval_stride: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training options, also read from the [train] table.
    #[command(flatten)]
    #[serde(skip)]
    train: TrainArgs,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ReportArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Evaluation CSV to render as a percentage table.
    #[arg(long)]
    eval: Option<PathBuf>,
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| anyhow!("missing required option --{flag}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Generate(a) => generate(merge!(a, file.section::<GenerateArgs>("generate")?;
            profile, seed, out, nominal, per_class, duration_scale)),
        Command::Train(a) => train_cmd(merge_train(a, &file)?),
        Command::Calibrate(a) => calibrate_cmd(merge!(a, file.section::<CalibrateArgs>("calibrate")?;
            model, data, out, tolerance, rough)),
        Command::Detect(a) => {
            let f = file.section::<DetectArgs>("detect")?;
            let stream = a.stream || f.stream;
            let mut merged = merge!(a, f; model, run, mode, debounce, report);
            merged.stream = stream;
            detect_cmd(merged)
        }
        Command::Evaluate(a) => evaluate_cmd(merge!(a, file.section::<EvaluateArgs>("evaluate")?;
            model, data, stride, debounce, out)),
        Command::Ablate(mut a) => {
            a.train = merge_train(std::mem::take(&mut a.train), &file)?;
            ablate_cmd(merge!(a, file.section::<AblateArgs>("ablate")?; axis, values, eval_stride, out))
        }
        Command::Report(a) => report_cmd(merge!(a, file.section::<ReportArgs>("report")?; model, eval)),
    }
}

fn merge_train(a: TrainArgs, file: &ConfigFile) -> Result<TrainArgs> {
    Ok(merge!(a, file.section::<TrainArgs>("train")?;
        data, out, preset, variant, window, epochs, batch_size, stride, learning_rate,
        kl_weight, latent, hidden, seed, holdout, features, loss_csv))
}

fn generate(a: GenerateArgs) -> Result<ExitCode> {
    let out = required(a.out, "out")?;
    let name = a.profile.unwrap_or_else(|| "cabling_like".into());
    let mut profile = TaskProfile::by_name(&name)?;
    if let Some(s) = a.duration_scale {
        profile = profile.scaled_duration(s);
    }
    let mut mix = default_failure_mix(&profile.name)?;
    if let Some(n) = a.per_class {
        mix = mix.into_iter().map(|m| FailureMix { count: n, ..m }).collect();
    }
    let corpus = gen_dataset(&profile, a.nominal.unwrap_or(20), &mix, a.seed.unwrap_or(0))?;
    let manifest = write_corpus(&corpus, &out)?;
    println!(
        "wrote {} runs ({} nominal, {} failure) to {}",
        manifest.runs.len(),
        corpus.nominal.len(),
        corpus.failures.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Training settings after applying the preset and explicit flags.
fn pipeline_config(a: &TrainArgs) -> Result<PipelineConfig> {
    let mut cfg = match a.preset.as_deref().unwrap_or("desk") {
        "desk" => PipelineConfig::desk_scale(),
        "full" => PipelineConfig::default(),
        other => bail!("unknown preset '{other}' (desk, full)"),
    };
    if let Some(v) = &a.variant {
        cfg.variant = v.parse::<Variant>()?;
    }
    let t = &mut cfg.train;
    t.window_len = a.window.unwrap_or(t.window_len);
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.stride = a.stride.unwrap_or(t.stride);
    t.learning_rate = a.learning_rate.unwrap_or(t.learning_rate);
    t.kl_weight = a.kl_weight.unwrap_or(t.kl_weight);
    t.seed = a.seed.unwrap_or(t.seed);
    cfg.latent_dim = a.latent.unwrap_or(cfg.latent_dim);
    if let Some(h) = &a.hidden {
        cfg.hidden_widths = h
            .split(',')
            .map(|w| w.trim().parse::<usize>().with_context(|| format!("bad hidden width '{w}'")))
            .collect::<Result<_>>()?;
    }
    cfg.holdout_fraction = a.holdout.unwrap_or(cfg.holdout_fraction);
    Ok(cfg)
}

fn resolve_features(spec: &Option<String>, sample: &TimeSeries) -> Result<Option<Vec<String>>> {
    let Some(spec) = spec else { return Ok(None) };
    if spec.contains(',') || sample.channel_index(spec).is_some() {
        return Ok(Some(spec.split(',').map(|s| s.trim().to_string()).collect()));
    }
    Ok(Some(feature_subset(spec, sample)?))
}

fn select(series: &TimeSeries, names: &[String]) -> Result<TimeSeries> {
    if series.channel_names() == names {
        return Ok(series.clone());
    }
    Ok(series.select(names)?)
}

fn nominal_split(ds: &Dataset, fraction: f64) -> Result<(Vec<&reconad::io::LoadedRun>, Vec<&reconad::io::LoadedRun>)> {
    let runs: Vec<&reconad::io::LoadedRun> = ds.nominal.iter().collect();
    let (train, hold) = holdout_split(&runs, fraction)?;
    Ok((train.to_vec(), hold.to_vec()))
}

fn train_cmd(a: TrainArgs) -> Result<ExitCode> {
    let data_path = required(a.data.clone(), "data")?;
    let out = required(a.out.clone(), "out")?;
    let cfg = pipeline_config(&a)?;
    let ds = load_dataset(&data_path)?;
    let (train_runs, hold_runs) = nominal_split(&ds, cfg.holdout_fraction)?;
    let features = resolve_features(&a.features, &train_runs[0].series)?;
    let series: Vec<TimeSeries> = train_runs
        .iter()
        .map(|r| match &features {
            Some(f) => select(&r.series, f),
            None => Ok(r.series.clone()),
        })
        .collect::<Result<_>>()?;
    let data = TrainingData::from_series(&series, cfg.train.window_len, cfg.train.stride)?;
    let spec: ArchitectureSpec = cfg.architecture(data.channels.len());
    log::info!(
        "training {} on {} windows from {} runs",
        spec.variant,
        data.windows.len(),
        series.len()
    );
    let (mut bundle, record) = train(&spec, &cfg.train, &data)?;
    bundle.meta.train_runs = train_runs.iter().map(|r| r.entry.name.clone()).collect();
    bundle.meta.holdout_runs = hold_runs.iter().map(|r| r.entry.name.clone()).collect();
    bundle.meta.corpus_digest = ds.digest.clone();
    let cfg_json = serde_json::to_vec(&(&spec, &cfg.train)).context("serializing config")?;
    bundle.meta.config_digest = digest_hex(&cfg_json);
    if let Some(p) = &a.loss_csv {
        let f = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        record.write_csv(BufWriter::new(f))?;
    }
    save_model(&ModelArtifact { bundle, profile: None }, &out)?;
    println!(
        "trained {} for {} epochs, final loss {:.4}, wrote {}",
        spec.variant,
        cfg.train.epochs,
        record.final_loss().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn model_series(bundle: &ModelBundle, runs: &[&TimeSeries]) -> Result<Vec<TimeSeries>> {
    let names = bundle.channel_names();
    runs.iter().map(|s| select(s, &names)).collect()
}

fn calibrate_cmd(a: CalibrateArgs) -> Result<ExitCode> {
    let model_path = required(a.model, "model")?;
    let ds = load_dataset(&required(a.data, "data")?)?;
    let mut artifact = load_model(&model_path)?;
    let bundle = &artifact.bundle;
    if !bundle.meta.corpus_digest.is_empty() && bundle.meta.corpus_digest != ds.digest {
        log::warn!("corpus differs from the one the model was trained on");
    }
    let holdout: Vec<&TimeSeries> = if bundle.meta.holdout_runs.is_empty() {
        bail!("model records no held-out runs; train it with `reconad train`");
    } else {
        bundle
            .meta
            .holdout_runs
            .iter()
            .map(|name| {
                ds.nominal
                    .iter()
                    .find(|r| &r.entry.name == name)
                    .map(|r| &r.series)
                    .ok_or_else(|| anyhow!("held-out run '{name}' is not in the corpus"))
            })
            .collect::<Result<_>>()?
    };
    let holdout = model_series(bundle, &holdout)?;
    let tol = a.tolerance.unwrap_or(0.0);
    let profile = match &a.rough {
        Some(rough) => {
            let rough_ds = load_dataset(rough)?;
            let runs: Vec<&TimeSeries> = rough_ds.nominal.iter().map(|r| &r.series).collect();
            calibrate_dual(bundle, &model_series(bundle, &runs)?, &holdout, tol)?
        }
        None => calibrate(bundle, &holdout, tol)?,
    };
    println!(
        "calibrated on {} windows; overall threshold {:.6}",
        profile.calibration_windows,
        profile.aggregate.unwrap_or(f64::NAN)
    );
    artifact.profile = Some(profile);
    save_model(&artifact, a.out.as_deref().unwrap_or(&model_path))?;
    Ok(ExitCode::SUCCESS)
}

fn calibrated(path: &Path) -> Result<ModelArtifact> {
    let artifact = load_model(path)?;
    if artifact.profile.is_none() {
        bail!("{} has no thresholds; run `reconad calibrate` first", path.display());
    }
    Ok(artifact)
}

fn detector_config(mode: &Option<String>, debounce: Option<usize>) -> Result<DetectorConfig> {
    Ok(DetectorConfig {
        mode: mode.as_deref().map(str::parse::<Mode>).transpose()?.unwrap_or_default(),
        debounce: debounce.unwrap_or(1),
    })
}

fn detect_cmd(a: DetectArgs) -> Result<ExitCode> {
    let artifact = calibrated(&required(a.model, "model")?)?;
    let profile = artifact.profile.as_ref().expect("checked");
    let bundle = &artifact.bundle;
    let config = detector_config(&a.mode, a.debounce)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match (a.run, a.stream) {
        (Some(path), false) => {
            let series = select(&read_run(&path)?, &bundle.channel_names())?;
            let report = run_offline(bundle, profile, &series, config)?;
            for v in &report.verdicts {
                writeln!(out, "{}", v.to_json_line())?;
            }
            out.flush()?;
            if let Some(p) = &a.report {
                let text = serde_json::to_string_pretty(&report)?;
                std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            }
            match report.stop_index {
                Some(i) => {
                    eprintln!("stop at frame {i}");
                    Ok(ExitCode::from(EXIT_ANOMALY))
                }
                None => Ok(ExitCode::SUCCESS),
            }
        }
        (None, true) => {
            let mut det = Detector::new(bundle, profile, config)?;
            let stop = stream_frames(&mut det, bundle, io::stdin().lock(), &mut out)?;
            out.flush()?;
            Ok(if stop { ExitCode::from(EXIT_ANOMALY) } else { ExitCode::SUCCESS })
        }
        _ => bail!("pass exactly one of --run <file> or --stream"),
    }
}

/// Feeds stdin rows to the detector. A header line (`t,<names>` or just
/// names) maps columns by name; without one, rows hold the model channels in
/// order, optionally preceded by a time column. Returns whether a stop was
/// issued.
fn stream_frames<R: BufRead, W: Write>(det: &mut Detector, bundle: &ModelBundle, input: R, out: &mut W) -> Result<bool> {
    let names = bundle.channel_names();
    let n = names.len();
    let mut columns: Option<Vec<usize>> = None;
    let mut frame = vec![0.0; n];
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && fields.iter().any(|f| f.parse::<f64>().is_err() && !f.eq_ignore_ascii_case("nan")) {
            let idx = names
                .iter()
                .map(|c| {
                    fields
                        .iter()
                        .position(|f| f == c)
                        .ok_or_else(|| anyhow!("stream header has no column '{c}'"))
                })
                .collect::<Result<Vec<_>>>()?;
            columns = Some(idx);
            continue;
        }
        let parse = |f: &str| -> Result<f64> {
            f.parse::<f64>()
                .map_err(|_| anyhow!("line {}: '{f}' is not a number", lineno + 1))
        };
        match &columns {
            Some(idx) => {
                for (slot, &c) in frame.iter_mut().zip(idx) {
                    let f = fields.get(c).ok_or_else(|| anyhow!("line {}: too few fields", lineno + 1))?;
                    *slot = parse(f)?;
                }
            }
            None => {
                let skip = match fields.len() {
                    l if l == n => 0,
                    l if l == n + 1 => 1,
                    l => bail!("line {}: expected {n} values, got {l}", lineno + 1),
                };
                for (slot, f) in frame.iter_mut().zip(&fields[skip..]) {
                    *slot = parse(f)?;
                }
            }
        }
        if let Some(v) = det.push_frame(&frame)? {
            writeln!(out, "{}", v.to_json_line())?;
            if v.action == Action::Stop {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<ExitCode> {
    let artifact = calibrated(&required(a.model, "model")?)?;
    let ds = load_dataset(&required(a.data, "data")?)?;
    let bundle = &artifact.bundle;
    let runs: Vec<&TimeSeries> = ds.failures.iter().map(|r| &r.series).collect();
    if runs.is_empty() {
        bail!("the corpus has no failure runs to evaluate");
    }
    let runs = model_series(bundle, &runs)?;
    let refs: Vec<&TimeSeries> = runs.iter().collect();
    let cfg = EvalConfig {
        stride: a.stride.unwrap_or(1),
        debounce: a.debounce.unwrap_or(1),
    };
    let report = evaluate(bundle, artifact.profile.as_ref().expect("checked"), &refs, &cfg)?;
    log::info!("overall window AUROC {:.4}", report.overall_auroc);
    match &a.out {
        Some(p) => {
            std::fs::write(p, report.to_csv_string()).with_context(|| format!("writing {}", p.display()))?;
            println!("wrote {}", p.display());
        }
        None => print!("{}", report.to_csv_string()),
    }
    Ok(ExitCode::SUCCESS)
}

fn ablate_cmd(a: AblateArgs) -> Result<ExitCode> {
    let axis: AblationAxis = required(a.axis, "axis")?.parse()?;
    let values: Vec<String> = match &a.values {
        Some(v) => v.split(',').map(|s| s.trim().to_string()).collect(),
        None => match axis {
            AblationAxis::Variant => vec!["ae", "vae", "vae_cnn"],
            AblationAxis::Window => vec!["50", "100", "500"],
            AblationAxis::Features => vec!["all", "wrench", "joints", "pose"],
            AblationAxis::Fraction => vec!["0.1", "0.25", "0.5", "0.75", "1.0"],
        }
        .into_iter()
        .map(String::from)
        .collect(),
    };
    let ds = load_dataset(&required(a.train.data.clone(), "data")?)?;
    let mut cfg = pipeline_config(&a.train)?;
    cfg.eval.stride = a.eval_stride.unwrap_or(cfg.eval.stride);
    let nominal: Vec<&TimeSeries> = ds.nominal.iter().map(|r| &r.series).collect();
    let failures: Vec<&TimeSeries> = ds.failures.iter().map(|r| &r.series).collect();
    if let Some(f) = resolve_features(&a.train.features, nominal.first().ok_or_else(|| anyhow!("no nominal runs"))?)? {
        cfg.features = Some(f);
    }
    let rows = ablate(&nominal, &failures, &cfg, axis, &values)?;
    let mut buf = Vec::new();
    write_ablation_csv(&rows, &mut buf)?;
    match &a.out {
        Some(p) => {
            std::fs::write(p, &buf).with_context(|| format!("writing {}", p.display()))?;
            println!("wrote {}", p.display());
        }
        None => io::stdout().write_all(&buf)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn report_cmd(a: ReportArgs) -> Result<ExitCode> {
    if a.model.is_none() && a.eval.is_none() {
        bail!("pass --model and/or --eval");
    }
    if let Some(path) = &a.model {
        let art = load_model(path)?;
        let b = &art.bundle;
        let spec = b.spec();
        println!("model        {}", path.display());
        println!("variant      {}", spec.variant);
        println!("window       {} samples x {} channels", spec.window_len, spec.n_channels);
        println!("hidden       {:?}, latent {}", spec.hidden_widths, spec.latent_dim);
        println!("parameters   {}", b.model.parameter_count());
        println!(
            "training     seed {}, {} epochs, {} windows, final loss {:.4}",
            b.meta.seed, b.meta.epochs, b.meta.train_windows, b.meta.final_loss
        );
        println!("holdout      {}", b.meta.holdout_runs.join(", "));
        match &art.profile {
            Some(p) => {
                println!(
                    "thresholds   tolerance {}, overall {:.6}, {} calibration windows",
                    p.tolerance_factor,
                    p.aggregate.unwrap_or(f64::NAN),
                    p.calibration_windows
                );
                if let (Some(lo), Some(hi)) = (p.lower, p.upper) {
                    println!("completion   lower {lo:.6}, upper {hi:.6}");
                }
                for (c, t) in p.channels.iter().zip(&p.per_feature) {
                    println!("  {c:<8} {t:.6}");
                }
            }
            None => println!("thresholds   not calibrated"),
        }
    }
    if let Some(path) = &a.eval {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        print!("{}", render_eval(&text)?);
    }
    Ok(ExitCode::SUCCESS)
}

/// Renders an evaluation CSV with F1 and AUROC as percentages.
fn render_eval(csv_text: &str) -> Result<String> {
    let mut lines = csv_text.lines();
    let header = lines.next().ok_or_else(|| anyhow!("empty evaluation file"))?;
    if header != EvaluationReport::CSV_HEADER {
        bail!("not an evaluation CSV (unexpected header)");
    }
    let pct = |s: &str| -> Result<String> {
        Ok(format!("{:.0}", 100.0 * s.parse::<f64>().with_context(|| format!("bad number '{s}'"))?))
    };
    let mut out = format!(
        "{:<28} {:>8} {:>8} {:>10} {:>7} {:>12}\n",
        "class", "F1 ours", "F1 max", "F1 global", "AUROC", "latency ms"
    );
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            bail!("malformed evaluation row '{line}'");
        }
        out.push_str(&format!(
            "{:<28} {:>8} {:>8} {:>10} {:>7} {:>12}\n",
            f[0],
            pct(f[4])?,
            pct(f[6])?,
            pct(f[7])?,
            pct(f[8])?,
            if f[9].is_empty() { "-" } else { f[9] }
        ));
    }
    Ok(out)
}
