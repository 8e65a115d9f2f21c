//! Small corpora and budgets shared by the integration tests.
#![allow(dead_code)]

pub mod grad;

use reconad::evaluation::PipelineConfig;
use reconad::preprocessing::TimeSeries;
use reconad::synth::{default_failure_mix, gen_dataset, Corpus, FailureMix, TaskProfile};
use reconad::training::TrainConfig;

/// Cabling runs at a fifth of their usual length, one failure per class.
pub fn small_corpus(seed: u64, n_nominal: usize) -> Corpus {
    let profile = TaskProfile::cabling_like().scaled_duration(0.2);
    let mix: Vec<FailureMix> = default_failure_mix("cabling_like")
        .unwrap()
        .into_iter()
        .map(|m| FailureMix { count: 1, ..m })
        .collect();
    gen_dataset(&profile, n_nominal, &mix, seed).unwrap()
}

pub fn quick_config() -> PipelineConfig {
    PipelineConfig {
        train: TrainConfig {
            epochs: 4,
            stride: 20,
            seed: 3,
            ..TrainConfig::default()
        },
        ..PipelineConfig::default()
    }
}

pub fn split(corpus: &Corpus) -> (Vec<&TimeSeries>, Vec<&TimeSeries>) {
    (
        corpus.nominal.iter().map(|r| &r.series).collect(),
        corpus.failures.iter().map(|r| &r.series).collect(),
    )
}
