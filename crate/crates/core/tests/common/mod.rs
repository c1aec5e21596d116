#![allow(dead_code)]

use chgh::config::ModelConfig;
use chgh::corpus::{BuildOptions, CorpusArtifacts};
use chgh::synth::{generate_market, MarketSpec, SyntheticMarket};
use chgh::train::{temporal_train_end, Dataset};

pub fn market(spec: &MarketSpec) -> SyntheticMarket {
    generate_market(spec, 1).expect("valid market spec")
}

/// Artifacts with every generated skill kept and graphs cut at the
/// temporal training boundary for `window`.
pub fn artifacts(market: &SyntheticMarket, window: usize) -> CorpusArtifacts {
    let opts = BuildOptions {
        min_count: 1,
        train_end: temporal_train_end(market.spec.n_steps, window).expect("enough steps"),
        ..BuildOptions::default()
    };
    market.build(&opts).expect("corpus builds")
}

pub fn dataset(spec: &MarketSpec, window: usize) -> Dataset {
    Dataset::from_artifacts(&artifacts(&market(spec), window)).expect("dataset")
}

/// Generator skill id for each pipeline skill id.
pub fn generator_ids(a: &CorpusArtifacts) -> Vec<usize> {
    a.vocab
        .names()
        .iter()
        .map(|n| n.strip_prefix("skill_").and_then(|s| s.parse().ok()).expect("generated name"))
        .collect()
}

pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        d: 8,
        heads: 2,
        recurrent_layers: 1,
        epochs: 3,
        ..ModelConfig::default()
    }
}
