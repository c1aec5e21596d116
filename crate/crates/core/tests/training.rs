mod common;

use chgh::config::{ModelConfig, Variant};
use chgh::model::Model;
use chgh::synth::MarketSpec;
use chgh::train::gradcheck::TOLERANCE;
use chgh::train::{check_gradients, evaluate, loss_value, predict, train, Checkpoint, Dataset, Part};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_market() -> MarketSpec {
    MarketSpec {
        n_skills: 12,
        n_clusters_true: 3,
        n_steps: 16,
        docs_per_step: 300,
        seed: 3,
        ..MarketSpec::default()
    }
}

fn data() -> Dataset {
    common::dataset(&small_market(), 5)
}

#[test]
fn same_seed_same_run() {
    let data = data();
    let cfg = ModelConfig {
        epochs: 4,
        ..common::tiny_config()
    };
    let a = train(&cfg, &data).unwrap();
    let b = train(&cfg, &data).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model, b.model);
    let c = train(&ModelConfig { seed: 1, ..cfg }, &data).unwrap();
    assert_ne!(a.model.params, c.model.params);
}

#[test]
fn logged_totals_decompose() {
    let data = data();
    let cfg = ModelConfig {
        epochs: 3,
        lambda1: 0.3,
        lambda2: 0.01,
        batch_windows: 0,
        ..common::tiny_config()
    };
    let ckpt = train(&cfg, &data).unwrap();
    for r in &ckpt.history {
        let l = r.loss;
        let rebuilt = l.main + cfg.lambda1 * l.cluster + cfg.lambda2 * l.l2;
        assert!((l.total - rebuilt).abs() <= 1e-12 * l.total.abs().max(1.0), "{r:?}");
        assert!(l.cluster >= 0.0 && l.cluster <= (ckpt.model.clusters() as f64).ln() + 1e-12);
    }
    let samples = data.samples(&cfg).unwrap();
    let skills: Vec<usize> = (0..data.n_skills()).collect();
    let l = loss_value(&ckpt.model, &samples[0], &data.graphs, &skills).unwrap();
    assert!((l.total - (l.main + cfg.lambda1 * l.cluster + cfg.lambda2 * l.l2)).abs() < 1e-12);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let data = data();
    let ckpt = train(&common::tiny_config(), &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ckpt);
    for part in [Part::Train, Part::Val, Part::Test] {
        assert_eq!(evaluate(&back, &data, part).unwrap(), evaluate(&ckpt, &data, part).unwrap());
    }
    let last = data.n_steps() - 1;
    assert_eq!(
        predict(&back.model, &data, last).unwrap(),
        predict(&ckpt.model, &data, last).unwrap()
    );
}

#[test]
fn saving_over_an_existing_checkpoint_replaces_it() {
    let data = data();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt");
    let first = train(&common::tiny_config(), &data).unwrap();
    first.save(&path).unwrap();
    let second = train(&ModelConfig { seed: 9, ..common::tiny_config() }, &data).unwrap();
    second.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), second);
}

#[test]
fn every_variant_passes_a_small_gradient_check() {
    let market = MarketSpec {
        n_skills: 4,
        n_clusters_true: 2,
        n_steps: 10,
        docs_per_step: 200,
        mean_skills_per_doc: 2.0,
        seed: 5,
        ..MarketSpec::default()
    };
    let data = common::dataset(&market, 5);
    for (i, v) in Variant::LADDER.into_iter().enumerate() {
        let cfg = ModelConfig {
            d: 4,
            heads: 2,
            recurrent_layers: 2,
            clusters: Some(3),
            n_classes: 2,
            lambda1: 0.5,
            lambda2: 0.01,
            variant: v,
            seed: i as u64,
            ..ModelConfig::default()
        };
        let mut model = Model::new(cfg.clone(), 4).unwrap();
        // Move every rectifier input off zero-initialized kinks.
        let mut rng = ChaCha8Rng::seed_from_u64(40 + i as u64);
        for m in model.params.values_mut() {
            m.mapv_inplace(|x| x + rng.random_range(-0.1..0.1));
        }
        let sample = &data.samples(&cfg).unwrap()[0];
        let report = check_gradients(&model, sample, &data.graphs).unwrap();
        report.verify(TOLERANCE).unwrap_or_else(|e| panic!("{v}: {e}"));
    }
}

#[test]
fn early_stopping_records_its_epoch() {
    let data = data();
    let cfg = ModelConfig {
        epochs: 40,
        patience: 2,
        learning_rate: 1e-6,
        ..common::tiny_config()
    };
    let ckpt = train(&cfg, &data).unwrap();
    assert!(ckpt.history.len() <= 40);
    assert!(ckpt.history.iter().any(|r| r.epoch == ckpt.epoch));
}
