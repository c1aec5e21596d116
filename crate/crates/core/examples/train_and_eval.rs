//! Train one model on a synthetic market, evaluate it, and round-trip the
//! checkpoint.

use chgh::config::{ModelConfig, Variant};
use chgh::corpus::BuildOptions;
use chgh::synth::{generate_market, MarketSpec};
use chgh::train::{evaluate, temporal_train_end, train, Checkpoint, Dataset, Part};

fn main() -> chgh::Result<()> {
    let spec = MarketSpec {
        n_skills: 24,
        n_clusters_true: 4,
        n_steps: 16,
        docs_per_step: 1500,
        ..MarketSpec::default()
    };
    let market = generate_market(&spec, 1)?;
    let data = dataset(&market, 5)?;
    let cfg = ModelConfig {
        d: 16,
        epochs: 30,
        learning_rate: 3e-3,
        variant: Variant::Full,
        track_train_metrics: true,
        ..ModelConfig::default()
    };
    let ckpt = train(&cfg, &data)?;
    for r in ckpt.history.iter().step_by(5) {
        println!(
            "epoch {:>3}  loss {:.4}  train J-ACC {:.3}  val J-ACC {:.3}",
            r.epoch,
            r.loss.total,
            r.train.map_or(f64::NAN, |m| m.joint_accuracy),
            r.val.joint_accuracy
        );
    }
    let test = evaluate(&ckpt, &data, Part::Test)?;
    println!(
        "best epoch {} ({:?}); test ACC {:.3} F1 {:.3} AUC {:.3} J-ACC {:.3}",
        ckpt.epoch, ckpt.stop, test.summary.accuracy, test.summary.weighted_f1, test.summary.auc, test.summary.joint_accuracy
    );

    let dir = tempfile::tempdir().map_err(|e| chgh::Error::io(std::env::temp_dir(), e))?;
    ckpt.save(dir.path())?;
    let again = evaluate(&Checkpoint::load(dir.path())?, &data, Part::Test)?;
    println!("reloaded checkpoint reproduces the evaluation: {}", again == test);
    Ok(())
}

/// Index the generated documents directly, skipping the JSONL round trip.
fn dataset(market: &chgh::synth::SyntheticMarket, window: usize) -> chgh::Result<Dataset> {
    let opts = BuildOptions {
        min_count: 1,
        train_end: temporal_train_end(market.spec.n_steps, window)?,
        ..BuildOptions::default()
    };
    Dataset::from_artifacts(&market.build(&opts)?)
}
