//! Train the variant ladder over a few seeds and print the metric table.

use chgh::config::{ModelConfig, Variant};
use chgh::corpus::BuildOptions;
use chgh::report::{table_csv, TableRow};
use chgh::synth::{generate_market, MarketSpec};
use chgh::train::{run_ablation, temporal_train_end, Dataset};

fn main() -> chgh::Result<()> {
    let spec = MarketSpec {
        n_skills: 24,
        n_clusters_true: 4,
        n_steps: 16,
        docs_per_step: 1500,
        ..MarketSpec::default()
    };
    let market = generate_market(&spec, 1)?;
    let opts = BuildOptions {
        min_count: 1,
        train_end: temporal_train_end(spec.n_steps, 5)?,
        ..BuildOptions::default()
    };
    let data = Dataset::from_artifacts(&market.build(&opts)?)?;
    let base = ModelConfig {
        d: 8,
        heads: 2,
        epochs: 15,
        learning_rate: 3e-3,
        ..ModelConfig::default()
    };
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = run_ablation(&base, &data, &Variant::LADDER, &[0, 1], threads)?;
    let rows: Vec<TableRow> = report
        .rows
        .iter()
        .map(|r| TableRow {
            variant: r.variant.to_string(),
            metrics: r.mean,
        })
        .collect();
    print!("{}", table_csv(&rows)?);
    Ok(())
}
