//! Generate a small planted market and compare its empirical shares with
//! the generator's inclusion probabilities.

use chgh::synth::{generate_market, oracle_shares, write_market, MarketSpec};

fn main() -> chgh::Result<()> {
    let spec = MarketSpec {
        n_skills: 24,
        n_clusters_true: 4,
        n_steps: 12,
        docs_per_step: 2000,
        noise_scale: 0.0,
        ..MarketSpec::default()
    };
    let market = generate_market(&spec, 2)?;
    let docs = market.documents();
    let (demand, supply) = oracle_shares(&docs, spec.n_skills, spec.n_steps);
    let err = |emp: &ndarray::Array2<f64>, truth: &ndarray::Array2<f64>| {
        emp.iter().zip(truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    println!("{} documents, {} clipped probabilities", docs.len(), market.n_clipped);
    println!("max |empirical - expected| demand {:.4}", err(&demand, &market.demand_prob));
    println!("max |empirical - expected| supply {:.4}", err(&supply, &market.supply_prob));

    let dir = tempfile::tempdir().map_err(|e| chgh::Error::io(std::env::temp_dir(), e))?;
    write_market(dir.path(), &market)?;
    for entry in std::fs::read_dir(dir.path()).map_err(|e| chgh::Error::io(dir.path(), e))? {
        let entry = entry.map_err(|e| chgh::Error::io(dir.path(), e))?;
        let len = entry.metadata().map(|m| m.len()).unwrap_or(0);
        println!("  {} ({len} bytes)", entry.file_name().to_string_lossy());
    }
    Ok(())
}
