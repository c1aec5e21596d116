//! Build shares, gaps and co-occurrence graphs from JSONL corpora and
//! check them against the brute-force oracles.

use chgh::corpus::{build_corpus, load_artifacts, write_artifacts, BuildOptions};
use chgh::synth::{oracle_graph, oracle_shares};
use chgh::synth::{generate_market, write_market, MarketSpec, JOB_DESCRIPTIONS_FILE, WORK_EXPERIENCES_FILE};

fn main() -> chgh::Result<()> {
    let spec = MarketSpec {
        n_skills: 16,
        n_clusters_true: 4,
        n_steps: 10,
        docs_per_step: 200,
        ..MarketSpec::default()
    };
    let market = generate_market(&spec, 1)?;
    let dir = tempfile::tempdir().map_err(|e| chgh::Error::io(std::env::temp_dir(), e))?;
    write_market(dir.path(), &market)?;

    let opts = BuildOptions {
        min_count: 1,
        train_end: 8,
        ..BuildOptions::default()
    };
    let art = build_corpus(
        &dir.path().join(JOB_DESCRIPTIONS_FILE),
        &dir.path().join(WORK_EXPERIENCES_FILE),
        &opts,
    )?;
    println!(
        "{} skills, {} steps, demand graph {} edges, supply graph {} edges",
        art.n_skills(),
        art.n_steps(),
        art.demand_graph.n_edges(),
        art.supply_graph.n_edges()
    );

    // Pipeline ids follow vocabulary order; the generator's follow skill_NNN.
    let docs = market.documents();
    let (d, s) = oracle_shares(&docs, spec.n_skills, spec.n_steps);
    let mut worst: f64 = 0.0;
    for (k, name) in art.vocab.names().iter().enumerate() {
        let g: usize = name["skill_".len()..].parse().expect("generated name");
        for t in 0..spec.n_steps {
            worst = worst.max((art.demand.values[[k, t]] - d[[g, t]]).abs());
            worst = worst.max((art.supply.values[[k, t]] - s[[g, t]]).abs());
        }
    }
    println!("largest share difference from the oracle: {worst}");
    let train_jd: Vec<_> = market.job_descriptions.iter().filter(|d| d.timestep < 8).cloned().collect();
    let og = oracle_graph(&train_jd, spec.n_skills, opts.epsilon);
    println!("oracle demand graph {} edges", og.iter().filter(|&&v| v > 0.0).count());

    let out = dir.path().join("corpus");
    write_artifacts(&out, &art, opts.n_classes)?;
    let back = load_artifacts(&out)?;
    println!("reloaded artifacts identical: {}", back == art);
    Ok(())
}
