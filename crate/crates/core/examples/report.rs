//! Write per-skill trend panels (SVG and PNG) and the metric table for a
//! freshly trained checkpoint.

use chgh::config::ModelConfig;
use chgh::corpus::{write_artifacts, BuildOptions};
use chgh::report::{render_report, ReportRequest};
use chgh::synth::{generate_market, skill_name, MarketSpec};
use chgh::train::{temporal_train_end, train, Dataset};

fn main() -> chgh::Result<()> {
    let spec = MarketSpec {
        n_skills: 16,
        n_clusters_true: 4,
        n_steps: 14,
        docs_per_step: 800,
        ..MarketSpec::default()
    };
    let market = generate_market(&spec, 1)?;
    let opts = BuildOptions {
        min_count: 1,
        train_end: temporal_train_end(spec.n_steps, 5)?,
        ..BuildOptions::default()
    };
    let art = market.build(&opts)?;
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    let tmp = tempfile::tempdir().map_err(|e| chgh::Error::io(std::env::temp_dir(), e))?;
    let root = out.as_deref().unwrap_or(tmp.path());
    let corpus_dir = root.join("corpus");
    write_artifacts(&corpus_dir, &art, opts.n_classes)?;

    let cfg = ModelConfig {
        d: 8,
        heads: 2,
        epochs: 10,
        ..ModelConfig::default()
    };
    let mut ckpt = train(&cfg, &Dataset::from_artifacts(&art)?)?;
    ckpt.data_dir = Some(corpus_dir);
    let ckpt_dir = root.join("ckpt");
    ckpt.save(&ckpt_dir)?;

    for ext in ["svg", "png"] {
        let image = root.join(format!("skills.{ext}"));
        let res = render_report(&ReportRequest {
            checkpoint: ckpt_dir.clone(),
            data: None,
            skills: vec![skill_name(0), skill_name(5), skill_name(9)],
            image: Some(image.clone()),
            table: root.join("metrics.csv"),
            ablation: None,
        })?;
        println!("{} with {} panels", image.display(), res.panels.len());
    }
    print!("{}", std::fs::read_to_string(root.join("metrics.csv")).unwrap_or_default());

    let err = render_report(&ReportRequest {
        checkpoint: ckpt_dir,
        data: None,
        skills: vec!["skill_1000".into()],
        image: Some(root.join("unused.svg")),
        table: root.join("unused.csv"),
        ablation: None,
    })
    .unwrap_err();
    println!("unknown skill: {err}");
    Ok(())
}
