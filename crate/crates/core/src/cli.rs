//! The `chgh` command line.
//!
//! Exit codes: 0 on success, 1 for usage and input errors, 2 for internal
//! failures. Internal failures print an identifier derived from the
//! subcommand and message so repeated reports of one failure can be
//! grouped.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ModelConfig, Variant};
use crate::corpus::{build_corpus, load_artifacts, write_artifacts, BuildOptions};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::model::fnv1a;
use crate::report::{render_report, table_csv, ReportRequest, TableRow};
use crate::synth::{generate_market, write_market, MarketSpec};
use crate::train::{evaluate, run_ablation, train, Checkpoint, Dataset, Part};

pub const ABLATION_FILE: &str = "ablation.json";
pub const ABLATION_TABLE: &str = "ablation.csv";

#[derive(Debug, Parser)]
#[command(name = "chgh", version, about = "Skill demand and supply trend forecasting")]
pub struct Cli {
    /// Log progress at info level.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn job-description and work-experience JSONL into share series and graphs.
    BuildCorpus(BuildCorpusArgs),
    /// Generate a synthetic market with planted trends.
    Synth(SynthArgs),
    /// Train one model and save the best checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on one split.
    Eval(EvalArgs),
    /// Train every variant over several seeds.
    Ablate(AblateArgs),
    /// Plot skills and write the metric table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct BuildCorpusArgs {
    #[arg(long)]
    pub jd: PathBuf,
    #[arg(long)]
    pub we: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 50)]
    pub min_count: u64,
    /// First excluded timestep for graphs; defaults to the start of the
    /// validation windows under a temporal split.
    #[arg(long)]
    pub train_end: Option<usize>,
    /// History window used for that default.
    #[arg(long, default_value_t = 5)]
    pub window: usize,
    #[arg(long, default_value_t = 5)]
    pub n_classes: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Config file; defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Part,
    /// Corpus directory; defaults to the one recorded in the checkpoint.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// Base config; each run overrides the variant and seed.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated subset of static,adaptive,cge,hge,full.
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<Variant>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated skill names to plot.
    #[arg(long, value_delimiter = ',')]
    pub skills: Vec<String>,
    /// `.svg` or `.png`.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub table: PathBuf,
    /// Ablation results to tabulate instead of the checkpoint alone.
    #[arg(long)]
    pub ablation: Option<PathBuf>,
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let name = command_name(&cli.command);
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) if e.is_user_error() => {
            eprintln!("chgh {name}: {e}");
            1
        }
        Err(e) => {
            let id = fnv1a(&format!("{name}:{e}"));
            eprintln!("chgh {name}: {e} [id {id:016x}]");
            2
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::BuildCorpus(_) => "build-corpus",
        Command::Synth(_) => "synth",
        Command::Train(_) => "train",
        Command::Eval(_) => "eval",
        Command::Ablate(_) => "ablate",
        Command::Report(_) => "report",
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::BuildCorpus(a) => build_corpus_cmd(&a),
        Command::Synth(a) => {
            let spec = MarketSpec::load(&a.spec)?;
            let market = generate_market(&spec, a.threads)?;
            write_market(&a.out, &market)?;
            println!(
                "wrote {} job descriptions and {} work experiences to {}",
                market.job_descriptions.len(),
                market.work_experiences.len(),
                a.out.display()
            );
            Ok(())
        }
        Command::Train(a) => {
            let config = load_config(a.config.as_deref())?;
            let data = load_dataset(&a.data)?;
            let mut ckpt = train(&config, &data)?;
            ckpt.data_dir = Some(absolute(&a.data));
            ckpt.save(&a.out)?;
            let best = ckpt.history.iter().find(|r| r.epoch == ckpt.epoch);
            println!(
                "best epoch {} val J-ACC {:.4}; checkpoint in {}",
                ckpt.epoch,
                best.map_or(f64::NAN, |r| r.val.joint_accuracy),
                a.out.display()
            );
            Ok(())
        }
        Command::Eval(a) => {
            let ckpt = Checkpoint::load(&a.ckpt)?;
            let dir = data_dir(&ckpt, a.data.as_deref())?;
            let report = evaluate(&ckpt, &load_dataset(&dir)?, a.split)?;
            let json = serde_json::to_string_pretty(&report)?;
            if let Some(out) = &a.out {
                fsutil::write_file_atomically(out, json.as_bytes())?;
            }
            println!("{json}");
            Ok(())
        }
        Command::Ablate(a) => {
            let base = load_config(a.config.as_deref())?;
            let data = load_dataset(&a.data)?;
            let variants = if a.variants.is_empty() {
                Variant::LADDER.to_vec()
            } else {
                a.variants.clone()
            };
            let seeds: Vec<u64> = (0..a.seeds).collect();
            let report = run_ablation(&base, &data, &variants, &seeds, a.threads)?;
            let rows: Vec<TableRow> = report
                .rows
                .iter()
                .map(|r| TableRow {
                    variant: r.variant.to_string(),
                    metrics: r.mean,
                })
                .collect();
            let json = serde_json::to_string_pretty(&report)?;
            let table = table_csv(&rows)?;
            fsutil::write_dir_atomically(&a.out, |d| {
                fsutil::write_file_atomically(&d.join(ABLATION_FILE), json.as_bytes())?;
                fsutil::write_file_atomically(&d.join(ABLATION_TABLE), table.as_bytes())
            })?;
            print!("{table}");
            Ok(())
        }
        Command::Report(a) => {
            let out = render_report(&ReportRequest {
                checkpoint: a.ckpt,
                data: a.data,
                skills: a.skills,
                image: a.image.clone(),
                table: a.table.clone(),
                ablation: a.ablation,
            })?;
            println!("wrote {}", a.table.display());
            if let (true, Some(img)) = (out.image_written, &a.image) {
                println!("wrote {} ({} panels)", img.display(), out.panels.len());
            }
            Ok(())
        }
    }
}

fn build_corpus_cmd(a: &BuildCorpusArgs) -> Result<()> {
    let opts = BuildOptions {
        epsilon: a.epsilon,
        min_count: a.min_count,
        train_end: a.train_end.unwrap_or(usize::MAX),
        range: None,
        n_classes: a.n_classes,
        holdout_window: a.train_end.is_none().then_some(a.window),
    };
    let artifacts = build_corpus(&a.jd, &a.we, &opts)?;
    write_artifacts(&a.out, &artifacts, a.n_classes)?;
    let m = &artifacts.manifest;
    println!(
        "{} skills over {} steps from {} job descriptions and {} work experiences; graphs use steps < {}",
        m.n_skills, m.n_steps, m.n_job_descriptions, m.n_work_experiences, m.train_end
    );
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<ModelConfig> {
    match path {
        Some(p) => ModelConfig::load(p),
        None => Ok(ModelConfig::default()),
    }
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    Dataset::from_artifacts(&load_artifacts(dir)?)
}

fn data_dir(ckpt: &Checkpoint, explicit: Option<&Path>) -> Result<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| ckpt.data_dir.clone())
        .ok_or_else(|| Error::Config("checkpoint records no corpus directory; pass --data".into()))
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}
