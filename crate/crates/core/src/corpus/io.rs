//! Corpus artifact directory: vocabulary, share/gap matrices, graphs and a
//! manifest, written by `build-corpus` and read by training.
//!
//! Layout:
//!
//! ```text
//! corpus.json          manifest (start month, steps, epsilon, min_count, train_end)
//! vocab.csv            skill_id,name,count
//! demand_shares.csv    skill,t0,t1,...
//! supply_shares.csv    skill,t0,t1,...
//! gap.csv              skill,t0,t1,...
//! demand_graph.tsv     src_id<TAB>dst_id<TAB>weight
//! supply_graph.tsv     src_id<TAB>dst_id<TAB>weight
//! labels.csv           skill_id,view,class (final step against all prior steps)
//! ```

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{
    build_cooccurrence_graph, compute_share_series, compute_skill_gap, filter_sparse_skills,
    index_documents, read_jsonl, restrict_to_vocabulary, Document, DocumentKind, GapSeries,
    MonthRange, ShareSeries, SkillGraph, SkillInterner, SkillVocabulary, View, VocabMode,
    YearMonth,
};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::labels::{discretize_shares, write_labels_csv};

pub const MANIFEST_FILE: &str = "corpus.json";

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub epsilon: f64,
    pub min_count: u64,
    /// First timestep excluded from graph construction.
    pub train_end: usize,
    /// Declared month range; derived from the data when absent.
    pub range: Option<MonthRange>,
    pub n_classes: usize,
    /// When set, graphs also stop where a temporal split with this window
    /// length would start validation.
    pub holdout_window: Option<usize>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            min_count: 50,
            train_end: usize::MAX,
            range: None,
            n_classes: 5,
            holdout_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub start_month: String,
    pub n_steps: usize,
    pub n_skills: usize,
    pub epsilon: f64,
    pub min_count: u64,
    pub train_end: usize,
    pub n_job_descriptions: usize,
    pub n_work_experiences: usize,
}

/// Everything training needs from a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusArtifacts {
    pub manifest: CorpusManifest,
    pub vocab: SkillVocabulary,
    pub demand: ShareSeries,
    pub supply: ShareSeries,
    pub gap: GapSeries,
    pub demand_graph: SkillGraph,
    pub supply_graph: SkillGraph,
}

impl CorpusArtifacts {
    pub fn n_skills(&self) -> usize {
        self.vocab.len()
    }

    pub fn n_steps(&self) -> usize {
        self.demand.n_steps()
    }

    pub fn start_month(&self) -> Result<YearMonth> {
        self.manifest
            .start_month
            .parse()
            .map_err(|e: String| Error::Config(e))
    }
}

/// Read both corpora, index months against their common start, drop sparse
/// skills, and compute shares, gaps and training-period graphs.
pub fn build_corpus(jd_path: &Path, we_path: &Path, opts: &BuildOptions) -> Result<CorpusArtifacts> {
    let jd_raw = read_jsonl(jd_path, DocumentKind::JobDescription)?;
    let we_raw = read_jsonl(we_path, DocumentKind::WorkExperience)?;
    let range = match opts.range {
        Some(r) => r,
        None => MonthRange::covering([jd_raw.as_slice(), we_raw.as_slice()])
            .ok_or_else(|| Error::Config("both corpora are empty".into()))?,
    };
    let mut interner = SkillInterner::new();
    let mut docs = index_documents(&jd_raw, &range, &mut interner, VocabMode::Build)?;
    docs.extend(index_documents(&we_raw, &range, &mut interner, VocabMode::Build)?);
    build_from_documents(&docs, &interner, range, opts)
}

pub fn build_from_documents(
    docs: &[Document],
    interner: &SkillInterner,
    range: MonthRange,
    opts: &BuildOptions,
) -> Result<CorpusArtifacts> {
    let vocab = filter_sparse_skills(docs, interner, opts.min_count)?;
    let docs = restrict_to_vocabulary(docs, interner, &vocab);
    let horizon = range.n_steps();
    let k = vocab.len();
    let demand = compute_share_series(&docs, k, View::Demand, horizon)?;
    let supply = compute_share_series(&docs, k, View::Supply, horizon)?;
    let gap = compute_skill_gap(&demand, &supply)?;
    let mut train_end = opts.train_end.min(horizon);
    if let Some(w) = opts.holdout_window {
        train_end = train_end.min(crate::train::temporal_train_end(horizon, w)?);
    }
    let train_docs = |kind: DocumentKind| -> Vec<Document> {
        docs.iter()
            .filter(|d| d.kind == kind && d.timestep < train_end)
            .cloned()
            .collect()
    };
    let demand_graph = build_cooccurrence_graph(
        &train_docs(DocumentKind::JobDescription),
        k,
        View::Demand,
        opts.epsilon,
    )?;
    let supply_graph = build_cooccurrence_graph(
        &train_docs(DocumentKind::WorkExperience),
        k,
        View::Supply,
        opts.epsilon,
    )?;
    let count = |kind| docs.iter().filter(|d| d.kind == kind).count();
    Ok(CorpusArtifacts {
        manifest: CorpusManifest {
            format_version: 1,
            start_month: range.start.to_string(),
            n_steps: horizon,
            n_skills: k,
            epsilon: opts.epsilon,
            min_count: opts.min_count,
            train_end,
            n_job_descriptions: count(DocumentKind::JobDescription),
            n_work_experiences: count(DocumentKind::WorkExperience),
        },
        vocab,
        demand,
        supply,
        gap,
        demand_graph,
        supply_graph,
    })
}

pub fn write_artifacts(dir: &Path, a: &CorpusArtifacts, n_classes: usize) -> Result<()> {
    fsutil::write_dir_atomically(dir, |d| write_artifacts_into(d, a, n_classes))
}

fn write_artifacts_into(dir: &Path, a: &CorpusArtifacts, n_classes: usize) -> Result<()> {
    let manifest = serde_json::to_string_pretty(&a.manifest)?;
    fsutil::write_file_atomically(&dir.join(MANIFEST_FILE), manifest.as_bytes())?;
    write_vocab(&dir.join("vocab.csv"), &a.vocab)?;
    write_matrix_csv(&dir.join("demand_shares.csv"), &a.vocab, &a.demand.values)?;
    write_matrix_csv(&dir.join("supply_shares.csv"), &a.vocab, &a.supply.values)?;
    write_matrix_csv(&dir.join("gap.csv"), &a.vocab, &a.gap.values)?;
    write_graph_tsv(&dir.join("demand_graph.tsv"), &a.demand_graph)?;
    write_graph_tsv(&dir.join("supply_graph.tsv"), &a.supply_graph)?;
    let t = a.n_steps();
    if t >= 3 && n_classes >= 2 && n_classes <= a.n_skills() {
        let hist = |s: &ShareSeries| s.values.slice(ndarray::s![.., ..t - 1]).to_owned();
        let (ld, _) = discretize_shares(
            hist(&a.demand).view(),
            a.demand.values.column(t - 1),
            n_classes,
            View::Demand,
        )?;
        let (ls, _) = discretize_shares(
            hist(&a.supply).view(),
            a.supply.values.column(t - 1),
            n_classes,
            View::Supply,
        )?;
        write_labels_csv(&dir.join("labels.csv"), &[&ls, &ld])?;
    }
    Ok(())
}

pub fn load_artifacts(dir: &Path) -> Result<CorpusArtifacts> {
    fsutil::require_exists(dir)?;
    let manifest: CorpusManifest =
        serde_json::from_str(&fsutil::read_to_string(&dir.join(MANIFEST_FILE))?)?;
    let vocab = read_vocab(&dir.join("vocab.csv"))?;
    let k = vocab.len();
    let t = manifest.n_steps;
    let demand = ShareSeries {
        view: View::Demand,
        values: read_matrix_csv(&dir.join("demand_shares.csv"), &vocab, t)?,
        empty_steps: vec![],
    };
    let supply = ShareSeries {
        view: View::Supply,
        values: read_matrix_csv(&dir.join("supply_shares.csv"), &vocab, t)?,
        empty_steps: vec![],
    };
    let gap = GapSeries {
        values: read_matrix_csv(&dir.join("gap.csv"), &vocab, t)?,
    };
    let demand_graph = read_graph_tsv(&dir.join("demand_graph.tsv"), View::Demand, manifest.epsilon, k)?;
    let supply_graph = read_graph_tsv(&dir.join("supply_graph.tsv"), View::Supply, manifest.epsilon, k)?;
    Ok(CorpusArtifacts {
        manifest,
        vocab,
        demand,
        supply,
        gap,
        demand_graph,
        supply_graph,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Parse {
        path: path.display().to_string(),
        line: e.position().map(|p| p.line() as usize).unwrap_or(0),
        message: e.to_string(),
    }
}

fn finish_csv(path: &Path, w: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    fsutil::write_file_atomically(path, &bytes)
}

pub fn write_vocab(path: &Path, vocab: &SkillVocabulary) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = csv_err(path);
    w.write_record(["skill_id", "name", "count"]).map_err(&err)?;
    for (id, name) in vocab.names().iter().enumerate() {
        w.write_record([id.to_string(), name.clone(), vocab.count(id).to_string()])
            .map_err(&err)?;
    }
    finish_csv(path, w)
}

pub fn read_vocab(path: &Path) -> Result<SkillVocabulary> {
    fsutil::require_exists(path)?;
    let err = csv_err(path);
    let mut r = csv::Reader::from_path(path).map_err(&err)?;
    let mut entries = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(&err)?;
        let parse = |msg: &str| Error::Parse {
            path: path.display().to_string(),
            line: i + 2,
            message: msg.to_string(),
        };
        let id: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| parse("bad skill_id"))?;
        if id != i {
            return Err(parse("skill ids must be contiguous from 0"));
        }
        let name = rec.get(1).ok_or_else(|| parse("missing name"))?.to_string();
        let count: u64 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(|| parse("bad count"))?;
        entries.push((name, count));
    }
    SkillVocabulary::new(entries)
}

/// `skill,t0,t1,...`; values use the shortest representation that
/// round-trips exactly.
pub fn write_matrix_csv(path: &Path, vocab: &SkillVocabulary, values: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = csv_err(path);
    let mut header = vec!["skill".to_string()];
    header.extend((0..values.ncols()).map(|t| format!("t{t}")));
    w.write_record(&header).map_err(&err)?;
    for (k, row) in values.rows().into_iter().enumerate() {
        let mut rec = vec![vocab.name(k).to_string()];
        rec.extend(row.iter().map(|v| format!("{v}")));
        w.write_record(&rec).map_err(&err)?;
    }
    finish_csv(path, w)
}

pub fn read_matrix_csv(path: &Path, vocab: &SkillVocabulary, n_steps: usize) -> Result<Array2<f64>> {
    fsutil::require_exists(path)?;
    let err = csv_err(path);
    let mut r = csv::Reader::from_path(path).map_err(&err)?;
    let mut m = Array2::zeros((vocab.len(), n_steps));
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(&err)?;
        let parse = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 2,
            message: msg,
        };
        let name = rec.get(0).unwrap_or_default();
        if vocab.names().get(i).map(String::as_str) != Some(name) {
            return Err(parse(format!("row {i} is {name:?}, expected vocabulary order")));
        }
        if rec.len() != n_steps + 1 {
            return Err(parse(format!("expected {} columns, got {}", n_steps + 1, rec.len())));
        }
        for t in 0..n_steps {
            m[[i, t]] = rec[t + 1]
                .parse()
                .map_err(|_| parse(format!("bad number {:?}", &rec[t + 1])))?;
        }
        rows += 1;
    }
    if rows != vocab.len() {
        return Err(Error::Dimension(format!(
            "{} has {rows} rows for {} skills",
            path.display(),
            vocab.len()
        )));
    }
    Ok(m)
}

pub fn write_graph_tsv(path: &Path, g: &SkillGraph) -> Result<()> {
    let mut out = String::new();
    for (i, j, w) in g.edges() {
        out.push_str(&format!("{i}\t{j}\t{w}\n"));
    }
    fsutil::write_file_atomically(path, out.as_bytes())
}

pub fn read_graph_tsv(path: &Path, view: View, epsilon: f64, n_skills: usize) -> Result<SkillGraph> {
    let text = fsutil::read_to_string(path)?;
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse = || Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: format!("expected src<TAB>dst<TAB>weight, got {line:?}"),
        };
        let mut parts = line.split('\t');
        let (Some(a), Some(b), Some(w), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(parse());
        };
        edges.push((
            a.parse().map_err(|_| parse())?,
            b.parse().map_err(|_| parse())?,
            w.parse().map_err(|_| parse())?,
        ));
    }
    SkillGraph::from_edges(view, epsilon, n_skills, edges)
}
