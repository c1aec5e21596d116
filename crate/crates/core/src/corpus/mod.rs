//! Turning time-stamped, skill-tagged documents into demand/supply share
//! series, skill-gap series and the two co-occurrence graphs.

mod graph;
mod ingest;
pub mod io;
mod shares;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use graph::build_cooccurrence_graph;
pub use ingest::{
    filter_sparse_skills, index_documents, ingest_documents, read_jsonl, restrict_to_vocabulary,
    MonthRange, RawDocument, SkillInterner, VocabMode, YearMonth,
};
pub use io::{build_corpus, build_from_documents, load_artifacts, write_artifacts, BuildOptions, CorpusArtifacts, CorpusManifest};
pub use shares::{compute_share_series, compute_skill_gap};

pub type SkillId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DocumentKind {
    JobDescription,
    WorkExperience,
}

impl DocumentKind {
    pub fn view(self) -> View {
        match self {
            DocumentKind::JobDescription => View::Demand,
            DocumentKind::WorkExperience => View::Supply,
        }
    }
}

/// Job descriptions measure demand, work experiences measure supply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum View {
    Demand,
    Supply,
}

impl View {
    pub fn as_str(self) -> &'static str {
        match self {
            View::Demand => "demand",
            View::Supply => "supply",
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A document after month indexing. `skills` is sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub kind: DocumentKind,
    pub timestep: usize,
    skills: Vec<SkillId>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        kind: DocumentKind,
        timestep: usize,
        skills: impl IntoIterator<Item = SkillId>,
    ) -> Self {
        let mut skills: Vec<SkillId> = skills.into_iter().collect();
        skills.sort_unstable();
        skills.dedup();
        Self {
            id: id.into(),
            kind,
            timestep,
            skills,
        }
    }

    pub fn skills(&self) -> &[SkillId] {
        &self.skills
    }

    pub fn contains(&self, skill: SkillId) -> bool {
        self.skills.binary_search(&skill).is_ok()
    }
}

/// Skills retained for modelling. Ids are contiguous `0..len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillVocabulary {
    names: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, SkillId>,
}

impl SkillVocabulary {
    pub fn new(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        let mut names = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        for (id, (name, count)) in entries.into_iter().enumerate() {
            if index.insert(name.clone(), id).is_some() {
                return Err(Error::Config(format!("duplicate skill name {name:?}")));
            }
            names.push(name);
            counts.push(count);
        }
        Ok(Self {
            names,
            counts,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: SkillId) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn count(&self, id: SkillId) -> u64 {
        self.counts[id]
    }

    pub fn id(&self, name: &str) -> Option<SkillId> {
        self.index.get(name).copied()
    }

    /// Names sharing a prefix or substring with `name`, for diagnostics.
    pub fn near_matches(&self, name: &str) -> Vec<String> {
        let needle = name.to_lowercase();
        let mut hits: Vec<String> = self
            .names
            .iter()
            .filter(|n| {
                let n = n.to_lowercase();
                n.contains(&needle) || needle.contains(&n) || common_prefix(&n, &needle) >= 3
            })
            .cloned()
            .collect();
        hits.truncate(5);
        hits
    }
}

fn common_prefix(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

/// Per-skill, per-timestep share matrix (|K| × |T|).
#[derive(Debug, Clone, PartialEq)]
pub struct ShareSeries {
    pub view: View,
    pub values: ndarray::Array2<f64>,
    /// Timesteps that had no documents; their columns are zero.
    pub empty_steps: Vec<usize>,
}

impl ShareSeries {
    pub fn n_skills(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.values.ncols()
    }
}

/// Demand share minus supply share.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSeries {
    pub values: ndarray::Array2<f64>,
}

/// Thresholded normalized co-occurrence adjacency. Row `i` holds, for every
/// `j`, the fraction of documents containing `i` that also contain `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillGraph {
    pub view: View,
    pub epsilon: f64,
    n_skills: usize,
    edges: std::collections::BTreeMap<(SkillId, SkillId), f64>,
}

impl SkillGraph {
    pub fn from_edges(
        view: View,
        epsilon: f64,
        n_skills: usize,
        edges: impl IntoIterator<Item = (SkillId, SkillId, f64)>,
    ) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        for (i, j, w) in edges {
            if i >= n_skills || j >= n_skills {
                return Err(Error::Dimension(format!(
                    "edge ({i},{j}) outside {n_skills} skills"
                )));
            }
            if !(w > epsilon && w <= 1.0) {
                return Err(Error::Config(format!(
                    "edge ({i},{j}) weight {w} outside ({epsilon}, 1]"
                )));
            }
            map.insert((i, j), w);
        }
        Ok(Self {
            view,
            epsilon,
            n_skills,
            edges: map,
        })
    }

    pub fn n_skills(&self) -> usize {
        self.n_skills
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, i: SkillId, j: SkillId) -> f64 {
        self.edges.get(&(i, j)).copied().unwrap_or(0.0)
    }

    /// Edges in (src, dst) order.
    pub fn edges(&self) -> impl Iterator<Item = (SkillId, SkillId, f64)> + '_ {
        self.edges.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut m = ndarray::Array2::zeros((self.n_skills, self.n_skills));
        for (i, j, w) in self.edges() {
            m[[i, j]] = w;
        }
        m
    }
}
