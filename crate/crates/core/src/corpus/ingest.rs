use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use super::{Document, DocumentKind, SkillId, SkillVocabulary};
use crate::error::{Error, Result};

/// Calendar month, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    /// Whole months from `earlier` to `self`.
    pub fn months_since(self, earlier: YearMonth) -> i64 {
        self.ordinal() - earlier.ordinal()
    }

    pub fn plus_months(self, n: usize) -> Self {
        let o = self.ordinal() + n as i64;
        Self {
            year: o.div_euclid(12) as i32,
            month: o.rem_euclid(12) as u32 + 1,
        }
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bad = || format!("timestamp {s:?} is not YYYY-MM");
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u32 = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month).ok_or_else(bad)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Inclusive month range; the start month is timestep 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonthRange {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl MonthRange {
    pub fn n_steps(&self) -> usize {
        (self.end.months_since(self.start) + 1).max(0) as usize
    }

    /// Smallest range covering every document of every corpus given.
    pub fn covering<'a>(corpora: impl IntoIterator<Item = &'a [RawDocument]>) -> Option<Self> {
        let mut range: Option<MonthRange> = None;
        for doc in corpora.into_iter().flatten() {
            range = Some(match range {
                None => MonthRange {
                    start: doc.month,
                    end: doc.month,
                },
                Some(r) => MonthRange {
                    start: r.start.min(doc.month),
                    end: r.end.max(doc.month),
                },
            });
        }
        range
    }
}

impl fmt::Display for MonthRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// A parsed record before skill names are resolved to ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub id: String,
    pub kind: DocumentKind,
    pub month: YearMonth,
    pub skills: Vec<String>,
    pub line: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    timestamp: String,
    skills: Vec<String>,
}

/// Parse a JSONL corpus. Blank lines are skipped; line numbers are 1-based.
pub fn read_jsonl(path: &Path, kind: DocumentKind) -> Result<Vec<RawDocument>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingPath(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    let display = path.display().to_string();
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: display.clone(),
            line: line_no,
            message,
        };
        let rec: Record = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let month = rec.timestamp.parse::<YearMonth>().map_err(parse_err)?;
        docs.push(RawDocument {
            id: rec.id,
            kind,
            month,
            skills: rec.skills,
            line: line_no,
        });
    }
    Ok(docs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabMode {
    /// Unknown names are added to the interner.
    Build,
    /// Unknown names are an error.
    Strict,
}

/// Name-to-id table used during ingestion, before sparse skills are removed.
#[derive(Debug, Clone, Default)]
pub struct SkillInterner {
    names: Vec<String>,
    index: HashMap<String, SkillId>,
}

impl SkillInterner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names(names: impl IntoIterator<Item = String>) -> Self {
        let mut s = Self::new();
        for n in names {
            s.intern(&n);
        }
        s
    }

    pub fn intern(&mut self, name: &str) -> SkillId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<SkillId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: SkillId) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Map months to timesteps relative to `range.start` and resolve skill names.
pub fn index_documents(
    raw: &[RawDocument],
    range: &MonthRange,
    interner: &mut SkillInterner,
    mode: VocabMode,
) -> Result<Vec<Document>> {
    let mut docs = Vec::with_capacity(raw.len());
    for r in raw {
        if r.month < range.start || r.month > range.end {
            return Err(Error::Range {
                timestamp: r.month.to_string(),
                range: range.to_string(),
            });
        }
        let timestep = r.month.months_since(range.start) as usize;
        let mut ids = Vec::with_capacity(r.skills.len());
        for name in &r.skills {
            let id = match mode {
                VocabMode::Build => interner.intern(name),
                VocabMode::Strict => interner.get(name).ok_or_else(|| Error::Parse {
                    path: r.id.clone(),
                    line: r.line,
                    message: format!("unknown skill {name:?}"),
                })?,
            };
            ids.push(id);
        }
        docs.push(Document::new(r.id.clone(), r.kind, timestep, ids));
    }
    Ok(docs)
}

pub fn ingest_documents(
    path: &Path,
    kind: DocumentKind,
    range: &MonthRange,
    interner: &mut SkillInterner,
    mode: VocabMode,
) -> Result<Vec<Document>> {
    let raw = read_jsonl(path, kind)?;
    index_documents(&raw, range, interner, mode)
}

/// Keep skills occurring in at least `min_count` documents. Ids are
/// reassigned by descending count, ties broken by name.
pub fn filter_sparse_skills(
    docs: &[Document],
    interner: &SkillInterner,
    min_count: u64,
) -> Result<SkillVocabulary> {
    if min_count < 1 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts = vec![0u64; interner.len()];
    for d in docs {
        for &s in d.skills() {
            counts[s] += 1;
        }
    }
    let mut kept: Vec<(String, u64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= min_count)
        .map(|(id, &c)| (interner.name(id).to_string(), c))
        .collect();
    if kept.is_empty() {
        return Err(Error::Config(format!(
            "no skill occurs at least {min_count} times"
        )));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    SkillVocabulary::new(kept)
}

/// Re-express documents in vocabulary ids, dropping filtered-out skills.
pub fn restrict_to_vocabulary(
    docs: &[Document],
    interner: &SkillInterner,
    vocab: &SkillVocabulary,
) -> Vec<Document> {
    let remap: Vec<Option<SkillId>> = (0..interner.len())
        .map(|id| vocab.id(interner.name(id)))
        .collect();
    docs.iter()
        .map(|d| {
            Document::new(
                d.id.clone(),
                d.kind,
                d.timestep,
                d.skills().iter().filter_map(|&s| remap[s]),
            )
        })
        .collect()
}
