//! Synthetic labor markets with planted structure.
//!
//! Skills belong to latent clusters. Each cluster follows a trend made of
//! two linear pieces, a 12-step seasonal wave and a random walk. A skill's
//! demand inclusion probability follows its cluster's trend; its supply
//! probability follows the same trend `lag` steps later. Documents are
//! drawn cluster-first so that skills of one cluster co-occur more often.

mod oracle;

use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::key_values;
use crate::corpus::{
    build_from_documents, BuildOptions, CorpusArtifacts, Document, DocumentKind, MonthRange, SkillInterner, YearMonth,
};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::model::mix_seed;
use crate::tape::Matrix;

pub use oracle::{oracle_graph, oracle_shares};

pub const JOB_DESCRIPTIONS_FILE: &str = "job_descriptions.jsonl";
pub const WORK_EXPERIENCES_FILE: &str = "work_experiences.jsonl";
pub const TRUTH_FILE: &str = "truth.json";

/// Inclusion probabilities are clipped into this range.
pub const PROB_RANGE: (f64, f64) = (0.01, 0.99);

const TREND_STREAM: u64 = 11;
const SKILL_STREAM: u64 = 12;
const NOISE_STREAM: u64 = 13;
const DOC_STREAM: u64 = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub n_skills: usize,
    pub n_clusters_true: usize,
    pub n_steps: usize,
    /// Documents of each kind per step.
    pub docs_per_step: usize,
    /// Steps by which supply trails demand.
    pub lag: usize,
    /// Scale of the latent trends in log-probability; 0 removes them.
    pub trend_amplitude: f64,
    /// Standard deviation of per-skill, per-step log-probability noise.
    pub noise_scale: f64,
    pub seed: u64,
    pub mean_skills_per_doc: f64,
    /// Inclusion-probability multiplier for skills of a document's
    /// dominant cluster (capped so the marginal is unchanged).
    pub cluster_boost: f64,
    pub start_month: String,
}

impl Default for MarketSpec {
    fn default() -> Self {
        Self {
            n_skills: 64,
            n_clusters_true: 8,
            n_steps: 24,
            docs_per_step: 1000,
            lag: 2,
            trend_amplitude: 1.0,
            noise_scale: 0.1,
            seed: 0,
            mean_skills_per_doc: 4.0,
            cluster_boost: 3.0,
            start_month: "2020-01".into(),
        }
    }
}

impl MarketSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_skills == 0 || self.n_steps == 0 || self.docs_per_step == 0 {
            return fail("n_skills, n_steps and docs_per_step must be positive".into());
        }
        if self.n_clusters_true == 0 || self.n_clusters_true > self.n_skills {
            return fail(format!(
                "n_clusters_true {} must be in 1..={}",
                self.n_clusters_true, self.n_skills
            ));
        }
        if !(self.trend_amplitude >= 0.0) || !(self.noise_scale >= 0.0) {
            return fail("trend_amplitude and noise_scale must be nonnegative".into());
        }
        if !(self.mean_skills_per_doc > 0.0) || self.mean_skills_per_doc >= self.n_skills as f64 {
            return fail(format!(
                "mean_skills_per_doc {} must be in (0, n_skills)",
                self.mean_skills_per_doc
            ));
        }
        if !(self.cluster_boost >= 1.0) {
            return fail("cluster_boost must be at least 1".into());
        }
        self.start()?;
        Ok(())
    }

    pub fn start(&self) -> Result<YearMonth> {
        self.start_month.parse().map_err(Error::Config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fsutil::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// `key = value` lines over the defaults; unknown keys are errors.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut s = MarketSpec::default();
        for (line, key, value) in key_values(text, origin)? {
            let bad = |m: String| Error::Parse {
                path: origin.to_string(),
                line,
                message: format!("{key}: {m}"),
            };
            fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
            where
                T::Err: std::fmt::Display,
            {
                v.parse().map_err(|e| format!("cannot parse {v:?}: {e}"))
            }
            match key.as_str() {
                "n_skills" => s.n_skills = num(&value).map_err(bad)?,
                "n_clusters_true" => s.n_clusters_true = num(&value).map_err(bad)?,
                "n_steps" => s.n_steps = num(&value).map_err(bad)?,
                "docs_per_step" => s.docs_per_step = num(&value).map_err(bad)?,
                "lag" | "demand_supply_lag" => s.lag = num(&value).map_err(bad)?,
                "trend_amplitude" => s.trend_amplitude = num(&value).map_err(bad)?,
                "noise_scale" => s.noise_scale = num(&value).map_err(bad)?,
                "seed" => s.seed = num(&value).map_err(bad)?,
                "mean_skills_per_doc" => s.mean_skills_per_doc = num(&value).map_err(bad)?,
                "cluster_boost" => s.cluster_boost = num(&value).map_err(bad)?,
                "start_month" => s.start_month = value.clone(),
                _ => return Err(bad("unknown key".into())),
            }
        }
        s.validate()?;
        Ok(s)
    }
}

/// A generated market and the quantities it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub spec: MarketSpec,
    pub skill_names: Vec<String>,
    pub cluster_of: Vec<usize>,
    /// Demand inclusion probabilities, |K| × |T|: the expected demand shares.
    pub demand_prob: Matrix,
    /// Supply inclusion probabilities, |K| × |T|.
    pub supply_prob: Matrix,
    pub job_descriptions: Vec<Document>,
    pub work_experiences: Vec<Document>,
    /// Number of probabilities that had to be clipped.
    pub n_clipped: usize,
}

impl SyntheticMarket {
    /// All documents, job descriptions first.
    pub fn documents(&self) -> Vec<Document> {
        let mut all = self.job_descriptions.clone();
        all.extend(self.work_experiences.iter().cloned());
        all
    }

    /// Corpus artifacts straight from the generated documents, equal to
    /// writing the JSONL files and building from them.
    pub fn build(&self, opts: &BuildOptions) -> Result<CorpusArtifacts> {
        let start = self.spec.start()?;
        let range = MonthRange {
            start,
            end: start.plus_months(self.spec.n_steps - 1),
        };
        let interner = SkillInterner::from_names(self.skill_names.iter().cloned());
        build_from_documents(&self.documents(), &interner, range, opts)
    }
}

/// Latent cluster trend over steps `-lag..n_steps` (index 0 is step `-lag`).
fn cluster_trends(spec: &MarketSpec) -> Array2<f64> {
    let span = spec.n_steps + spec.lag;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, TREND_STREAM));
    let walk = Normal::new(0.0, 0.15).expect("valid normal");
    let mut z = Array2::zeros((spec.n_clusters_true, span));
    for c in 0..spec.n_clusters_true {
        let change = rng.random_range(0.25..=0.75) * span as f64;
        let before: f64 = rng.random_range(-2.0..=2.0);
        let after: f64 = rng.random_range(-2.0..=2.0);
        let season: f64 = rng.random_range(0.1..=0.4);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut w = 0.0;
        for i in 0..span {
            let t = i as f64;
            let slope = if t < change { before } else { after };
            let ramp = slope * (t - change) / span as f64;
            let wave = season * (std::f64::consts::TAU * t / 12.0 + phase).sin();
            w += walk.sample(&mut rng);
            z[[c, i]] = spec.trend_amplitude * (ramp + wave + w);
        }
    }
    z
}

/// Inclusion probabilities for one view. `offset` shifts which latent
/// step drives step `t`: demand uses `t`, supply uses `t - lag`.
fn inclusion_probs(
    spec: &MarketSpec,
    z: &Array2<f64>,
    base: &[f64],
    loading: &[f64],
    cluster_of: &[usize],
    stream: u64,
    supply: bool,
) -> (Matrix, usize) {
    let k = spec.n_skills;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, stream));
    let noise = Normal::new(0.0, spec.noise_scale.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut p = Array2::zeros((k, spec.n_steps));
    let mut clipped = 0;
    for t in 0..spec.n_steps {
        let col = if supply { t } else { t + spec.lag };
        let weights: Vec<f64> = (0..k)
            .map(|s| {
                let e = if spec.noise_scale > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                base[s] * (loading[s] * z[[cluster_of[s], col]] + e).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for s in 0..k {
            let raw = spec.mean_skills_per_doc * weights[s] / total;
            let v = raw.clamp(PROB_RANGE.0, PROB_RANGE.1);
            if v != raw {
                clipped += 1;
            }
            p[[s, t]] = v;
        }
    }
    (p, clipped)
}

/// Draw one step's documents of one kind.
fn draw_documents(
    spec: &MarketSpec,
    probs: &Matrix,
    cluster_of: &[usize],
    kind: DocumentKind,
    t: usize,
) -> Vec<Document> {
    let stream = match kind {
        DocumentKind::JobDescription => DOC_STREAM,
        DocumentKind::WorkExperience => DOC_STREAM + 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(spec.seed, stream), t as u64));
    let c = spec.n_clusters_true;
    let prefix = match kind {
        DocumentKind::JobDescription => "jd",
        DocumentKind::WorkExperience => "we",
    };
    // in-cluster and out-of-cluster probability for each skill
    let split: Vec<(f64, f64)> = (0..spec.n_skills)
        .map(|s| {
            let p = probs[[s, t]];
            if c == 1 {
                return (p, p);
            }
            let boost = spec.cluster_boost.min(c as f64).min(1.0 / p);
            (p * boost, p * (c as f64 - boost) / (c as f64 - 1.0))
        })
        .collect();
    (0..spec.docs_per_step)
        .map(|i| {
            let g = rng.random_range(0..c);
            let skills: Vec<usize> = (0..spec.n_skills)
                .filter(|&s| {
                    let (inside, outside) = split[s];
                    let q = if cluster_of[s] == g { inside } else { outside };
                    rng.random::<f64>() < q
                })
                .collect();
            Document::new(format!("{prefix}-{t}-{i}"), kind, t, skills)
        })
        .collect()
}

/// Generate a market. Deterministic in `spec`; document generation runs
/// one step per task on up to `threads` workers without affecting output.
pub fn generate_market(spec: &MarketSpec, threads: usize) -> Result<SyntheticMarket> {
    spec.validate()?;
    let k = spec.n_skills;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, SKILL_STREAM));
    let mut cluster_of: Vec<usize> = (0..k).map(|s| s % spec.n_clusters_true).collect();
    rand::seq::SliceRandom::shuffle(cluster_of.as_mut_slice(), &mut rng);
    let base: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..=2.0)).collect();
    let loading: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..=1.5)).collect();

    let z = cluster_trends(spec);
    let (demand_prob, c1) = inclusion_probs(spec, &z, &base, &loading, &cluster_of, NOISE_STREAM, false);
    let (supply_prob, c2) = inclusion_probs(spec, &z, &base, &loading, &cluster_of, NOISE_STREAM + 1, true);
    let n_clipped = c1 + c2;
    if n_clipped > 0 {
        log::warn!("{n_clipped} inclusion probabilities clipped to {PROB_RANGE:?}");
    }

    let steps: Vec<usize> = (0..spec.n_steps).collect();
    let chunk = spec.n_steps.div_ceil(threads.max(1));
    let per_step: Vec<(Vec<Document>, Vec<Document>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = steps
            .chunks(chunk)
            .map(|ts| {
                let (dp, sp, co) = (&demand_prob, &supply_prob, &cluster_of);
                scope.spawn(move || {
                    ts.iter()
                        .map(|&t| {
                            (
                                draw_documents(spec, dp, co, DocumentKind::JobDescription, t),
                                draw_documents(spec, sp, co, DocumentKind::WorkExperience, t),
                            )
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("generator thread panicked"))
            .collect()
    });
    let (jd, we): (Vec<_>, Vec<_>) = per_step.into_iter().unzip();
    Ok(SyntheticMarket {
        spec: spec.clone(),
        skill_names: (0..k).map(skill_name).collect(),
        cluster_of,
        demand_prob,
        supply_prob,
        job_descriptions: jd.into_iter().flatten().collect(),
        work_experiences: we.into_iter().flatten().collect(),
        n_clipped,
    })
}

pub fn skill_name(id: usize) -> String {
    format!("skill_{id:03}")
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    id: &'a str,
    timestamp: String,
    skills: Vec<&'a str>,
}

#[derive(Serialize)]
struct Truth<'a> {
    spec: &'a MarketSpec,
    skill_names: &'a [String],
    cluster_of: &'a [usize],
    demand_prob: Vec<Vec<f64>>,
    supply_prob: Vec<Vec<f64>>,
}

fn jsonl(market: &SyntheticMarket, docs: &[Document]) -> Result<String> {
    let start = market.spec.start()?;
    let mut out = String::new();
    for d in docs {
        let rec = JsonRecord {
            id: &d.id,
            timestamp: start.plus_months(d.timestep).to_string(),
            skills: d.skills().iter().map(|&s| market.skill_names[s].as_str()).collect(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    Ok(out)
}

/// Write both corpora as JSONL plus `truth.json`, atomically.
pub fn write_market(dir: &Path, market: &SyntheticMarket) -> Result<()> {
    let jd = jsonl(market, &market.job_descriptions)?;
    let we = jsonl(market, &market.work_experiences)?;
    let rows = |m: &Matrix| m.rows().into_iter().map(|r| r.to_vec()).collect();
    let truth = Truth {
        spec: &market.spec,
        skill_names: &market.skill_names,
        cluster_of: &market.cluster_of,
        demand_prob: rows(&market.demand_prob),
        supply_prob: rows(&market.supply_prob),
    };
    let truth = serde_json::to_string_pretty(&truth)?;
    fsutil::write_dir_atomically(dir, |d| {
        fsutil::write_file_atomically(&d.join(JOB_DESCRIPTIONS_FILE), jd.as_bytes())?;
        fsutil::write_file_atomically(&d.join(WORK_EXPERIENCES_FILE), we.as_bytes())?;
        fsutil::write_file_atomically(&d.join(TRUTH_FILE), truth.as_bytes())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MarketSpec {
        MarketSpec {
            n_skills: 12,
            n_clusters_true: 3,
            n_steps: 6,
            docs_per_step: 50,
            ..MarketSpec::default()
        }
    }

    #[test]
    fn deterministic_and_thread_count_independent() {
        let a = generate_market(&small(), 1).unwrap();
        let b = generate_market(&small(), 4).unwrap();
        assert_eq!(a, b);
        let c = generate_market(&MarketSpec { seed: 1, ..small() }, 1).unwrap();
        assert_ne!(a.job_descriptions, c.job_descriptions);
        assert_eq!(a.job_descriptions.len(), 300);
        assert!(a.work_experiences.iter().all(|d| d.kind == DocumentKind::WorkExperience));
    }

    #[test]
    fn probabilities_sum_to_mean_document_length() {
        let m = generate_market(&small(), 1).unwrap();
        for col in m.demand_prob.columns() {
            assert!((col.sum() - 4.0).abs() < 1e-9 || m.n_clipped > 0);
        }
    }

    #[test]
    fn zero_lag_and_noise_gives_identical_views() {
        let spec = MarketSpec { lag: 0, noise_scale: 0.0, ..small() };
        let m = generate_market(&spec, 1).unwrap();
        assert_eq!(m.demand_prob, m.supply_prob);
        let spec = MarketSpec { lag: 2, noise_scale: 0.0, ..small() };
        let m = generate_market(&spec, 1).unwrap();
        for t in 2..6 {
            assert_eq!(m.supply_prob.column(t), m.demand_prob.column(t - 2));
        }
    }

    #[test]
    fn zero_amplitude_without_noise_is_stationary() {
        let spec = MarketSpec { trend_amplitude: 0.0, noise_scale: 0.0, ..small() };
        let m = generate_market(&spec, 1).unwrap();
        for row in m.demand_prob.rows() {
            assert!(row.iter().all(|&v| v == row[0]));
        }
    }

    #[test]
    fn spec_parsing() {
        let s = MarketSpec::parse("n_skills = 10\nlag = 3\nseed=7\n", "s").unwrap();
        assert_eq!((s.n_skills, s.lag, s.seed), (10, 3, 7));
        assert!(MarketSpec::parse("n_skills = 2\nn_clusters_true = 3\n", "s").is_err());
        assert!(matches!(
            MarketSpec::parse("colour = red\n", "s").unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
    }
}
