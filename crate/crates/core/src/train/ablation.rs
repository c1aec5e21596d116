//! The variant ladder, each rung trained over the same seeds and data.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::trainer::evaluate_model;
use super::{train, Dataset, EvalReport, Part, Split};
use crate::config::{ModelConfig, Variant};
use crate::error::{Error, Result};
use crate::labels::MetricsReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub test: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub runs: Vec<SeedResult>,
    /// Test metrics averaged over seeds.
    pub mean: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, variant: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }
}

/// Train every `(variant, seed)` pair from `base` and score the test part.
/// Runs are independent and spread over `threads` workers (at least one);
/// results do not depend on the thread count.
pub fn run_ablation(
    base: &ModelConfig,
    data: &Dataset,
    variants: &[Variant],
    seeds: &[u64],
    threads: usize,
) -> Result<AblationReport> {
    if seeds.is_empty() || variants.is_empty() {
        return Err(Error::Config("ablation needs at least one variant and one seed".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..variants.len())
        .flat_map(|v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Mutex<Vec<Option<Result<SeedResult>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(v, seed)) = jobs.get(i) else { break };
                let cfg = ModelConfig {
                    variant: variants[v],
                    seed,
                    ..base.clone()
                };
                let r = run_one(&cfg, data);
                results.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    let mut results = results.into_inner().expect("result lock").into_iter();
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let runs = (0..seeds.len())
            .map(|_| results.next().flatten().expect("every job ran"))
            .collect::<Result<Vec<_>>>()?;
        let n = runs.len() as f64;
        let avg = |f: fn(&MetricsReport) -> f64| runs.iter().map(|r| f(&r.test.summary)).sum::<f64>() / n;
        let mean = MetricsReport {
            accuracy: avg(|m| m.accuracy),
            weighted_f1: avg(|m| m.weighted_f1),
            auc: avg(|m| m.auc),
            joint_accuracy: avg(|m| m.joint_accuracy),
        };
        log::info!("{variant}: mean test J-ACC {:.4}", mean.joint_accuracy);
        rows.push(AblationRow { variant, runs, mean });
    }
    Ok(AblationReport { rows })
}

fn run_one(cfg: &ModelConfig, data: &Dataset) -> Result<SeedResult> {
    let ckpt = train(cfg, data)?;
    let samples = data.samples(cfg)?;
    let split = Split::new(cfg.split_mode, samples.len(), data.n_skills(), cfg.seed)?;
    let test = evaluate_model(&ckpt.model, &samples, &split, Part::Test, &data.graphs)?;
    Ok(SeedResult {
        seed: cfg.seed,
        best_epoch: ckpt.epoch,
        test,
    })
}
