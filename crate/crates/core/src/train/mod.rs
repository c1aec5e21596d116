//! Training, evaluation, ablation and gradient checking.
//!
//! A training instance is a history window of `config.window` steps and
//! the step right after it. Labels come from discretizing the target step
//! against the window; model inputs are the window's shares and gaps,
//! standardized per skill.

pub mod ablation;
pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod optim;
mod trainer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, SplitMode};
use crate::corpus::{CorpusArtifacts, View};
use crate::error::{Error, Result};
use crate::labels::{discretize_shares, LabelMatrix};
use crate::model::{GraphContext, ModelInput};
use crate::tape::{standardize_rows, Matrix};

pub use ablation::{run_ablation, AblationReport, AblationRow};
pub use checkpoint::{Checkpoint, EpochRecord, StopReason};
pub use gradcheck::{check_gradients, GradReport};
pub use loss::{main_loss, total_loss, LossBundle};
pub use optim::Adam;
pub use trainer::{evaluate, loss_and_gradients, loss_value, predict, train, EvalReport, Prediction};

/// Share series and fixed graphs for one corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// |K| × |T|.
    pub supply: Matrix,
    /// |K| × |T|.
    pub demand: Matrix,
    pub graphs: GraphContext,
}

impl Dataset {
    pub fn new(supply: Matrix, demand: Matrix, supply_graph: &Matrix, demand_graph: &Matrix) -> Result<Self> {
        if supply.dim() != demand.dim() {
            return Err(Error::Dimension(format!(
                "supply {:?} and demand {:?} shares differ in shape",
                supply.dim(),
                demand.dim()
            )));
        }
        let graphs = GraphContext::new(supply_graph, demand_graph)?;
        if graphs.n_skills() != supply.nrows() {
            return Err(Error::Dimension(format!(
                "graphs cover {} skills, shares {}",
                graphs.n_skills(),
                supply.nrows()
            )));
        }
        Ok(Self { supply, demand, graphs })
    }

    pub fn from_artifacts(a: &CorpusArtifacts) -> Result<Self> {
        Self::new(
            a.supply.values.clone(),
            a.demand.values.clone(),
            &a.supply_graph.to_dense(),
            &a.demand_graph.to_dense(),
        )
    }

    pub fn n_skills(&self) -> usize {
        self.supply.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.supply.ncols()
    }

    /// Number of windows with a target inside the series.
    pub fn n_windows(&self, window: usize) -> usize {
        self.n_steps().saturating_sub(window)
    }

    /// The instance whose target is `target_step`.
    pub fn sample(&self, target_step: usize, cfg: &ModelConfig) -> Result<Sample> {
        let w = cfg.window;
        if target_step < w || target_step >= self.n_steps() {
            return Err(Error::Config(format!(
                "target step {target_step} needs {w} prior steps inside {} steps",
                self.n_steps()
            )));
        }
        let hist = ndarray::s![.., target_step - w..target_step];
        let (supply_labels, _) = discretize_shares(
            self.supply.slice(hist),
            self.supply.column(target_step),
            cfg.n_classes,
            View::Supply,
        )?;
        let (demand_labels, _) = discretize_shares(
            self.demand.slice(hist),
            self.demand.column(target_step),
            cfg.n_classes,
            View::Demand,
        )?;
        let supply = self.supply.slice(hist).to_owned();
        let demand = self.demand.slice(hist).to_owned();
        let gap = &demand - &supply;
        Ok(Sample {
            target_step,
            input: ModelInput {
                supply: standardize_rows(&supply),
                demand: standardize_rows(&demand),
                gap: standardize_rows(&gap),
            },
            supply_labels,
            demand_labels,
        })
    }

    /// Every window in time order.
    pub fn samples(&self, cfg: &ModelConfig) -> Result<Vec<Sample>> {
        (cfg.window..self.n_steps())
            .map(|t| self.sample(t, cfg))
            .collect()
    }
}

/// One prediction instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub target_step: usize,
    pub input: ModelInput,
    pub supply_labels: LabelMatrix,
    pub demand_labels: LabelMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Val,
    Test,
}

impl Part {
    fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Part {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Part::Train),
            "val" | "validation" => Ok(Part::Val),
            "test" => Ok(Part::Test),
            _ => Err(Error::Config(format!("unknown split {s:?}; expected train, val or test"))),
        }
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Part::Train => "train",
            Part::Val => "val",
            Part::Test => "test",
        })
    }
}

/// Which windows and which skills belong to each part.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    windows: [Vec<usize>; 3],
    skills: [Vec<usize>; 3],
}

impl Split {
    /// Partition `n_windows` windows over `n_skills` skills 8:1:1.
    pub fn new(mode: SplitMode, n_windows: usize, n_skills: usize, seed: u64) -> Result<Self> {
        match mode {
            SplitMode::Temporal => {
                let [tr, va, te] = proportions(n_windows, "windows")?;
                let all: Vec<usize> = (0..n_skills).collect();
                Ok(Self {
                    windows: [(0..tr).collect(), (tr..tr + va).collect(), (tr + va..tr + va + te).collect()],
                    skills: [all.clone(), all.clone(), all],
                })
            }
            SplitMode::Skill => {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                if n_windows == 0 {
                    return Err(Error::Config("no windows to train on".into()));
                }
                let [tr, va, _] = proportions(n_skills, "skills")?;
                let mut order: Vec<usize> = (0..n_skills).collect();
                order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                let mut parts = [order[..tr].to_vec(), order[tr..tr + va].to_vec(), order[tr + va..].to_vec()];
                parts.iter_mut().for_each(|p| p.sort_unstable());
                let all: Vec<usize> = (0..n_windows).collect();
                Ok(Self {
                    windows: [all.clone(), all.clone(), all],
                    skills: parts,
                })
            }
        }
    }

    /// Indices into the window list.
    pub fn windows(&self, part: Part) -> &[usize] {
        &self.windows[part.index()]
    }

    /// Skill ids scored in this part.
    pub fn skills(&self, part: Part) -> &[usize] {
        &self.skills[part.index()]
    }
}

/// 8:1:1 with at least one item in validation and test.
fn proportions(n: usize, what: &str) -> Result<[usize; 3]> {
    let held = ((n as f64) * 0.1).round().max(1.0) as usize;
    if n < 2 * held + 1 {
        return Err(Error::Config(format!(
            "{n} {what} cannot be split into train, validation and test"
        )));
    }
    Ok([n - 2 * held, held, held])
}

/// First timestep that belongs to validation under a temporal split, which
/// is where graph construction should stop.
pub fn temporal_train_end(n_steps: usize, window: usize) -> Result<usize> {
    let n_windows = n_steps.saturating_sub(window);
    let [tr, _, _] = proportions(n_windows, "windows")?;
    Ok(window + tr)
}
