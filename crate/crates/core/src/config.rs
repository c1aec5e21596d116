//! Model and training configuration, read from flat `key = value` files.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

/// Which modules are active. Each variant adds one module to the previous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Fixed co-occurrence propagation and a plain decoder.
    Static,
    /// Adds a learned adjacency inside each view.
    Adaptive,
    /// Learned adjacency across both views.
    Cge,
    /// Adds trend-cluster pooling and its entropy loss.
    Hge,
    /// Adds the gap-conditioned hyper-decoder.
    Full,
}

impl Variant {
    pub const LADDER: [Variant; 5] = [
        Variant::Static,
        Variant::Adaptive,
        Variant::Cge,
        Variant::Hge,
        Variant::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Static => "static",
            Variant::Adaptive => "adaptive",
            Variant::Cge => "cge",
            Variant::Hge => "hge",
            Variant::Full => "full",
        }
    }

    pub fn has_adaptive_graph(self) -> bool {
        self >= Variant::Adaptive
    }

    pub fn has_cross_view_graph(self) -> bool {
        self >= Variant::Cge
    }

    pub fn has_hierarchy(self) -> bool {
        self >= Variant::Hge
    }

    pub fn has_hyper_decoder(self) -> bool {
        self == Variant::Full
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::LADDER
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Train, validation and test windows are consecutive in time.
    Temporal,
    /// Skills are partitioned 8:1:1; every window is used for each part.
    Skill,
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(SplitMode::Temporal),
            "skill" => Ok(SplitMode::Skill),
            _ => Err(Error::Config(format!("unknown split mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d: usize,
    /// Cluster count; `None` picks 100, or 8 when there are fewer than 100 skills.
    pub clusters: Option<usize>,
    pub heads: usize,
    pub recurrent_layers: usize,
    pub min_seq_len: usize,
    /// History length fed to the model for each prediction.
    pub window: usize,
    pub learning_rate: f64,
    /// Learning-rate multiplier for hypernetwork parameters.
    pub hyper_lr_multiplier: f64,
    pub dropout: f64,
    pub scheduler_step: usize,
    pub scheduler_factor: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub n_classes: usize,
    pub seed: u64,
    pub variant: Variant,
    pub epochs: usize,
    pub patience: usize,
    /// Training windows per gradient step; 0 means all of them.
    pub batch_windows: usize,
    pub split_mode: SplitMode,
    /// One embedding table for both views (otherwise one per view).
    pub shared_embedding: bool,
    /// Evaluate training-split metrics after every epoch.
    pub track_train_metrics: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d: 32,
            clusters: None,
            heads: 4,
            recurrent_layers: 3,
            min_seq_len: 5,
            window: 5,
            learning_rate: 1e-3,
            hyper_lr_multiplier: 1.0,
            dropout: 0.3,
            scheduler_step: 50,
            scheduler_factor: 0.1,
            lambda1: 1e-5,
            lambda2: 1e-5,
            delta: 0.001,
            epsilon: 0.1,
            n_classes: 5,
            seed: 0,
            variant: Variant::Full,
            epochs: 200,
            patience: 30,
            batch_windows: 1,
            split_mode: SplitMode::Temporal,
            shared_embedding: true,
            track_train_metrics: false,
        }
    }
}

impl ModelConfig {
    pub fn cluster_count(&self, n_skills: usize) -> usize {
        self.clusters
            .unwrap_or(if n_skills < 100 { 8 } else { 100 })
    }

    pub fn head_dim(&self) -> usize {
        self.d / self.heads
    }

    /// Length of one generated decoder's parameter vector.
    pub fn generated_decoder_len(&self) -> usize {
        self.d * self.d + self.d + self.d * self.n_classes + self.n_classes
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.d == 0 {
            return fail("d must be positive".into());
        }
        if self.heads == 0 || self.d % self.heads != 0 {
            return fail(format!("d={} is not divisible by heads={}", self.d, self.heads));
        }
        if self.recurrent_layers == 0 {
            return fail("recurrent_layers must be positive".into());
        }
        if self.clusters == Some(0) {
            return fail("clusters must be positive".into());
        }
        if self.window < self.min_seq_len {
            return fail(format!(
                "window {} shorter than min_seq_len {}",
                self.window, self.min_seq_len
            ));
        }
        if self.window < 2 {
            return fail("window must be at least 2".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate {} must be nonnegative", self.learning_rate));
        }
        if !(self.hyper_lr_multiplier > 0.0) || !(self.scheduler_factor > 0.0) {
            return fail("rate multipliers must be positive".into());
        }
        if self.scheduler_step == 0 {
            return fail("scheduler_step must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} not in [0, 1)", self.dropout));
        }
        if self.lambda1 < 0.0 || self.lambda2 < 0.0 {
            return fail("loss weights must be nonnegative".into());
        }
        if !(self.delta >= 0.0) {
            return fail(format!("delta {} must be nonnegative", self.delta));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return fail(format!("epsilon {} not in [0, 1)", self.epsilon));
        }
        if self.n_classes < 2 {
            return fail("n_classes must be at least 2".into());
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fsutil::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parse `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut c = ModelConfig::default();
        for (line_no, key, value) in key_values(text, origin)? {
            let bad = |e: String| Error::Parse {
                path: origin.to_string(),
                line: line_no,
                message: format!("{key}: {e}"),
            };
            match key.as_str() {
                "d" => c.d = parse_val(&value).map_err(bad)?,
                "clusters" | "c" => {
                    c.clusters = if value == "auto" {
                        None
                    } else {
                        Some(parse_val(&value).map_err(bad)?)
                    }
                }
                "heads" => c.heads = parse_val(&value).map_err(bad)?,
                "recurrent_layers" => c.recurrent_layers = parse_val(&value).map_err(bad)?,
                "min_seq_len" => c.min_seq_len = parse_val(&value).map_err(bad)?,
                "window" => c.window = parse_val(&value).map_err(bad)?,
                "learning_rate" => c.learning_rate = parse_val(&value).map_err(bad)?,
                "hyper_lr_multiplier" => c.hyper_lr_multiplier = parse_val(&value).map_err(bad)?,
                "dropout" => c.dropout = parse_val(&value).map_err(bad)?,
                "scheduler_step" => c.scheduler_step = parse_val(&value).map_err(bad)?,
                "scheduler_factor" => c.scheduler_factor = parse_val(&value).map_err(bad)?,
                "lambda1" => c.lambda1 = parse_val(&value).map_err(bad)?,
                "lambda2" => c.lambda2 = parse_val(&value).map_err(bad)?,
                "delta" => c.delta = parse_val(&value).map_err(bad)?,
                "epsilon" => c.epsilon = parse_val(&value).map_err(bad)?,
                "n_classes" | "m" => c.n_classes = parse_val(&value).map_err(bad)?,
                "seed" => c.seed = parse_val(&value).map_err(bad)?,
                "variant" => c.variant = value.parse().map_err(|e: Error| bad(e.to_string()))?,
                "epochs" => c.epochs = parse_val(&value).map_err(bad)?,
                "patience" => c.patience = parse_val(&value).map_err(bad)?,
                "batch_windows" => c.batch_windows = parse_val(&value).map_err(bad)?,
                "split_mode" => c.split_mode = value.parse().map_err(|e: Error| bad(e.to_string()))?,
                "shared_embedding" => c.shared_embedding = parse_val(&value).map_err(bad)?,
                "track_train_metrics" => c.track_train_metrics = parse_val(&value).map_err(bad)?,
                _ => return Err(bad("unknown key".into())),
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn parse_val<T: FromStr>(s: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("cannot parse {s:?}: {e}"))
}

/// Split a flat config file into `(line, key, value)` triples.
pub fn key_values(text: &str, origin: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=').or_else(|| line.split_once(':')) else {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            });
        };
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
