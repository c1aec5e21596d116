//! The forecasting network: per-view temporal encoders, cross-view graph
//! propagation over learned and co-occurrence adjacencies, trend-cluster
//! pooling, and a decoder whose weights are generated from each skill's
//! demand-supply gap history.
//!
//! Every forward pass is recorded on a [`Tape`], so the same code path
//! serves training, evaluation and gradient checking.

pub mod cross_view;
pub mod hierarchy;
pub mod hyper;
mod params;
pub mod temporal;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::tape::{Matrix, Tape, Var};

pub use params::{fnv1a, mix_seed, Bound, Init, ParamSet};

/// Share histories for one prediction, each |K| × window.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub supply: Matrix,
    pub demand: Matrix,
    pub gap: Matrix,
}

impl ModelInput {
    pub fn n_skills(&self) -> usize {
        self.supply.nrows()
    }

    pub fn len(&self) -> usize {
        self.supply.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.supply.ncols() == 0
    }
}

/// Fixed co-occurrence structure shared by every forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphContext {
    /// Block-diagonal `[[A_supply, 0], [0, A_demand]]`, 2|K| × 2|K|.
    pub intra_view: Matrix,
}

impl GraphContext {
    pub fn new(supply: &Matrix, demand: &Matrix) -> Result<Self> {
        let k = supply.nrows();
        if supply.dim() != (k, k) || demand.dim() != (k, k) {
            return Err(Error::Dimension(format!(
                "graphs {:?} and {:?} must both be {k}x{k}",
                supply.dim(),
                demand.dim()
            )));
        }
        let mut a = Array2::zeros((2 * k, 2 * k));
        a.slice_mut(ndarray::s![..k, ..k]).assign(supply);
        a.slice_mut(ndarray::s![k.., k..]).assign(demand);
        Ok(Self { intra_view: a })
    }

    pub fn n_skills(&self) -> usize {
        self.intra_view.nrows() / 2
    }
}

/// Per-forward state: the tape, placed parameters and the dropout stream.
pub struct Forward<'p> {
    pub tape: Tape,
    pub bound: Bound<'p>,
    dropout: Option<(f64, ChaCha8Rng)>,
}

impl<'p> Forward<'p> {
    /// Evaluation mode: dropout disabled.
    pub fn eval(params: &'p ParamSet) -> Self {
        Self {
            tape: Tape::new(),
            bound: Bound::new(params),
            dropout: None,
        }
    }

    /// Training mode with inverted dropout drawn from `seed`.
    pub fn train(params: &'p ParamSet, rate: f64, seed: u64) -> Self {
        Self {
            tape: Tape::new(),
            bound: Bound::new(params),
            dropout: (rate > 0.0).then(|| (rate, ChaCha8Rng::seed_from_u64(seed))),
        }
    }

    pub fn p(&mut self, name: &str) -> Var {
        self.bound.var(&mut self.tape, name)
    }

    pub fn constant(&mut self, m: Matrix) -> Var {
        self.tape.leaf(m)
    }

    /// Inverted dropout on a hidden activation; identity in evaluation mode.
    pub fn dropout(&mut self, x: Var) -> Var {
        let Some((rate, rng)) = self.dropout.as_mut() else {
            return x;
        };
        let keep = 1.0 - *rate;
        let shape = self.tape.shape(x);
        let mask = Array2::from_shape_simple_fn(shape, || {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let m = self.tape.leaf(mask);
        self.tape.mul(x, m)
    }

    /// `x · W + b` with parameters `{prefix}.w` and `{prefix}.b`.
    pub fn linear(&mut self, prefix: &str, x: Var) -> Var {
        let w = self.p(&format!("{prefix}.w"));
        let b = self.p(&format!("{prefix}.b"));
        let xw = self.tape.matmul(x, w);
        self.tape.add_row(xw, b)
    }

    pub fn is_training(&self) -> bool {
        self.dropout.is_some()
    }
}

/// Nodes produced by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub supply_probs: Var,
    pub demand_probs: Var,
    /// Skill embedding table as placed on the tape.
    pub embedding: Var,
    /// Node-to-cluster soft assignment, when the hierarchy is active.
    pub assignment: Option<Var>,
    /// Learned adjacency over all 2|K| skill-view nodes, when active.
    pub adjacency: Option<Var>,
    /// Generated per-skill decoder weights, when the hyper-decoder is active.
    pub generated: Option<Var>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub n_skills: usize,
    pub params: ParamSet,
}

impl Model {
    pub fn new(config: ModelConfig, n_skills: usize) -> Result<Self> {
        config.validate()?;
        if n_skills == 0 {
            return Err(Error::Config("model needs at least one skill".into()));
        }
        let params = init_params(&config, n_skills);
        Ok(Self {
            config,
            n_skills,
            params,
        })
    }

    pub fn clusters(&self) -> usize {
        self.config.cluster_count(self.n_skills)
    }

    /// Record a forward pass on `f`'s tape.
    pub fn forward(&self, f: &mut Forward<'_>, input: &ModelInput, graphs: &GraphContext) -> Result<ForwardOutput> {
        let k = self.n_skills;
        if input.n_skills() != k || graphs.n_skills() != k {
            return Err(Error::Dimension(format!(
                "model has {k} skills; input has {}, graphs have {}",
                input.n_skills(),
                graphs.n_skills()
            )));
        }
        if input.len() < self.config.min_seq_len {
            return Err(Error::Config(format!(
                "sequence length {} below minimum {}",
                input.len(),
                self.config.min_seq_len
            )));
        }
        let cfg = &self.config;
        let variant = cfg.variant;

        let (emb_s, emb_d) = if cfg.shared_embedding {
            let e = f.p("embedding");
            (e, e)
        } else {
            (f.p("supply.embedding"), f.p("demand.embedding"))
        };
        let enc_s = temporal::encode_view(f, "supply", &input.supply, emb_s, cfg)?;
        let enc_d = temporal::encode_view(f, "demand", &input.demand, emb_d, cfg)?;
        let stacked = f.tape.concat_rows(&[enc_s, enc_d]);

        let adjacency = if variant.has_cross_view_graph() {
            Some(cross_view::learn_adaptive_adjacency(f, stacked, cfg.delta))
        } else if variant.has_adaptive_graph() {
            Some(cross_view::learn_per_view_adjacency(f, enc_s, enc_d, cfg.delta))
        } else {
            None
        };
        let a_in = f.constant(graphs.intra_view.clone());
        let propagated = cross_view::cross_view_augment(f, stacked, adjacency, a_in);

        let (aggregated, assignment) = if variant.has_hierarchy() {
            let s = hierarchy::assign_clusters(f, propagated);
            let pooled = hierarchy::pool_clusters(f, s, propagated);
            let enhanced = hierarchy::hierarchical_augment(f, propagated, pooled);
            (hyper::aggregate_representations(f, propagated, enhanced), Some(s))
        } else {
            (propagated, None)
        };
        let agg_s = f.tape.slice_rows(aggregated, 0, k);
        let agg_d = f.tape.slice_rows(aggregated, k, k);

        let (supply_probs, demand_probs, generated) = if variant.has_hyper_decoder() {
            let cond = hyper::encode_gap_condition(f, &input.gap, emb_s);
            let theta = hyper::generate_decoder_weights(f, cond);
            let (ps, pd) = hyper::decode_joint(f, agg_s, agg_d, Some(theta), cfg);
            (ps, pd, Some(theta))
        } else {
            let (ps, pd) = hyper::decode_joint(f, agg_s, agg_d, None, cfg);
            (ps, pd, None)
        };
        Ok(ForwardOutput {
            supply_probs,
            demand_probs,
            embedding: emb_s,
            assignment,
            adjacency,
            generated,
        })
    }
}

/// All parameters for `config.variant`, initialized from `config.seed`.
pub fn init_params(cfg: &ModelConfig, n_skills: usize) -> ParamSet {
    let d = cfg.d;
    let m = cfg.n_classes;
    let seed = cfg.seed;
    let glorot = |fan_in: usize| Init::Uniform(1.0 / (fan_in as f64).sqrt());
    let mut p = ParamSet::new();
    if cfg.shared_embedding {
        p.init("embedding", n_skills, d, glorot(d), seed);
    } else {
        p.init("supply.embedding", n_skills, d, glorot(d), seed);
        p.init("demand.embedding", n_skills, d, glorot(d), seed);
    }
    for view in ["supply", "demand"] {
        p.init(&format!("{view}.lift1.w"), 1, d, Init::Uniform(1.0), seed);
        p.init(&format!("{view}.lift1.b"), 1, d, glorot(d), seed);
        p.init(&format!("{view}.lift2.w"), d, d, glorot(d), seed);
        p.init(&format!("{view}.lift2.b"), 1, d, Init::Zeros, seed);
        for layer in 0..cfg.recurrent_layers {
            init_lstm(&mut p, &format!("{view}.lstm{layer}"), d, d, seed);
        }
        p.init(&format!("{view}.fuse_proj"), 2 * d, d, glorot(2 * d), seed);
        p.init(&format!("{view}.fuse.w"), d, d, glorot(d), seed);
        p.init(&format!("{view}.fuse.b"), 1, d, Init::Zeros, seed);
    }
    if cfg.variant.has_adaptive_graph() {
        p.init("cross.alpha", 1, 1, Init::Constant(1.0), seed);
        p.init("cross.beta", 1, 1, Init::Constant(1.0), seed);
    }
    for layer in 1..=2 {
        if cfg.variant.has_adaptive_graph() {
            p.init(&format!("cross.w_p{layer}"), d, d, glorot(d), seed);
        }
        p.init(&format!("cross.w_in{layer}"), d, d, glorot(d), seed);
    }
    if cfg.variant.has_hierarchy() {
        p.init("hier.assign", cfg.cluster_count(n_skills), d, glorot(d), seed);
    }
    if cfg.variant.has_hyper_decoder() {
        init_lstm(&mut p, "gap.lstm", 1, d, seed);
        p.init("hyper.l1.w", d, d, glorot(d), seed);
        p.init("hyper.l1.b", 1, d, Init::Zeros, seed);
        p.init("hyper.l2.w", d, cfg.generated_decoder_len(), Init::Zeros, seed);
        p.init("hyper.l2.b", 1, cfg.generated_decoder_len(), glorot(d), seed);
    }
    for view in ["supply", "demand"] {
        p.init(&format!("decoder.{view}.l1.w"), d, d, glorot(d), seed);
        p.init(&format!("decoder.{view}.l1.b"), 1, d, Init::Zeros, seed);
        p.init(&format!("decoder.{view}.l2.w"), d, d, glorot(d), seed);
        p.init(&format!("decoder.{view}.l2.b"), 1, d, Init::Zeros, seed);
        p.init(&format!("decoder.{view}.l3.w"), d, m, glorot(d), seed);
        p.init(&format!("decoder.{view}.l3.b"), 1, m, Init::Zeros, seed);
    }
    p
}

fn init_lstm(p: &mut ParamSet, prefix: &str, input: usize, hidden: usize, seed: u64) {
    let scale = Init::Uniform(1.0 / (hidden as f64).sqrt());
    p.init(&format!("{prefix}.wx"), input, 4 * hidden, scale, seed);
    p.init(&format!("{prefix}.wh"), hidden, 4 * hidden, scale, seed);
    // gate order i, f, g, o; forget bias starts at 1
    let mut b = Array2::zeros((1, 4 * hidden));
    b.slice_mut(ndarray::s![.., hidden..2 * hidden]).fill(1.0);
    p.insert(&format!("{prefix}.b"), b);
}

/// Names of parameters that belong to a hypernetwork.
pub fn is_hyper_param(name: &str) -> bool {
    name.starts_with("hyper.")
}
