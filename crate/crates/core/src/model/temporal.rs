//! Per-skill sequence encoding, batched over all skills of one view.
//!
//! Each skill's share sequence is lifted timestep by timestep to `d`
//! dimensions, run through a stacked LSTM whose first hidden state is the
//! skill embedding, summarized by attention keyed on the embedding, and
//! fused with the embedding.

use ndarray::Array2;

use super::Forward;
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::tape::{Matrix, Var};

/// Two-layer perceptron applied to one timestep of every skill (|K|×1 → |K|×d).
pub fn lift_sequence(f: &mut Forward<'_>, prefix: &str, x: Var) -> Var {
    let h = f.linear(&format!("{prefix}.lift1"), x);
    let h = f.tape.relu(h);
    let h = f.dropout(h);
    f.linear(&format!("{prefix}.lift2"), h)
}

/// One LSTM step for a batch of rows. Parameters `{prefix}.wx`, `.wh`, `.b`
/// hold the input, forget, cell and output gates side by side.
pub fn lstm_step(f: &mut Forward<'_>, prefix: &str, x: Var, h: Var, c: Var) -> (Var, Var) {
    let wx = f.p(&format!("{prefix}.wx"));
    let wh = f.p(&format!("{prefix}.wh"));
    let b = f.p(&format!("{prefix}.b"));
    let d = f.tape.shape(h).1;
    let t = &mut f.tape;
    let xw = t.matmul(x, wx);
    let hw = t.matmul(h, wh);
    let z = t.add(xw, hw);
    let z = t.add_row(z, b);
    let zi = t.slice_cols(z, 0, d);
    let zf = t.slice_cols(z, d, d);
    let zg = t.slice_cols(z, 2 * d, d);
    let zo = t.slice_cols(z, 3 * d, d);
    let i = t.sigmoid(zi);
    let fg = t.sigmoid(zf);
    let g = t.tanh(zg);
    let o = t.sigmoid(zo);
    let keep = t.mul(fg, c);
    let write = t.mul(i, g);
    let c_next = t.add(keep, write);
    let tc = t.tanh(c_next);
    let h_next = t.mul(o, tc);
    (h_next, c_next)
}

/// Stacked LSTM over `inputs` (one |K|×d node per timestep). The first
/// layer's hidden state starts at `init`; deeper layers and all cell states
/// start at zero. Returns the top layer's hidden state at every step.
pub fn encode_temporal(
    f: &mut Forward<'_>,
    prefix: &str,
    inputs: &[Var],
    init: Var,
    layers: usize,
) -> Vec<Var> {
    let shape = f.tape.shape(init);
    let mut seq = inputs.to_vec();
    for layer in 0..layers {
        let name = format!("{prefix}.lstm{layer}");
        let mut h = if layer == 0 {
            init
        } else {
            f.constant(Array2::zeros(shape))
        };
        let mut c = f.constant(Array2::zeros(shape));
        let mut out = Vec::with_capacity(seq.len());
        for &x in &seq {
            (h, c) = lstm_step(f, &name, x, h, c);
            out.push(h);
        }
        seq = out;
    }
    seq
}

/// Attention over timesteps keyed by the skill embedding.
///
/// Each of `heads` heads works on its own contiguous `d/heads` slice:
/// weights are `softmax_t(h_t · e / sqrt(d/heads))` and the summary is the
/// weighted sum of the hidden states. Head outputs are concatenated.
/// Returns the summary (|K|×d) and each head's weights (|K|×T).
pub fn attention_aggregate(f: &mut Forward<'_>, hs: &[Var], e: Var, heads: usize) -> (Var, Vec<Var>) {
    let d = f.tape.shape(e).1;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut summaries = Vec::with_capacity(heads);
    let mut weights = Vec::with_capacity(heads);
    for head in 0..heads {
        let t = &mut f.tape;
        let key = t.slice_cols(e, head * dh, dh);
        let slices: Vec<Var> = hs.iter().map(|&h| t.slice_cols(h, head * dh, dh)).collect();
        let scores: Vec<Var> = slices
            .iter()
            .map(|&h| {
                let prod = t.mul(h, key);
                let dot = t.row_sum(prod);
                t.scale(dot, scale)
            })
            .collect();
        let scores = t.concat_cols(&scores);
        let w = t.softmax_rows(scores);
        let mut acc: Option<Var> = None;
        for (step, &h) in slices.iter().enumerate() {
            let wt = t.slice_cols(w, step, 1);
            let term = t.mul_col(wt, h);
            acc = Some(match acc {
                None => term,
                Some(a) => t.add(a, term),
            });
        }
        summaries.push(acc.expect("attention over an empty sequence"));
        weights.push(w);
    }
    let s = if heads == 1 {
        summaries[0]
    } else {
        f.tape.concat_cols(&summaries)
    };
    (s, weights)
}

/// `([e ‖ s] · W_fuse_proj) · W + b`.
pub fn fuse(f: &mut Forward<'_>, prefix: &str, e: Var, s: Var) -> Var {
    let proj = f.p(&format!("{prefix}.fuse_proj"));
    let cat = f.tape.concat_cols(&[e, s]);
    let z = f.tape.matmul(cat, proj);
    f.linear(&format!("{prefix}.fuse"), z)
}

/// Full lift → recurrence → attention → fuse chain for one view.
/// `series` is |K| × T; returns the |K| × d view embedding.
pub fn encode_view(
    f: &mut Forward<'_>,
    prefix: &str,
    series: &Matrix,
    embedding: Var,
    cfg: &ModelConfig,
) -> Result<Var> {
    let (k, steps) = series.dim();
    if steps < cfg.min_seq_len {
        return Err(Error::Config(format!(
            "sequence length {steps} below minimum {}",
            cfg.min_seq_len
        )));
    }
    if f.tape.shape(embedding) != (k, cfg.d) {
        return Err(Error::Dimension(format!(
            "embedding {:?} for {k} skills with d={}",
            f.tape.shape(embedding),
            cfg.d
        )));
    }
    let lifted: Vec<Var> = (0..steps)
        .map(|t| {
            let col = series.column(t).to_owned().insert_axis(ndarray::Axis(1));
            let x = f.constant(col);
            lift_sequence(f, prefix, x)
        })
        .collect();
    let hs = encode_temporal(f, prefix, &lifted, embedding, cfg.recurrent_layers);
    let (s, _) = attention_aggregate(f, &hs, embedding, cfg.heads);
    Ok(fuse(f, prefix, embedding, s))
}
