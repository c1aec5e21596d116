//! Gap-conditioned decoding.
//!
//! A recurrent encoder summarizes each skill's demand-supply gap history
//! into a condition vector; a hypernetwork maps it to the weights of a
//! small per-skill decoder shared by both views. A fixed supportive
//! decoder per view is always present and its logits are added.

use super::temporal::lstm_step;
use super::Forward;
use crate::config::ModelConfig;
use crate::tape::{Matrix, Var};

/// `ē = Ẽ + Ê`.
pub fn aggregate_representations(f: &mut Forward<'_>, e_tilde: Var, e_hat: Var) -> Var {
    f.tape.add(e_tilde, e_hat)
}

/// Final hidden state of the gap LSTM (hidden state starts at `init`),
/// standardized per skill. `gap` is |K| × T.
pub fn encode_gap_condition(f: &mut Forward<'_>, gap: &Matrix, init: Var) -> Var {
    let shape = f.tape.shape(init);
    let mut h = init;
    let mut c = f.constant(Matrix::zeros(shape));
    for col in gap.columns() {
        let x = f.constant(col.to_owned().insert_axis(ndarray::Axis(1)));
        (h, c) = lstm_step(f, "gap.lstm", x, h, c);
    }
    f.tape.standardize_rows(h)
}

/// Per-skill generated decoder parameters θ, |K| × (d·d + d + d·m + m).
pub fn generate_decoder_weights(f: &mut Forward<'_>, cond: Var) -> Var {
    let h = f.linear("hyper.l1", cond);
    let h = f.tape.relu(h);
    let h = f.dropout(h);
    f.linear("hyper.l2", h)
}

/// Apply the generated decoder `d → d (relu) → m`, one weight set per row.
fn generated_logits(f: &mut Forward<'_>, x: Var, theta: Var, cfg: &ModelConfig) -> Var {
    let (d, m) = (cfg.d, cfg.n_classes);
    let t = &mut f.tape;
    let w1 = t.slice_cols(theta, 0, d * d);
    let b1 = t.slice_cols(theta, d * d, d);
    let w2 = t.slice_cols(theta, d * d + d, d * m);
    let b2 = t.slice_cols(theta, d * d + d + d * m, m);
    let h = t.rowwise_matvec(x, w1);
    let h = t.add(h, b1);
    let h = t.relu(h);
    let h = f.dropout(h);
    let out = f.tape.rowwise_matvec(h, w2);
    f.tape.add(out, b2)
}

/// Three-layer supportive decoder for one view.
fn supportive_logits(f: &mut Forward<'_>, view: &str, x: Var) -> Var {
    let mut h = x;
    for layer in 1..=2 {
        h = f.linear(&format!("decoder.{view}.l{layer}"), h);
        h = f.tape.relu(h);
        h = f.dropout(h);
    }
    f.linear(&format!("decoder.{view}.l3"), h)
}

/// Class probabilities `(P_supply, P_demand)`, each |K| × m.
pub fn decode_joint(
    f: &mut Forward<'_>,
    supply: Var,
    demand: Var,
    theta: Option<Var>,
    cfg: &ModelConfig,
) -> (Var, Var) {
    let mut probs = [supply, demand];
    for (slot, view) in probs.iter_mut().zip(["supply", "demand"]) {
        let mut logits = supportive_logits(f, view, *slot);
        if let Some(theta) = theta {
            let generated = generated_logits(f, *slot, theta, cfg);
            logits = f.tape.add(logits, generated);
        }
        *slot = f.tape.softmax_rows(logits);
    }
    (probs[0], probs[1])
}
