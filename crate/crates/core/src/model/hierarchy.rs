//! Soft trend-cluster pooling over skill-view nodes.

use super::Forward;
use crate::tape::Var;

/// Entropy terms below this probability are clamped before the log.
pub const ENTROPY_FLOOR: f64 = 1e-12;

/// Soft assignment `S = softmax_rows(Ẽ W_Sᵀ)`, one row per node and one
/// column per cluster. `hier.assign` holds one centroid per row.
pub fn assign_clusters(f: &mut Forward<'_>, e: Var) -> Var {
    let w = f.p("hier.assign");
    let logits = f.tape.matmul_t(e, w);
    f.tape.softmax_rows(logits)
}

/// Cluster representations `X_h = Sᵀ Ẽ` (c × d).
pub fn pool_clusters(f: &mut Forward<'_>, s: Var, e: Var) -> Var {
    let st = f.tape.transpose(s);
    f.tape.matmul(st, e)
}

/// Each node attends over clusters: `softmax_rows(Ẽ X_hᵀ / sqrt(d)) X_h`.
pub fn hierarchical_augment(f: &mut Forward<'_>, e: Var, pooled: Var) -> Var {
    let d = f.tape.shape(e).1;
    let t = &mut f.tape;
    let scores = t.matmul_t(e, pooled);
    let scores = t.scale(scores, 1.0 / (d as f64).sqrt());
    let w = t.softmax_rows(scores);
    t.matmul(w, pooled)
}

/// Mean row entropy of an assignment matrix. Low values mean confident,
/// near one-hot assignments.
pub fn cluster_entropy(f: &mut Forward<'_>, s: Var) -> Var {
    let t = &mut f.tape;
    let rows = t.shape(s).0;
    let ln = t.ln_clamped(s, ENTROPY_FLOOR);
    let plogp = t.mul(s, ln);
    let total = t.sum(plogp);
    t.scale(total, -1.0 / rows as f64)
}
