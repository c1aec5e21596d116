//! Training objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelMatrix;
use crate::tape::{Matrix, Tape, Var};

/// Log arguments are clamped here before taking the log.
pub const LOG_FLOOR: f64 = 1e-12;

/// Loss components of one step and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBundle {
    pub main: f64,
    pub cluster: f64,
    pub l2: f64,
    pub total: f64,
}

impl LossBundle {
    /// Componentwise mean.
    pub fn mean(items: &[LossBundle]) -> LossBundle {
        let n = items.len().max(1) as f64;
        let sum = |f: fn(&LossBundle) -> f64| items.iter().map(f).sum::<f64>() / n;
        LossBundle {
            main: sum(|b| b.main),
            cluster: sum(|b| b.cluster),
            l2: sum(|b| b.l2),
            total: sum(|b| b.total),
        }
    }
}

/// `main + λ1·cluster + λ2·l2`.
pub fn total_loss(main: f64, cluster: f64, l2: f64, lambda1: f64, lambda2: f64) -> Result<LossBundle> {
    let total = main + lambda1 * cluster + lambda2 * l2;
    for (name, v) in [("main", main), ("cluster", cluster), ("l2", l2), ("total", total)] {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("{name} loss is {v}")));
        }
    }
    Ok(LossBundle { main, cluster, l2, total })
}

/// Joint cross-entropy `−(Σ y_S ln p_S + Σ y_D ln p_D) / 2|K|` over every skill.
pub fn main_loss(
    supply_probs: &Matrix,
    demand_probs: &Matrix,
    supply: &LabelMatrix,
    demand: &LabelMatrix,
) -> Result<f64> {
    let ys = supply.onehot();
    let yd = demand.onehot();
    for (p, y) in [(supply_probs, &ys), (demand_probs, &yd)] {
        if p.dim() != y.dim() {
            return Err(Error::Dimension(format!(
                "predictions {:?} vs labels {:?}",
                p.dim(),
                y.dim()
            )));
        }
    }
    let k = ys.nrows();
    if k == 0 {
        return Ok(0.0);
    }
    let term = |p: &Matrix, y: &Matrix| -> f64 {
        p.iter()
            .zip(y.iter())
            .filter(|(_, &y)| y != 0.0)
            .map(|(&p, &y)| y * p.max(LOG_FLOOR).ln())
            .sum()
    };
    Ok(-(term(supply_probs, &ys) + term(demand_probs, &yd)) / (2 * k) as f64)
}

/// Tape version of [`main_loss`] over a subset of skills: `ys` and `yd`
/// are one-hot with all-zero rows for skills left out, and `n_scored` is
/// the number of rows that are not left out.
pub fn main_loss_node(t: &mut Tape, ps: Var, pd: Var, ys: Matrix, yd: Matrix, n_scored: usize) -> Var {
    let ys = t.leaf(ys);
    let yd = t.leaf(yd);
    let ls = t.ln_clamped(ps, LOG_FLOOR);
    let ld = t.ln_clamped(pd, LOG_FLOOR);
    let a = t.mul(ys, ls);
    let b = t.mul(yd, ld);
    let both = t.add(a, b);
    let s = t.sum(both);
    t.scale(s, -1.0 / (2 * n_scored.max(1)) as f64)
}

/// One-hot labels restricted to `skills`.
pub fn masked_onehot(labels: &LabelMatrix, skills: &[usize]) -> Matrix {
    let mut m = Matrix::zeros((labels.n_skills(), labels.n_classes));
    for &k in skills {
        m[[k, labels.classes[k]]] = 1.0;
    }
    m
}
