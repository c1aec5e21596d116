//! Equal-frequency trend classes and the classification metrics used to
//! score trend predictions.

use std::ops::Range;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::corpus::View;
use crate::error::{Error, Result};

/// Intermediate values of one discretization, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationState {
    pub mean_per_skill: Vec<f64>,
    pub std_per_skill: Vec<f64>,
    pub normalized_target: Vec<f64>,
    /// Skill ids in ascending order of normalized target.
    pub sorted_order: Vec<usize>,
    /// Positions in `sorted_order` covered by each class, lowest class first.
    pub class_boundaries: Vec<Range<usize>>,
}

/// One class index per skill; class 0 is the lowest trend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    pub view: View,
    pub n_classes: usize,
    pub classes: Vec<usize>,
}

impl LabelMatrix {
    pub fn n_skills(&self) -> usize {
        self.classes.len()
    }

    pub fn onehot(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.classes.len(), self.n_classes));
        for (k, &c) in self.classes.iter().enumerate() {
            m[[k, c]] = 1.0;
        }
        m
    }
}

/// Split `len` sorted positions into `n` contiguous classes whose sizes
/// differ by at most one; the lowest classes take the remainder.
pub fn class_boundaries(len: usize, n: usize) -> Vec<Range<usize>> {
    let base = len / n;
    let extra = len % n;
    let mut start = 0;
    (0..n)
        .map(|i| {
            let size = base + usize::from(i < extra);
            let r = start..start + size;
            start += size;
            r
        })
        .collect()
}

/// Label each skill's next-step share by standardizing it against the
/// skill's own history and binning the standardized values across skills
/// into `n` equal-frequency classes.
///
/// `history` is |K| × steps. Standard deviation uses the population
/// formula; a skill with zero spread gets normalized value 0. Ties in the
/// sort keep ascending skill id order.
pub fn discretize_shares(
    history: ArrayView2<'_, f64>,
    target: ArrayView1<'_, f64>,
    n: usize,
    view: View,
) -> Result<(LabelMatrix, DiscretizationState)> {
    let (k, steps) = history.dim();
    if steps < 2 {
        return Err(Error::Config(format!(
            "discretizing needs at least 2 history steps, got {steps}"
        )));
    }
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {n}")));
    }
    if n > k {
        return Err(Error::Config(format!("{n} classes for only {k} skills")));
    }
    if target.len() != k {
        return Err(Error::Dimension(format!(
            "target has {} entries for {k} skills",
            target.len()
        )));
    }
    let mut mean_per_skill = Vec::with_capacity(k);
    let mut std_per_skill = Vec::with_capacity(k);
    let mut normalized_target = Vec::with_capacity(k);
    for (row, &y) in history.rows().into_iter().zip(target.iter()) {
        let mean = row.sum() / steps as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / steps as f64;
        // roundoff in the mean can leave a constant row with a tiny variance
        let constant = row.iter().all(|&v| v == row[0]);
        let sd = if constant { 0.0 } else { var.sqrt() };
        let z = if sd > 0.0 { (y - mean) / sd } else { 0.0 };
        mean_per_skill.push(mean);
        std_per_skill.push(sd);
        normalized_target.push(z);
    }
    let mut sorted_order: Vec<usize> = (0..k).collect();
    sorted_order.sort_by(|&a, &b| normalized_target[a].total_cmp(&normalized_target[b]));
    let bounds = class_boundaries(k, n);
    let mut classes = vec![0; k];
    for (c, r) in bounds.iter().enumerate() {
        for &skill in &sorted_order[r.clone()] {
            classes[skill] = c;
        }
    }
    Ok((
        LabelMatrix {
            view,
            n_classes: n,
            classes,
        },
        DiscretizationState {
            mean_per_skill,
            std_per_skill,
            normalized_target,
            sorted_order,
            class_boundaries: bounds,
        },
    ))
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn argmax_rows(probs: ArrayView2<'_, f64>) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &p) in row.iter().enumerate() {
                if p > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_len(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Fraction of skills whose supply and demand classes are both right.
pub fn joint_accuracy(
    pred_s: &[usize],
    pred_d: &[usize],
    true_s: &[usize],
    true_d: &[usize],
) -> Result<f64> {
    let n = pred_s.len();
    for len in [pred_d.len(), true_s.len(), true_d.len()] {
        check_len(n, len)?;
    }
    if n == 0 {
        return Ok(0.0);
    }
    let hits = (0..n)
        .filter(|&k| pred_s[k] == true_s[k] && pred_d[k] == true_d[k])
        .count();
    Ok(hits as f64 / n as f64)
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Dimension(format!("length {a} vs {b}")))
    }
}

/// Metrics for one view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewMetrics {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub auc: f64,
}

/// Summary over both views, averaged, plus joint accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub auc: f64,
    pub joint_accuracy: f64,
}

/// Accuracy, support-weighted F1 and support-weighted one-vs-rest AUC.
///
/// `probs` rows must sum to 1 within 1e-6. Classes absent from `truth`
/// carry zero F1 weight and are skipped in the AUC average, as are classes
/// for which every instance is positive.
pub fn classification_metrics(probs: ArrayView2<'_, f64>, truth: &[usize]) -> Result<ViewMetrics> {
    let (n, m) = probs.dim();
    check_len(n, truth.len())?;
    for (i, row) in probs.rows().into_iter().enumerate() {
        let s = row.sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::Numeric(format!("probability row {i} sums to {s}")));
        }
    }
    if let Some(&bad) = truth.iter().find(|&&c| c >= m) {
        return Err(Error::Dimension(format!("label {bad} for {m} classes")));
    }
    if n == 0 {
        return Ok(ViewMetrics {
            accuracy: 0.0,
            weighted_f1: 0.0,
            auc: 0.0,
        });
    }
    let pred = argmax_rows(probs);
    let acc = accuracy(&pred, truth)?;

    let mut support = vec![0usize; m];
    let mut tp = vec![0usize; m];
    let mut predicted = vec![0usize; m];
    for (&p, &t) in pred.iter().zip(truth) {
        support[t] += 1;
        predicted[p] += 1;
        if p == t {
            tp[t] += 1;
        }
    }
    let mut f1 = 0.0;
    for c in 0..m {
        if support[c] == 0 {
            continue;
        }
        let precision = if predicted[c] > 0 {
            tp[c] as f64 / predicted[c] as f64
        } else {
            0.0
        };
        let recall = tp[c] as f64 / support[c] as f64;
        let f = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        f1 += f * support[c] as f64 / n as f64;
    }

    let mut auc_sum = 0.0;
    let mut auc_weight = 0.0;
    for c in 0..m {
        if support[c] == 0 || support[c] == n {
            continue;
        }
        let scores: Vec<f64> = probs.column(c).to_vec();
        let positive: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        auc_sum += binary_auc(&scores, &positive) * support[c] as f64;
        auc_weight += support[c] as f64;
    }
    let auc = if auc_weight > 0.0 {
        auc_sum / auc_weight
    } else {
        0.5
    };
    Ok(ViewMetrics {
        accuracy: acc,
        weighted_f1: f1,
        auc,
    })
}

/// Mann-Whitney AUC with average ranks for tied scores.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = n as f64 - n_pos;
    let rank_sum: f64 = (0..n).filter(|&i| positive[i]).map(|i| ranks[i]).sum();
    (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg)
}

/// Write `skill_id,view,class` rows for each label matrix.
pub fn write_labels_csv(path: &Path, labels: &[&LabelMatrix]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Internal(e.to_string());
    w.write_record(["skill_id", "view", "class"]).map_err(csv_err)?;
    for l in labels {
        for (k, c) in l.classes.iter().enumerate() {
            w.write_record([k.to_string(), l.view.to_string(), c.to_string()])
                .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    crate::fsutil::write_file_atomically(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    #[test]
    fn ten_skills_five_classes_two_each() {
        let history = Array2::from_shape_fn((10, 4), |(k, t)| (k * 7 + t * 3) as f64 % 5.0);
        let target = Array1::from_shape_fn(10, |k| k as f64 * 0.3);
        let (labels, state) = discretize_shares(history.view(), target.view(), 5, View::Demand).unwrap();
        let mut counts = [0; 5];
        for c in labels.classes {
            counts[c] += 1;
        }
        assert_eq!(counts, [2; 5]);
        assert_eq!(state.class_boundaries.len(), 5);
    }

    #[test]
    fn hand_computed_standardization() {
        // means 0.1, 0.2, 0.3 and population std 0.05 each
        let history = array![[0.05, 0.15], [0.15, 0.25], [0.25, 0.35]];
        let target = array![0.2, 0.2, 0.2];
        let (labels, state) = discretize_shares(history.view(), target.view(), 3, View::Demand).unwrap();
        let expect = [2.0, 0.0, -2.0];
        for (z, e) in state.normalized_target.iter().zip(expect) {
            assert!((z - e).abs() < 1e-9, "{z} vs {e}");
        }
        // skill 3 low, skill 2 medium, skill 1 high
        assert_eq!(labels.classes, vec![2, 1, 0]);
        assert_eq!(state.sorted_order, vec![2, 1, 0]);
    }

    #[test]
    fn constant_history_normalizes_to_zero() {
        let history = array![[0.3, 0.3, 0.3], [0.1, 0.2, 0.3], [0.3, 0.2, 0.1]];
        let target = array![0.9, 0.4, 0.0];
        let (labels, state) = discretize_shares(history.view(), target.view(), 3, View::Supply).unwrap();
        assert_eq!(state.std_per_skill[0], 0.0);
        assert_eq!(state.normalized_target[0], 0.0);
        // z = (-2.449, 0, 2.449) for skills 2,0,1 → 0 is the middle class
        assert_eq!(labels.classes[0], 1);
    }

    #[test]
    fn remainder_goes_to_lowest_classes() {
        let b = class_boundaries(7, 5);
        let sizes: Vec<usize> = b.iter().map(|r| r.len()).collect();
        assert_eq!(sizes, vec![2, 2, 1, 1, 1]);
        assert_eq!(b.last().unwrap().end, 7);
    }

    #[test]
    fn ties_keep_skill_id_order() {
        let history = array![[0.0, 1.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]];
        let target = array![0.5, 0.5, 0.5, 0.5];
        let (labels, _) = discretize_shares(history.view(), target.view(), 2, View::Demand).unwrap();
        assert_eq!(labels.classes, vec![0, 0, 1, 1]);
    }

    #[test]
    fn discretizer_errors() {
        let h = Array2::<f64>::zeros((3, 1));
        let t = Array1::<f64>::zeros(3);
        assert!(discretize_shares(h.view(), t.view(), 2, View::Demand).is_err());
        let h = Array2::<f64>::zeros((3, 4));
        assert!(matches!(
            discretize_shares(h.view(), t.view(), 4, View::Demand),
            Err(Error::Config(_))
        ));
        assert!(discretize_shares(h.view(), t.view(), 1, View::Demand).is_err());
    }

    #[test]
    fn joint_accuracy_cases() {
        let t = [0, 1, 2, 3];
        assert_eq!(joint_accuracy(&t, &t, &t, &t).unwrap(), 1.0);
        // both right for skills 0 and 3 only
        let ps = [0, 1, 0, 3];
        let pd = [0, 0, 2, 3];
        assert_eq!(joint_accuracy(&ps, &pd, &t, &t).unwrap(), 0.5);
        let wrong = [1, 2, 3, 0];
        assert_eq!(joint_accuracy(&t, &wrong, &t, &t).unwrap(), 0.0);
        assert!(matches!(
            joint_accuracy(&t, &t[..3], &t, &t),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn perfect_predictions_score_one() {
        let truth = [0, 1, 2, 1, 0];
        let mut probs = Array2::zeros((5, 3));
        for (i, &c) in truth.iter().enumerate() {
            probs[[i, c]] = 1.0;
        }
        let m = classification_metrics(probs.view(), &truth).unwrap();
        assert_eq!((m.accuracy, m.weighted_f1, m.auc), (1.0, 1.0, 1.0));
    }

    #[test]
    fn uniform_predictions_break_ties_to_class_zero() {
        // 10 skills, 2 per class
        let truth: Vec<usize> = (0..10).map(|i| i / 2).collect();
        let probs = Array2::from_elem((10, 5), 0.2);
        let m = classification_metrics(probs.view(), &truth).unwrap();
        assert_eq!(argmax_rows(probs.view()), vec![0; 10]);
        assert!((m.accuracy - 0.2).abs() < 1e-12);
        // class 0: precision 0.2, recall 1 → F1 1/3, weight 0.2
        assert!((m.weighted_f1 - 0.2 / 3.0).abs() < 1e-12);
        assert!((m.auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hand_confusion_matrix() {
        // truth 0,1,1; predictions 0,1,0
        let probs = array![[0.7, 0.3], [0.2, 0.8], [0.6, 0.4]];
        let truth = [0, 1, 1];
        let m = classification_metrics(probs.view(), &truth).unwrap();
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-12);
        // class 0: P=1/2 R=1 F1=2/3 (w 1/3); class 1: P=1 R=1/2 F1=2/3 (w 2/3)
        assert!((m.weighted_f1 - 2.0 / 3.0).abs() < 1e-12);
        // class-1 scores 0.3 (neg), 0.8, 0.4 (pos): both positives outrank → 1
        // class-0 scores 0.7 (pos) vs 0.2, 0.6 → 1; weighted mean 1
        assert!((m.auc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn absent_class_is_skipped() {
        let probs = array![[0.5, 0.3, 0.2], [0.1, 0.6, 0.3]];
        let truth = [0, 1];
        let m = classification_metrics(probs.view(), &truth).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.weighted_f1, 1.0);
        assert_eq!(m.auc, 1.0);
    }

    #[test]
    fn non_stochastic_rows_rejected() {
        let probs = array![[0.5, 0.6]];
        assert!(classification_metrics(probs.view(), &[0]).is_err());
    }

    #[test]
    fn auc_with_ties() {
        assert_eq!(binary_auc(&[0.5, 0.5], &[true, false]), 0.5);
        assert_eq!(binary_auc(&[0.1, 0.9, 0.4], &[false, true, false]), 1.0);
        assert_eq!(binary_auc(&[0.1, 0.9, 0.4], &[true, false, false]), 0.0);
    }
}
