//! Central finite-difference checks of the analytic gradients.

use serde::{Deserialize, Serialize};

use super::trainer::{loss_and_gradients, loss_value};
use super::Sample;
use crate::error::{Error, Result};
use crate::model::{GraphContext, Model, ParamSet};
use crate::tape::Matrix;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor so that two near-zero gradients compare by their
/// absolute difference.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupError {
    pub group: String,
    pub max_rel_error: f64,
    pub n_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub groups: Vec<GroupError>,
}

impl GradReport {
    /// The group with the largest relative error.
    pub fn worst(&self) -> Option<&GroupError> {
        self.groups
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }

    pub fn max_rel_error(&self) -> f64 {
        self.worst().map_or(0.0, |g| g.max_rel_error)
    }

    /// Fail with the offending group if any error reaches `tolerance`.
    pub fn verify(&self, tolerance: f64) -> Result<()> {
        match self.worst() {
            Some(g) if !(g.max_rel_error < tolerance) => Err(Error::GradientCheck {
                group: g.group.clone(),
                rel_error: g.max_rel_error,
            }),
            _ => Ok(()),
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compare `analytic` (one matrix per parameter) against central
/// differences of `loss` with step `h`, entry by entry.
pub fn finite_difference_check(
    params: &ParamSet,
    analytic: &[Matrix],
    h: f64,
    mut loss: impl FnMut(&ParamSet) -> Result<f64>,
) -> Result<GradReport> {
    if analytic.len() != params.len() {
        return Err(Error::Dimension(format!(
            "{} gradients for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    let mut work = params.clone();
    let mut groups = Vec::with_capacity(params.len());
    for (i, grad) in analytic.iter().enumerate() {
        let name = params.name(i).to_string();
        if grad.dim() != params.values()[i].dim() {
            return Err(Error::Dimension(format!("gradient for {name} has shape {:?}", grad.dim())));
        }
        let mut worst: f64 = 0.0;
        for idx in 0..grad.len() {
            let (r, c) = (idx / grad.ncols(), idx % grad.ncols());
            let orig = params.values()[i][[r, c]];
            work.values_mut()[i][[r, c]] = orig + h;
            let up = loss(&work)?;
            work.values_mut()[i][[r, c]] = orig - h;
            let down = loss(&work)?;
            work.values_mut()[i][[r, c]] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(grad[[r, c]], numeric));
        }
        groups.push(GroupError {
            group: name,
            max_rel_error: worst,
            n_checked: grad.len(),
        });
    }
    Ok(GradReport { groups })
}

/// Check the model's total loss on one window, dropout off, over every
/// parameter group. Returns the report whether or not it passes; call
/// [`GradReport::verify`] to turn a failure into an error.
pub fn check_gradients(model: &Model, sample: &Sample, graphs: &GraphContext) -> Result<GradReport> {
    let skills: Vec<usize> = (0..model.n_skills).collect();
    let (_, analytic) = loss_and_gradients(model, sample, graphs, &skills, None)?;
    let mut probe = model.clone();
    finite_difference_check(&model.params, &analytic, STEP, |p| {
        probe.params.clone_from(p);
        Ok(loss_value(&probe, sample, graphs, &skills)?.total)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn linear_toy_is_exact_to_roundoff() {
        let mut p = ParamSet::new();
        p.insert("w", array![[0.3, -1.2], [2.0, 0.7]]);
        p.insert("b", array![[0.5, -0.25]]);
        let x = array![[1.0, 2.0]];
        let c = array![[0.4], [-1.5]];
        let loss = |p: &ParamSet| -> Result<f64> {
            let y = x.dot(p.get("w").unwrap()) + p.get("b").unwrap();
            Ok(y.dot(&c)[[0, 0]])
        };
        // dL/dW = xᵀ cᵀ, dL/db = cᵀ
        let analytic = vec![x.t().dot(&c.t()), c.t().to_owned()];
        let report = finite_difference_check(&p, &analytic, STEP, loss).unwrap();
        assert!(report.max_rel_error() < 1e-7, "{report:?}");
        report.verify(TOLERANCE).unwrap();

        let mut corrupted = analytic.clone();
        corrupted[1][[0, 1]] += 0.01;
        let report = finite_difference_check(&p, &corrupted, STEP, loss).unwrap();
        let err = report.verify(TOLERANCE).unwrap_err();
        assert!(matches!(err, Error::GradientCheck { ref group, .. } if group == "b"), "{err}");
    }

    #[test]
    fn relative_error_uses_floor_near_zero() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 2e-9) - 1e-3).abs() < 1e-12);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-12);
    }
}
