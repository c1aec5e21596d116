use ndarray::Array2;

use super::{Document, GapSeries, ShareSeries, View};
use crate::error::{Error, Result};

/// Fraction of the documents at each timestep that mention each skill.
///
/// Documents of the other kind are ignored. A timestep without documents
/// gets an all-zero column and is listed in `empty_steps`.
pub fn compute_share_series(
    docs: &[Document],
    n_skills: usize,
    view: View,
    horizon: usize,
) -> Result<ShareSeries> {
    let mut hits = Array2::<u64>::zeros((n_skills, horizon));
    let mut totals = vec![0u64; horizon];
    for d in docs.iter().filter(|d| d.kind.view() == view) {
        if d.timestep >= horizon {
            return Err(Error::Config(format!(
                "document {} at timestep {} beyond horizon {horizon}",
                d.id, d.timestep
            )));
        }
        totals[d.timestep] += 1;
        for &s in d.skills() {
            if s >= n_skills {
                return Err(Error::Internal(format!(
                    "skill id {s} out of range for {n_skills} skills"
                )));
            }
            hits[[s, d.timestep]] += 1;
        }
    }
    let mut values = Array2::zeros((n_skills, horizon));
    let mut empty_steps = Vec::new();
    for (t, &total) in totals.iter().enumerate() {
        if total == 0 {
            log::warn!("{view} corpus has no documents at timestep {t}; shares set to 0");
            empty_steps.push(t);
            continue;
        }
        for k in 0..n_skills {
            values[[k, t]] = hits[[k, t]] as f64 / total as f64;
        }
    }
    Ok(ShareSeries {
        view,
        values,
        empty_steps,
    })
}

pub fn compute_skill_gap(demand: &ShareSeries, supply: &ShareSeries) -> Result<GapSeries> {
    if demand.values.dim() != supply.values.dim() {
        return Err(Error::Dimension(format!(
            "demand shares {:?} vs supply shares {:?}",
            demand.values.dim(),
            supply.values.dim()
        )));
    }
    Ok(GapSeries {
        values: &demand.values - &supply.values,
    })
}
