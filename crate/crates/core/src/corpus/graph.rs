use std::collections::HashMap;

use super::{Document, SkillGraph, View};
use crate::error::{Error, Result};

/// Normalized co-occurrence graph: `R[i][j] = #docs(i and j) / #docs(i)`,
/// kept where `R[i][j] > epsilon`. Skills that never occur have empty rows.
///
/// Every document passed in contributes, so callers restrict `docs` to one
/// kind and to the training period first.
pub fn build_cooccurrence_graph(
    docs: &[Document],
    n_skills: usize,
    view: View,
    epsilon: f64,
) -> Result<SkillGraph> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Config(format!("epsilon {epsilon} not in [0, 1)")));
    }
    let mut occurrences = vec![0u64; n_skills];
    let mut pairs: HashMap<(usize, usize), u64> = HashMap::new();
    for d in docs {
        let skills = d.skills();
        for &i in skills {
            if i >= n_skills {
                return Err(Error::Internal(format!(
                    "skill id {i} out of range for {n_skills} skills"
                )));
            }
            occurrences[i] += 1;
            for &j in skills {
                *pairs.entry((i, j)).or_default() += 1;
            }
        }
    }
    let edges = pairs.into_iter().filter_map(|((i, j), both)| {
        let r = both as f64 / occurrences[i] as f64;
        (r > epsilon).then_some((i, j, r))
    });
    SkillGraph::from_edges(view, epsilon, n_skills, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DocumentKind;

    fn docs(sets: &[&[usize]]) -> Vec<Document> {
        sets.iter()
            .map(|s| Document::new("d", DocumentKind::JobDescription, 0, s.iter().copied()))
            .collect()
    }

    #[test]
    fn normalization_is_by_source_count() {
        // {a,b},{a,b},{a}
        let g = build_cooccurrence_graph(&docs(&[&[0, 1], &[0, 1], &[0]]), 2, View::Demand, 0.5)
            .unwrap();
        assert_eq!(g.weight(0, 1), 2.0 / 3.0);
        assert_eq!(g.weight(1, 0), 1.0);
        assert_eq!(g.weight(0, 0), 1.0);
        assert_eq!(g.weight(1, 1), 1.0);
    }

    #[test]
    fn high_threshold_keeps_only_certain_edges() {
        let g = build_cooccurrence_graph(&docs(&[&[0, 1], &[0, 1], &[0]]), 2, View::Demand, 0.99)
            .unwrap();
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
    }

    #[test]
    fn absent_skill_has_empty_row() {
        let g = build_cooccurrence_graph(&docs(&[&[0, 1]]), 3, View::Supply, 0.0).unwrap();
        for j in 0..3 {
            assert_eq!(g.weight(2, j), 0.0);
            assert_eq!(g.weight(j, 2), 0.0);
        }
    }

    #[test]
    fn epsilon_out_of_range_is_config_error() {
        assert!(build_cooccurrence_graph(&[], 1, View::Demand, 1.0).is_err());
        assert!(build_cooccurrence_graph(&[], 1, View::Demand, -0.1).is_err());
    }
}
