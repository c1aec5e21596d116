//! Brute-force reference counts, written as directly as possible and kept
//! separate from the corpus pipeline so the two can check each other.

use crate::corpus::{Document, DocumentKind};
use crate::tape::Matrix;

/// `(demand, supply)` shares, each |K| × `n_steps`, by direct scanning.
pub fn oracle_shares(docs: &[Document], n_skills: usize, n_steps: usize) -> (Matrix, Matrix) {
    let share = |kind: DocumentKind| {
        let mut m = Matrix::zeros((n_skills, n_steps));
        for t in 0..n_steps {
            let at_t: Vec<&Document> = docs.iter().filter(|d| d.kind == kind && d.timestep == t).collect();
            if at_t.is_empty() {
                continue;
            }
            for k in 0..n_skills {
                let hits = at_t.iter().filter(|d| d.skills().iter().any(|&s| s == k)).count();
                m[[k, t]] = hits as f64 / at_t.len() as f64;
            }
        }
        m
    };
    (share(DocumentKind::JobDescription), share(DocumentKind::WorkExperience))
}

/// Dense thresholded co-occurrence ratios over `docs`: entry `(i, j)` is
/// `#docs(i and j) / #docs(i)` when that exceeds `epsilon`, else 0.
pub fn oracle_graph(docs: &[Document], n_skills: usize, epsilon: f64) -> Matrix {
    let mut g = Matrix::zeros((n_skills, n_skills));
    for i in 0..n_skills {
        let with_i: Vec<&Document> = docs.iter().filter(|d| d.skills().contains(&i)).collect();
        if with_i.is_empty() {
            continue;
        }
        for j in 0..n_skills {
            let both = with_i.iter().filter(|d| d.skills().contains(&j)).count();
            let r = both as f64 / with_i.len() as f64;
            if r > epsilon {
                g[[i, j]] = r;
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(kind: DocumentKind, t: usize, skills: &[usize]) -> Document {
        Document::new(format!("{t}-{skills:?}"), kind, t, skills.to_vec())
    }

    #[test]
    fn shares_by_hand() {
        let docs = vec![
            doc(DocumentKind::JobDescription, 0, &[0]),
            doc(DocumentKind::WorkExperience, 1, &[1, 2]),
            doc(DocumentKind::WorkExperience, 1, &[2]),
        ];
        let (d, s) = oracle_shares(&docs, 3, 3);
        assert_eq!(d.column(0).to_vec(), vec![1.0, 0.0, 0.0]);
        assert!(d.column(1).iter().all(|&v| v == 0.0));
        assert_eq!(s.column(1).to_vec(), vec![0.0, 0.5, 1.0]);
        assert!(s.column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn graph_by_hand() {
        let jd = DocumentKind::JobDescription;
        let docs = vec![doc(jd, 0, &[0, 1]), doc(jd, 0, &[0, 1]), doc(jd, 0, &[0])];
        let g = oracle_graph(&docs, 3, 0.0);
        assert_eq!(g[[0, 1]], 2.0 / 3.0);
        assert_eq!(g[[1, 0]], 1.0);
        assert_eq!(g[[0, 0]], 1.0);
        assert!(g.row(2).iter().all(|&v| v == 0.0));
        let g = oracle_graph(&docs, 3, 0.7);
        assert_eq!(g[[0, 1]], 0.0);
        assert!(oracle_graph(&[], 3, 0.1).iter().all(|&v| v == 0.0));
    }
}
