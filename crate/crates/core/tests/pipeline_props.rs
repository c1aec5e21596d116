use chgh::corpus::{
    build_cooccurrence_graph, compute_share_series, compute_skill_gap, Document, DocumentKind, View,
};
use chgh::labels::{class_boundaries, discretize_shares};
use chgh::synth::{oracle_graph, oracle_shares};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

const MAX_SKILLS: usize = 7;

#[derive(Debug, Clone)]
struct Corpus {
    n_skills: usize,
    horizon: usize,
    docs: Vec<Document>,
}

fn corpus() -> impl Strategy<Value = Corpus> {
    (1..=MAX_SKILLS, 1usize..5).prop_flat_map(|(n_skills, horizon)| {
        let doc = (any::<bool>(), 0..horizon, prop::collection::vec(0..n_skills, 0..5));
        prop::collection::vec(doc, 0..40).prop_map(move |raw| Corpus {
            n_skills,
            horizon,
            docs: raw
                .into_iter()
                .enumerate()
                .map(|(i, (jd, t, skills))| {
                    let kind = if jd {
                        DocumentKind::JobDescription
                    } else {
                        DocumentKind::WorkExperience
                    };
                    Document::new(format!("d{i}"), kind, t, skills)
                })
                .collect(),
        })
    })
}

fn demand_docs(c: &Corpus) -> Vec<Document> {
    c.docs.iter().filter(|d| d.kind == DocumentKind::JobDescription).cloned().collect()
}

fn relabel(c: &Corpus, perm: &[usize]) -> Corpus {
    Corpus {
        docs: c
            .docs
            .iter()
            .map(|d| Document::new(d.id.clone(), d.kind, d.timestep, d.skills().iter().map(|&s| perm[s])))
            .collect(),
        ..c.clone()
    }
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shares_are_bounded_and_match_the_oracle(c in corpus()) {
        let demand = compute_share_series(&c.docs, c.n_skills, View::Demand, c.horizon).unwrap();
        let supply = compute_share_series(&c.docs, c.n_skills, View::Supply, c.horizon).unwrap();
        let gap = compute_skill_gap(&demand, &supply).unwrap();
        let (od, os) = oracle_shares(&c.docs, c.n_skills, c.horizon);
        prop_assert_eq!(&demand.values, &od);
        prop_assert_eq!(&supply.values, &os);
        prop_assert!(demand.values.iter().chain(supply.values.iter()).all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(gap.values.iter().all(|v| (-1.0..=1.0).contains(v)));
        prop_assert_eq!(&gap.values, &(&od - &os));
    }

    #[test]
    fn graph_matches_the_oracle_with_unit_diagonal(c in corpus(), eps in 0.0f64..0.9) {
        let docs = demand_docs(&c);
        let g = build_cooccurrence_graph(&docs, c.n_skills, View::Demand, eps).unwrap();
        prop_assert_eq!(g.to_dense(), oracle_graph(&docs, c.n_skills, eps));
        for k in 0..c.n_skills {
            let occurs = docs.iter().any(|d| d.contains(k));
            prop_assert_eq!(g.weight(k, k), if occurs { 1.0 } else { 0.0 });
        }
        prop_assert!(g.edges().all(|(_, _, w)| w > eps && w <= 1.0));
    }

    #[test]
    fn raising_epsilon_only_removes_edges(c in corpus(), a in 0.0f64..0.9, b in 0.0f64..0.9) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let docs = demand_docs(&c);
        let loose = build_cooccurrence_graph(&docs, c.n_skills, View::Demand, lo).unwrap();
        let tight = build_cooccurrence_graph(&docs, c.n_skills, View::Demand, hi).unwrap();
        prop_assert!(tight.n_edges() <= loose.n_edges());
        for (i, j, w) in tight.edges() {
            prop_assert_eq!(loose.weight(i, j), w);
        }
    }

    #[test]
    fn relabelling_skills_permutes_every_output(
        (c, perm) in corpus().prop_flat_map(|c| { let n = c.n_skills; (Just(c), permutation(n)) }),
        eps in 0.0f64..0.5,
    ) {
        let p = relabel(&c, &perm);
        for view in [View::Demand, View::Supply] {
            let base = compute_share_series(&c.docs, c.n_skills, view, c.horizon).unwrap();
            let moved = compute_share_series(&p.docs, c.n_skills, view, c.horizon).unwrap();
            for k in 0..c.n_skills {
                prop_assert_eq!(base.values.row(k), moved.values.row(perm[k]));
            }
        }
        let base = build_cooccurrence_graph(&demand_docs(&c), c.n_skills, View::Demand, eps).unwrap();
        let moved = build_cooccurrence_graph(&demand_docs(&p), c.n_skills, View::Demand, eps).unwrap();
        for i in 0..c.n_skills {
            for j in 0..c.n_skills {
                prop_assert_eq!(base.weight(i, j), moved.weight(perm[i], perm[j]));
            }
        }
    }
}

fn labelling_problem() -> impl Strategy<Value = (Array2<f64>, Array1<f64>, usize)> {
    (2usize..20, 2usize..8).prop_flat_map(|(k, steps)| {
        (
            prop::collection::vec(0.0f64..1.0, k * steps),
            prop::collection::vec(0.0f64..1.0, k),
            2..=k.min(6),
        )
            .prop_map(move |(h, t, n)| {
                (Array2::from_shape_vec((k, steps), h).unwrap(), Array1::from(t), n)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn classes_have_equal_frequency_and_follow_the_normalized_order((h, t, n) in labelling_problem()) {
        let (labels, state) = discretize_shares(h.view(), t.view(), n, View::Demand).unwrap();
        let bounds = class_boundaries(h.nrows(), n);
        for (c, r) in bounds.iter().enumerate() {
            prop_assert_eq!(labels.classes.iter().filter(|&&x| x == c).count(), r.len());
        }
        let sizes: Vec<usize> = bounds.iter().map(|r| r.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
        let z = &state.normalized_target;
        for a in 0..z.len() {
            for b in 0..z.len() {
                if z[a] < z[b] {
                    prop_assert!(labels.classes[a] <= labels.classes[b]);
                }
            }
        }
        let onehot = labels.onehot();
        prop_assert!(onehot.rows().into_iter().all(|r| r.sum() == 1.0));
    }

    #[test]
    fn constant_history_normalizes_to_zero(level in 0.0f64..1.0, target in 0.0f64..1.0, steps in 2usize..6) {
        let h = Array2::from_elem((3, steps), level);
        let t = Array1::from(vec![target; 3]);
        let (_, state) = discretize_shares(h.view(), t.view(), 2, View::Supply).unwrap();
        prop_assert!(state.normalized_target.iter().all(|&z| z == 0.0));
    }
}
