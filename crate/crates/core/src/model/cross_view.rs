//! Graph propagation over skill-view nodes.
//!
//! Rows `0..K` of the stacked representation are supply nodes and rows
//! `K..2K` demand nodes. A learned, directed adjacency is combined with the
//! fixed block-diagonal co-occurrence adjacency over two layers.

use ndarray::Array2;

use super::Forward;
use crate::tape::{Matrix, Tape, Var};

/// `relu(softmax_rows(relu(X_A X_Bᵀ − X_B X_Aᵀ)) − δ)` with
/// `X_A = tanh(αX)` and `X_B = tanh(βX)`.
///
/// The antisymmetric score keeps at most one direction of every pair
/// before the row softmax.
fn adjacency(t: &mut Tape, x: Var, alpha: Var, beta: Var, delta: f64) -> Var {
    let xa = t.scale_by(x, alpha);
    let xa = t.tanh(xa);
    let xb = t.scale_by(x, beta);
    let xb = t.tanh(xb);
    let ab = t.matmul_t(xa, xb);
    let ba = t.matmul_t(xb, xa);
    let m = t.sub(ab, ba);
    let m = t.relu(m);
    let p = t.softmax_rows(m);
    let p = t.add_scalar(p, -delta);
    t.relu(p)
}

/// Learned adjacency over all 2|K| nodes of `stacked`.
pub fn learn_adaptive_adjacency(f: &mut Forward<'_>, stacked: Var, delta: f64) -> Var {
    let alpha = f.p("cross.alpha");
    let beta = f.p("cross.beta");
    adjacency(&mut f.tape, stacked, alpha, beta, delta)
}

/// Learned adjacency computed separately inside each view and placed on
/// the block diagonal, so no edge crosses views.
pub fn learn_per_view_adjacency(f: &mut Forward<'_>, supply: Var, demand: Var, delta: f64) -> Var {
    let alpha = f.p("cross.alpha");
    let beta = f.p("cross.beta");
    let k = f.tape.shape(supply).0;
    let t = &mut f.tape;
    let a_s = adjacency(t, supply, alpha, beta, delta);
    let a_d = adjacency(t, demand, alpha, beta, delta);
    let zero = t.leaf(Array2::zeros((k, k)));
    let top = t.concat_cols(&[a_s, zero]);
    let bottom = t.concat_cols(&[zero, a_d]);
    t.concat_rows(&[top, bottom])
}

/// Two propagation layers:
/// `Z1 = relu(A_p X W_p1 + A_in X W_in1)`, `Z2 = A_p Z1 W_p2 + A_in Z1 W_in2`.
/// Without a learned adjacency only the `A_in` terms remain.
pub fn cross_view_augment(f: &mut Forward<'_>, x: Var, learned: Option<Var>, a_in: Var) -> Var {
    let z1 = propagate(f, x, learned, a_in, 1);
    let z1 = f.tape.relu(z1);
    propagate(f, z1, learned, a_in, 2)
}

fn propagate(f: &mut Forward<'_>, x: Var, learned: Option<Var>, a_in: Var, layer: usize) -> Var {
    let w_in = f.p(&format!("cross.w_in{layer}"));
    let fixed = f.tape.matmul(a_in, x);
    let fixed = f.tape.matmul(fixed, w_in);
    match learned {
        None => fixed,
        Some(a_p) => {
            let w_p = f.p(&format!("cross.w_p{layer}"));
            let adaptive = f.tape.matmul(a_p, x);
            let adaptive = f.tape.matmul(adaptive, w_p);
            f.tape.add(adaptive, fixed)
        }
    }
}

/// Evaluate the learned adjacency for fixed node features, outside any
/// model. Useful for inspection.
pub fn adaptive_adjacency(x: &Matrix, alpha: f64, beta: f64, delta: f64) -> Matrix {
    let mut t = Tape::new();
    let xv = t.leaf(x.clone());
    let a = t.constant_scalar(alpha);
    let b = t.constant_scalar(beta);
    let out = adjacency(&mut t, xv, a, b, delta);
    t.value(out).clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Init, ParamSet};
    use ndarray::array;

    #[test]
    fn zero_features_give_uniform_rows_minus_threshold() {
        let a = adaptive_adjacency(&Array2::zeros((4, 3)), 1.0, 1.0, 0.1);
        assert!(a.iter().all(|&v| (v - 0.15).abs() < 1e-15), "{a}");
        let a = adaptive_adjacency(&Array2::zeros((4, 3)), 1.0, 1.0, 1.0);
        assert!(a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rows_stay_bounded_and_diagonal_is_unscored() {
        let x = array![[0.9, -0.3], [0.1, 0.7], [-0.5, 0.4], [0.2, 0.2]];
        let a = adaptive_adjacency(&x, 1.3, 0.6, 0.01);
        for row in a.rows() {
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(row.sum() <= 1.0 + 1e-12);
        }
        // the score is antisymmetric, so the diagonal logit is zero and the
        // softmax only ever raises off-diagonal entries above it
        for i in 0..4 {
            for j in 0..4 {
                assert!(a[[i, j]] + 1e-15 >= a[[i, i]] || a[[i, j]] == 0.0);
            }
        }
    }

    #[test]
    fn equal_rates_zero_the_score() {
        // with α = β the two projections coincide and every logit is zero
        let x = array![[0.9, -0.3], [0.1, 0.7], [-0.5, 0.4]];
        let a = adaptive_adjacency(&x, 0.8, 0.8, 0.0);
        assert!(a.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    fn propagation_params(d: usize, adaptive: bool) -> ParamSet {
        let mut p = ParamSet::new();
        for l in 1..=2 {
            p.init(&format!("cross.w_in{l}"), d, d, Init::Uniform(0.5), l as u64);
            if adaptive {
                p.init(&format!("cross.w_p{l}"), d, d, Init::Uniform(0.5), 10 + l as u64);
            }
        }
        p.init("cross.alpha", 1, 1, Init::Constant(1.0), 0);
        p.init("cross.beta", 1, 1, Init::Constant(1.0), 0);
        p
    }

    #[test]
    fn propagation_matches_dense_evaluation() {
        let p = propagation_params(2, true);
        let x = array![[0.9, -0.3], [0.1, 0.7], [-0.5, 0.4], [0.2, 0.2]];
        let a_in = array![
            [1.0, 0.5, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.3, 1.0]
        ];
        let mut f = Forward::eval(&p);
        let xv = f.constant(x.clone());
        let a_p = learn_adaptive_adjacency(&mut f, xv, 0.05);
        let ai = f.constant(a_in.clone());
        let z = cross_view_augment(&mut f, xv, Some(a_p), ai);

        let ap = adaptive_adjacency(&x, 1.0, 1.0, 0.05);
        let w = |n: &str| p.get(n).unwrap().clone();
        let z1 = (ap.dot(&x).dot(&w("cross.w_p1")) + a_in.dot(&x).dot(&w("cross.w_in1"))).mapv(|v| v.max(0.0));
        let z2 = ap.dot(&z1).dot(&w("cross.w_p2")) + a_in.dot(&z1).dot(&w("cross.w_in2"));
        for (a, b) in f.tape.value(z).iter().zip(z2.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn per_view_adjacency_has_no_cross_block() {
        let p = propagation_params(2, true);
        let mut f = Forward::eval(&p);
        let s = f.constant(array![[0.9, -0.3], [0.1, 0.7]]);
        let d = f.constant(array![[-0.5, 0.4], [0.2, 0.9]]);
        let a = learn_per_view_adjacency(&mut f, s, d, 0.0);
        let a = f.tape.value(a);
        assert_eq!(a.dim(), (4, 4));
        for i in 0..2 {
            for j in 2..4 {
                assert_eq!(a[[i, j]], 0.0);
                assert_eq!(a[[j, i]], 0.0);
            }
            assert!((a.row(i).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_fixed_graph_and_no_learned_graph_gives_zero() {
        let p = propagation_params(2, false);
        let mut f = Forward::eval(&p);
        let x = f.constant(array![[0.9, -0.3], [0.1, 0.7]]);
        let a = f.constant(Array2::zeros((2, 2)));
        let z = cross_view_augment(&mut f, x, None, a);
        assert!(f.tape.value(z).iter().all(|&v| v == 0.0));
    }
}
