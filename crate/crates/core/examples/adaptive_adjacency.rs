//! How the saturation threshold thins the learned cross-view adjacency.

use chgh::model::cross_view::adaptive_adjacency;
use ndarray::Array2;
use rand::{Rng, SeedableRng};

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let nodes = 32;
    let x = Array2::from_shape_simple_fn((nodes, 8), || rng.random_range(-1.0..1.0));
    println!("delta    edges  max entry  max row sum");
    for delta in [0.0001, 0.001, 0.01, 0.05, 0.1, 0.5] {
        let a = adaptive_adjacency(&x, 3.0, 0.5, delta);
        let edges = a.iter().filter(|&&v| v > 0.0).count();
        let max = a.iter().copied().fold(0.0, f64::max);
        let row = a.rows().into_iter().map(|r| r.sum()).fold(0.0, f64::max);
        println!("{delta:<7}  {edges:>5}  {max:>9.4}  {row:>11.4}");
    }
}
