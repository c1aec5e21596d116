//! Compare backpropagated gradients with central differences for every
//! parameter group of a tiny full model.

use chgh::config::{ModelConfig, Variant};
use chgh::model::Model;
use chgh::train::{check_gradients, Dataset};
use ndarray::Array2;
use rand::{Rng, SeedableRng};

fn main() -> chgh::Result<()> {
    let (k, t) = (8, 6);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut series = || Array2::from_shape_simple_fn((k, t), || rng.random_range(0.05..0.6));
    let (supply, demand) = (series(), series());
    let graph = Array2::from_shape_fn((k, k), |(i, j)| if (i + j) % 3 == 0 { 0.5 } else { 0.0 });
    let data = Dataset::new(supply, demand, &graph, &graph)?;
    let cfg = ModelConfig {
        d: 4,
        clusters: Some(3),
        heads: 2,
        n_classes: 3,
        window: 5,
        variant: Variant::Full,
        ..ModelConfig::default()
    };
    let model = Model::new(cfg.clone(), k)?;
    let sample = data.sample(5, &cfg)?;
    let report = check_gradients(&model, &sample, &data.graphs)?;
    for g in &report.groups {
        println!("{:<28} {:.2e}", g.group, g.max_rel_error);
    }
    println!("worst relative error {:.2e}", report.max_rel_error());
    report.verify(1e-4)
}
