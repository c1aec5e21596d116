//! Label next-step shares with equal-frequency trend classes.

use chgh::corpus::View;
use chgh::labels::discretize_shares;
use ndarray::array;

fn main() -> chgh::Result<()> {
    // Seven skills, five history steps each.
    let history = array![
        [0.10, 0.11, 0.12, 0.13, 0.14],
        [0.30, 0.28, 0.26, 0.24, 0.22],
        [0.05, 0.05, 0.05, 0.05, 0.05],
        [0.20, 0.25, 0.20, 0.25, 0.20],
        [0.40, 0.41, 0.39, 0.40, 0.41],
        [0.02, 0.03, 0.02, 0.03, 0.02],
        [0.15, 0.14, 0.16, 0.15, 0.14],
    ];
    let next = array![0.16, 0.20, 0.05, 0.30, 0.40, 0.01, 0.15];
    let (labels, state) = discretize_shares(history.view(), next.view(), 5, View::Demand)?;
    println!("skill  z-score  class");
    for k in 0..labels.n_skills() {
        println!("{k:>5}  {:>7.3}  {}", state.normalized_target[k], labels.classes[k]);
    }
    let sizes: Vec<usize> = state.class_boundaries.iter().map(|r| r.len()).collect();
    println!("class sizes {sizes:?}");

    // Rescaling one skill's history and target leaves every class unchanged.
    let mut h2 = history.clone();
    let mut n2 = next.clone();
    h2.row_mut(3).mapv_inplace(|v| 3.0 * v + 1.0);
    n2[3] = 3.0 * n2[3] + 1.0;
    let (again, _) = discretize_shares(h2.view(), n2.view(), 5, View::Demand)?;
    println!("unchanged after affine rescale: {}", again == labels);
    Ok(())
}
