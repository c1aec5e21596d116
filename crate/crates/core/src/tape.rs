//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] on a scalar (1×1) node walks the record in reverse and
//! returns the gradient of that scalar with respect to every node.
//!
//! The op set is exactly what the forecasting model needs: matrix products,
//! elementwise arithmetic with row/column broadcasting, the usual
//! activations, row-wise softmax and standardization, block slicing and
//! concatenation, and a batched per-row matrix-vector product used by the
//! generated decoders.

use ndarray::{concatenate, s, Array2, Axis, Zip};

pub type Matrix = Array2<f64>;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    AddScalar(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    LnClamped(Var, f64),
    Sum(Var),
    RowSum(Var),
    SumSq(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    StandardizeRows(Var),
    RowwiseMatVec(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Below this variance a row is treated as constant by [`Tape::standardize_rows`].
pub const DEGENERATE_VARIANCE: f64 = 1e-18;

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`]. Only leaves retain theirs.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.dim(), (1, 1));
        m[[0, 0]]
    }

    /// Parameters and constants both enter the tape as leaves.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn constant_scalar(&mut self, x: f64) -> Var {
        self.leaf(Array2::from_elem((1, 1), x))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let bt = self.transpose(b);
        self.matmul(a, bt)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "sub shape mismatch");
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    /// `a (r×c) + row (1×c)` broadcast over rows.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (_, c) = self.shape(a);
        assert_eq!(self.shape(row), (1, c), "add_row shape mismatch");
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    /// `col (r×1) ⊙ a (r×c)` broadcast over columns.
    pub fn mul_col(&mut self, col: Var, a: Var) -> Var {
        let (r, _) = self.shape(a);
        assert_eq!(self.shape(col), (r, 1), "mul_col shape mismatch");
        let v = self.value(a) * self.value(col);
        self.push(v, Op::MulCol(col, a))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        self.push(v, Op::Scale(a, k))
    }

    /// Multiply by a learnable 1×1 scalar node.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(self.shape(s), (1, 1), "scale_by expects a 1x1 scalar");
        let k = self.scalar(s);
        let v = self.value(a) * k;
        self.push(v, Op::ScaleBy(a, s))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) + k;
        self.push(v, Op::AddScalar(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        self.push(v, Op::SoftmaxRows(a))
    }

    /// `ln(max(a, floor))`; the gradient is zero where the clamp is active.
    pub fn ln_clamped(&mut self, a: Var, floor: f64) -> Var {
        let v = self.value(a).mapv(|x| x.max(floor).ln());
        self.push(v, Op::LnClamped(a, floor))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Per-row sums as an r×1 column.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(v, Op::RowSum(a))
    }

    pub fn sum_sq(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).iter().map(|x| x * x).sum());
        self.push(v, Op::SumSq(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("concat_cols row mismatch");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(0), &views).expect("concat_rows column mismatch");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(v, Op::SliceCols(a, start))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(v, Op::SliceRows(a, start))
    }

    /// Standardize each row to zero mean and unit population variance.
    /// Rows whose variance is below [`DEGENERATE_VARIANCE`] map to zero.
    pub fn standardize_rows(&mut self, a: Var) -> Var {
        let v = standardize_rows(self.value(a));
        self.push(v, Op::StandardizeRows(a))
    }

    /// Per-row matrix-vector product: row `i` of `x` (length n) times the
    /// n×m matrix stored row-major in row `i` of `w` (length n·m).
    pub fn rowwise_matvec(&mut self, x: Var, w: Var) -> Var {
        let (r, n) = self.shape(x);
        let (rw, nm) = self.shape(w);
        assert_eq!(r, rw, "rowwise_matvec row mismatch");
        assert!(n > 0 && nm % n == 0, "rowwise_matvec width mismatch");
        let m = nm / n;
        let xv = self.value(x);
        let wv = self.value(w);
        let mut out = Array2::zeros((r, m));
        for i in 0..r {
            for l in 0..n {
                let xl = xv[[i, l]];
                if xl == 0.0 {
                    continue;
                }
                for j in 0..m {
                    out[[i, j]] += xl * wv[[i, l * m + j]];
                }
            }
        }
        self.push(out, Op::RowwiseMatVec(x, w))
    }

    /// Gradient of the 1×1 node `root` with respect to every node.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.shape(root), (1, 1), "backward root must be scalar");
        let mut grads: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.t().to_owned()),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, -&g);
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddRow(a, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *row, gr);
                    accumulate(&mut grads, *a, g);
                }
                Op::MulCol(col, a) => {
                    let gc = (&g * self.value(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                    let ga = &g * self.value(*col);
                    accumulate(&mut grads, *col, gc);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Scale(a, k) => accumulate(&mut grads, *a, g * *k),
                Op::ScaleBy(a, s) => {
                    let k = self.scalar(*s);
                    let gs = (&g * self.value(*a)).sum();
                    accumulate(&mut grads, *s, Array2::from_elem((1, 1), gs));
                    accumulate(&mut grads, *a, g * k);
                }
                Op::AddScalar(a) => accumulate(&mut grads, *a, g),
                Op::Relu(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(self.value(*a))
                        .for_each(|g, &x| {
                            if x <= 0.0 {
                                *g = 0.0
                            }
                        });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(&node.value)
                        .for_each(|g, &y| *g *= 1.0 - y * y);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(&node.value)
                        .for_each(|g, &y| *g *= y * (1.0 - y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let dot = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                    let ga = y * &(&g - &dot);
                    accumulate(&mut grads, *a, ga);
                }
                Op::LnClamped(a, floor) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(self.value(*a)).for_each(|g, &x| {
                        if x > *floor {
                            *g /= x
                        } else {
                            *g = 0.0
                        }
                    });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let k = g[[0, 0]];
                    let ga = Array2::from_elem(self.shape(*a), k);
                    accumulate(&mut grads, *a, ga);
                }
                Op::RowSum(a) => {
                    let (_, c) = self.shape(*a);
                    let ga = g
                        .broadcast((g.nrows(), c))
                        .expect("row_sum broadcast")
                        .to_owned();
                    accumulate(&mut grads, *a, ga);
                }
                Op::SumSq(a) => {
                    let k = 2.0 * g[[0, 0]];
                    accumulate(&mut grads, *a, self.value(*a) * k);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let w = self.shape(*p).1;
                        let gp = g.slice(s![.., offset..offset + w]).to_owned();
                        offset += w;
                        accumulate(&mut grads, *p, gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let h = self.shape(*p).0;
                        let gp = g.slice(s![offset..offset + h, ..]).to_owned();
                        offset += h;
                        accumulate(&mut grads, *p, gp);
                    }
                }
                Op::SliceCols(a, start) => {
                    let mut ga = Array2::zeros(self.shape(*a));
                    let w = g.ncols();
                    ga.slice_mut(s![.., *start..*start + w]).assign(&g);
                    accumulate(&mut grads, *a, ga);
                }
                Op::SliceRows(a, start) => {
                    let mut ga = Array2::zeros(self.shape(*a));
                    let h = g.nrows();
                    ga.slice_mut(s![*start..*start + h, ..]).assign(&g);
                    accumulate(&mut grads, *a, ga);
                }
                Op::StandardizeRows(a) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let n = x.ncols() as f64;
                    let mut ga = Array2::zeros(x.dim());
                    for i in 0..x.nrows() {
                        let row = x.row(i);
                        let mean = row.sum() / n;
                        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                        if var < DEGENERATE_VARIANCE {
                            continue;
                        }
                        let sd = var.sqrt();
                        let gi = g.row(i);
                        let yi = y.row(i);
                        let g_mean = gi.sum() / n;
                        let gy_mean = gi.dot(&yi) / n;
                        for j in 0..x.ncols() {
                            ga[[i, j]] = (gi[j] - g_mean - yi[j] * gy_mean) / sd;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::RowwiseMatVec(x, w) => {
                    let xv = self.value(*x);
                    let wv = self.value(*w);
                    let (r, n) = xv.dim();
                    let m = g.ncols();
                    let mut gx = Array2::zeros((r, n));
                    let mut gw = Array2::zeros(wv.dim());
                    for i in 0..r {
                        for l in 0..n {
                            let xl = xv[[i, l]];
                            let mut acc = 0.0;
                            for j in 0..m {
                                let gij = g[[i, j]];
                                acc += gij * wv[[i, l * m + j]];
                                gw[[i, l * m + j]] = xl * gij;
                            }
                            gx[[i, l]] = acc;
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *w, gw);
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| (x - max).exp());
        let z = row.sum();
        row.mapv_inplace(|x| x / z);
    }
    out
}

pub fn standardize_rows(m: &Matrix) -> Matrix {
    let n = m.ncols() as f64;
    let mut out = Array2::zeros(m.dim());
    for (i, row) in m.rows().into_iter().enumerate() {
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var < DEGENERATE_VARIANCE {
            continue;
        }
        let sd = var.sqrt();
        for (j, v) in row.iter().enumerate() {
            out[[i, j]] = (v - mean) / sd;
        }
    }
    out
}
