use std::collections::HashMap;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tape::{Matrix, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// Uniform on `[-scale, scale]`.
    Uniform(f64),
}

/// Named parameter matrices in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Matrix>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Insert a parameter. Each parameter draws from its own stream seeded by
    /// `(seed, name)`, so its initial value does not depend on which other
    /// parameters exist.
    pub fn init(&mut self, name: &str, rows: usize, cols: usize, init: Init, seed: u64) {
        let value = match init {
            Init::Zeros => Array2::zeros((rows, cols)),
            Init::Constant(c) => Array2::from_elem((rows, cols), c),
            Init::Uniform(scale) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(name));
                Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-scale..=scale))
            }
        };
        self.insert(name, value);
    }

    pub fn insert(&mut self, name: &str, value: Matrix) {
        if let Some(&i) = self.index.get(name) {
            self.values[i] = value;
        } else {
            self.index.insert(name.to_string(), self.names.len());
            self.names.push(name.to_string());
            self.values.push(value);
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.position(name).map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.position(name).map(move |i| &mut self.values[i])
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(self.values.iter())
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (name, v) in self.iter() {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!("parameter {name} is not finite")));
            }
        }
        Ok(())
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Lazily places parameters on a tape, once each, and remembers their nodes
/// so gradients can be read back after the backward pass.
pub struct Bound<'p> {
    params: &'p ParamSet,
    vars: Vec<Option<Var>>,
}

impl<'p> Bound<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Self {
            params,
            vars: vec![None; params.len()],
        }
    }

    pub fn var(&mut self, tape: &mut Tape, name: &str) -> Var {
        let i = self
            .params
            .position(name)
            .unwrap_or_else(|| panic!("model parameter {name} was never initialized"));
        *self.vars[i].get_or_insert_with(|| tape.leaf(self.params.values[i].clone()))
    }

    /// Nodes of every parameter placed so far.
    pub fn placed(&self) -> impl Iterator<Item = (usize, Var)> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
    }

    /// Gradient per parameter, zero for parameters that were not used.
    pub fn gradients(&self, grads: &crate::tape::Gradients) -> Vec<Matrix> {
        self.params
            .values
            .iter()
            .zip(&self.vars)
            .map(|(value, var)| {
                var.and_then(|v| grads.get(v).cloned())
                    .unwrap_or_else(|| Array2::zeros(value.dim()))
            })
            .collect()
    }
}

/// 64-bit FNV-1a, used to derive stable per-parameter seeds.
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive an independent seed for stream `tag` of `seed` (SplitMix64 finalizer).
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
