//! Named parameter tensors and their binding onto a tape.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Parameters keyed by name; iteration order is the sorted name order,
/// which fixes the optimizer and checkpoint layout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    tensors: BTreeMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name:?}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        self.tensors.values().cloned().collect()
    }

    pub fn set_tensors(&mut self, values: Vec<Tensor>) {
        assert_eq!(values.len(), self.tensors.len(), "parameter count");
        for (slot, v) in self.tensors.values_mut().zip(values) {
            assert_eq!(slot.shape(), v.shape(), "parameter shape");
            *slot = v;
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Registers every tensor on the tape, as trainable leaves when
    /// `trainable` is set.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Bound {
        let vars = self
            .tensors
            .iter()
            .map(|(k, t)| (k.clone(), tape.leaf(t.clone(), trainable)))
            .collect();
        Bound { vars }
    }

    /// Wraps handles already on a tape, given in parameter order.
    pub fn bound_from(&self, vars: &[Var]) -> Bound {
        assert_eq!(vars.len(), self.tensors.len(), "parameter count");
        Bound {
            vars: self.tensors.keys().cloned().zip(vars.iter().copied()).collect(),
        }
    }
}

/// Tape handles for a [`ParamSet`].
#[derive(Clone, Debug)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn var(&self, name: &str) -> Var {
        match self.vars.get(name) {
            Some(v) => *v,
            None => panic!("parameter {name:?} was not bound"),
        }
    }

    pub fn get(&self, name: &str) -> Option<Var> {
        self.vars.get(name).copied()
    }

    /// Gradients in [`ParamSet`] order, zeros where a parameter was unused.
    pub fn grads(&self, tape: &Tape) -> Vec<Tensor> {
        self.vars
            .values()
            .map(|&v| {
                tape.grad(v)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(tape.shape(v)))
            })
            .collect()
    }
}

pub fn uniform(shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape")
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    uniform(&[rows, cols], (6.0 / (rows + cols) as f64).sqrt(), rng)
}

pub const ATTENTION_INIT: f64 = 0.1;

pub fn attention_vector(width: usize, rng: &mut ChaCha8Rng) -> Tensor {
    uniform(&[width, 1], ATTENTION_INIT, rng)
}
