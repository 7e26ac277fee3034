use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::Tensor;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

/// Named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    /// `rows x cols` matrix drawn from U(-a, a), `a = sqrt(6 / (rows + cols))`.
    pub fn xavier<R: Rng>(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut R) -> ParamId {
        let a = libm::sqrt(6.0 / (rows + cols) as f64);
        let data = (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect();
        self.add(name, Tensor::new(vec![rows, cols], data).expect("shape matches data"))
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names.iter().zip(&self.tensors).enumerate().map(|(k, (n, t))| (ParamId(k), n.as_str(), t))
    }

    /// Replaces every tensor's data, checking names and shapes.
    pub fn load_from(&mut self, other: &ParamSet) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), found: other.len() });
        }
        for k in 0..self.len() {
            if self.names[k] != other.names[k] || self.tensors[k].shape() != other.tensors[k].shape() {
                return Err(invalid(alloc::format!(
                    "parameter `{}` {:?} does not match `{}` {:?}",
                    self.names[k],
                    self.tensors[k].shape(),
                    other.names[k],
                    other.tensors[k].shape()
                )));
            }
        }
        self.tensors.clone_from(&other.tensors);
        Ok(())
    }
}

/// One gradient buffer per parameter, same order and sizes as its
/// [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    bufs: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Self { bufs: params.tensors.iter().map(|t| vec![0.0; t.numel()]).collect() }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        &self.bufs[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.bufs[id.0]
    }

    pub fn len(&self) -> usize {
        self.bufs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bufs.is_empty()
    }

    pub fn zero(&mut self) {
        for b in &mut self.bufs {
            b.fill(0.0);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.bufs.iter_mut().zip(&other.bufs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for b in &mut self.bufs {
            for x in b.iter_mut() {
                *x *= c;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.bufs.iter().flatten().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.bufs.iter().flatten().map(|x| x * x).sum())
    }
}
