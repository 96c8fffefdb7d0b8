use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;

use crate::error::{config_err, Error, Result};
use crate::scalar::Scalar;

/// One named tensor with its gradient slot. Both always share a shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    value: Array2<T>,
    grad: Array2<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Array2<T>) -> Self {
        let grad = Array2::zeros(value.dim());
        Self { value, grad }
    }

    pub fn value(&self) -> &Array2<T> {
        &self.value
    }

    pub fn grad(&self) -> &Array2<T> {
        &self.grad
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }

    pub(crate) fn split_mut(&mut self) -> (&mut Array2<T>, &mut Array2<T>) {
        (&mut self.value, &mut self.grad)
    }
}

/// Flat, name-ordered collection of parameters.
///
/// Names are unique and iteration order is lexicographic, which keeps
/// checkpoints and optimizer state independent of insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore<T> {
    params: BTreeMap<String, Param<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<T>) -> Result<()> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(config_err(format!("duplicate parameter name `{name}`")));
        }
        self.params.insert(name, Param::new(value));
        Ok(())
    }

    /// Glorot-uniform weight matrix of shape `fan_in x fan_out`.
    pub fn insert_glorot<R: Rng>(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Result<()> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let value = Array2::from_shape_fn((fan_in, fan_out), |_| T::lit(rng.gen_range(-limit..limit)));
        self.insert(name, value)
    }

    pub fn insert_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<()> {
        self.insert(name, Array2::zeros((rows, cols)))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn get(&self, name: &str) -> Option<&Param<T>> {
        self.params.get(name)
    }

    pub fn value(&self, name: &str) -> Option<&Array2<T>> {
        self.params.get(name).map(|p| &p.value)
    }

    pub fn grad(&self, name: &str) -> Option<&Array2<T>> {
        self.params.get(name).map(|p| &p.grad)
    }

    /// Replaces a parameter value, keeping its shape.
    pub fn set_value(&mut self, name: &str, value: Array2<T>) -> Result<()> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| config_err(format!("unknown parameter `{name}`")))?;
        if p.value.dim() != value.dim() {
            return Err(config_err(format!(
                "shape mismatch for `{name}`: have {:?}, got {:?}",
                p.value.dim(),
                value.dim()
            )));
        }
        p.value = value;
        Ok(())
    }

    pub fn value_mut(&mut self, name: &str) -> Option<&mut Array2<T>> {
        self.params.get_mut(name).map(|p| &mut p.value)
    }

    pub(crate) fn add_grad(&mut self, name: &str, g: &Array2<T>) {
        let p = self
            .params
            .get_mut(name)
            .unwrap_or_else(|| panic!("gradient for unknown parameter `{name}`"));
        p.grad += g;
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<T>)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad.fill(T::zero());
        }
    }

    /// True when every gradient slot is exactly zero.
    pub fn grads_are_zero(&self) -> bool {
        self.params
            .values()
            .all(|p| p.grad.iter().all(|&g| g == T::zero()))
    }

    /// Sum of squared gradients over all parameters.
    pub fn grad_norm_sq(&self) -> T {
        self.params
            .values()
            .map(|p| p.grad.iter().map(|&g| g * g).sum::<T>())
            .sum()
    }

    /// Checks that `other` holds exactly the same names with the same shapes.
    pub fn check_same_layout(&self, other: &ParamStore<T>) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(config_err(format!(
                "parameter sets differ in size: {} vs {}",
                self.params.len(),
                other.params.len()
            )));
        }
        for ((na, pa), (nb, pb)) in self.params.iter().zip(other.params.iter()) {
            if na != nb {
                return Err(config_err(format!("parameter name mismatch: `{na}` vs `{nb}`")));
            }
            if pa.shape() != pb.shape() {
                return Err(config_err(format!("shape mismatch for `{na}`")));
            }
        }
        Ok(())
    }

    /// Returns a copy with gradient slots cleared.
    pub fn detached_clone(&self) -> Self {
        let mut c = self.clone();
        c.zero_grads();
        c
    }

    pub(crate) fn check_finite_grads(&self) -> Result<()> {
        for (name, p) in &self.params {
            if let Some((idx, _)) = p.grad.indexed_iter().find(|(_, g)| !g.is_finite()) {
                return Err(Error::NonFinite {
                    what: format!("gradient of `{name}`"),
                    index: vec![idx.0, idx.1],
                });
            }
        }
        Ok(())
    }

    /// Number of scalar entries across all parameters.
    pub fn numel(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }
}
