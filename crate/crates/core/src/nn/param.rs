use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Option<Tensor<T>>,
    /// Buffers (e.g. cached template statistics) are serialized with the
    /// model but never touched by the optimizer.
    pub trainable: bool,
}

/// Ordered, name-addressed collection of model parameters.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
    by_name: HashMap<String, usize>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    fn push(&mut self, name: &str, value: Tensor<T>, trainable: bool) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::Contract(format!("duplicate parameter name `{name}`")));
        }
        let id = self.params.len();
        self.by_name.insert(name.to_string(), id);
        self.params.push(Parameter {
            name: name.to_string(),
            value,
            grad: None,
            trainable,
        });
        Ok(ParamId(id))
    }

    pub fn insert(&mut self, name: &str, value: Tensor<T>) -> Result<ParamId> {
        self.push(name, value, true)
    }

    pub fn insert_buffer(&mut self, name: &str, value: Tensor<T>) -> Result<ParamId> {
        self.push(name, value, false)
    }

    /// Fan-in scaled Gaussian weight, `std = sqrt(2 / fan_in)`.
    pub fn insert_he<R: Rng>(
        &mut self,
        name: &str,
        shape: &[usize],
        fan_in: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let std = (2.0 / fan_in as f64).sqrt();
        let t = Tensor::from_fn(shape, |_| {
            let z: f64 = StandardNormal.sample(rng);
            T::from_f64(z * std)
        });
        self.insert(name, t)
    }

    pub fn insert_zeros(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        self.insert(name, Tensor::zeros(shape))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter<T>> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn num_trainable_scalars(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.len())
            .sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    /// Adds `grad` into the gradient slot of `id`.
    pub fn accumulate_grad(&mut self, id: ParamId, grad: &[T]) -> Result<()> {
        let p = &mut self.params[id.0];
        if grad.len() != p.value.len() {
            return Err(Error::Dimension(format!(
                "gradient for `{}` has {} values, parameter has {}",
                p.name,
                grad.len(),
                p.value.len()
            )));
        }
        match &mut p.grad {
            Some(g) => {
                for (a, &b) in g.data_mut().iter_mut().zip(grad) {
                    *a = *a + b;
                }
            }
            None => {
                p.grad = Some(Tensor::new(p.value.shape(), grad.to_vec())?);
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    grad: p.grad.as_ref().map(|g| g.cast()),
                    trainable: p.trainable,
                })
                .collect(),
            by_name: self.by_name.clone(),
        }
    }
}
