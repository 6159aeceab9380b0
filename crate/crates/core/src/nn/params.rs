use rand::Rng;

use super::ModelError;
use crate::scalar::Scalar;
use crate::tensor::{Array, Graph, ParamId, Tensor};

/// Named, ordered collection of parameter arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T: Scalar> {
    names: Vec<String>,
    values: Vec<Array<T>>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
        }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array<T>) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Array<T> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array<T> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Array<T>)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Total number of scalars across all arrays.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Array::len).sum()
    }

    pub fn bind<'g>(&self, graph: &'g Graph<T>, id: ParamId) -> Tensor<'g, T> {
        graph.param(id, self.get(id))
    }
}

/// `y = x·Wᵀ + b` with `W: out×in`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn forward<'g, T: Scalar>(
        &self,
        graph: &'g Graph<T>,
        store: &ParamStore<T>,
        x: &Tensor<'g, T>,
    ) -> Result<Tensor<'g, T>, ModelError> {
        let width = x.with_value(|a| a.cols());
        if width != self.fan_in || x.with_value(|a| a.rank()) != 2 {
            return Err(ModelError::Width {
                layer: store.name(self.weight).to_string(),
                expected: self.fan_in,
                got: width,
            });
        }
        let w = store.bind(graph, self.weight);
        let b = store.bind(graph, self.bias);
        Ok(x.matmul_t(&w)?.add_bias(&b)?)
    }
}

/// Stack of linear layers with GeLU between them and none after the last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn forward<'g, T: Scalar>(
        &self,
        graph: &'g Graph<T>,
        store: &ParamStore<T>,
        x: &Tensor<'g, T>,
    ) -> Result<Tensor<'g, T>, ModelError> {
        let mut h = *x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(graph, store, &h)?;
            if i + 1 < self.layers.len() {
                h = h.gelu();
            }
        }
        Ok(h)
    }

    pub fn fan_in(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn fan_out(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }

    pub fn last(&self) -> &Linear {
        &self.layers[self.layers.len() - 1]
    }
}

/// Creates layers in a store with Glorot-uniform weights and zero biases.
pub(crate) struct LayerBuilder<'s, T: Scalar, R: Rng> {
    pub store: &'s mut ParamStore<T>,
    pub rng: R,
}

impl<T: Scalar, R: Rng> LayerBuilder<'_, T, R> {
    pub fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w: Vec<T> = (0..fan_in * fan_out)
            .map(|_| T::of(self.rng.gen_range(-limit..limit)))
            .collect();
        let weight = self.store.add(
            format!("{name}.weight"),
            Array::from_shape_vec(&[fan_out, fan_in], w).expect("positive dims"),
        );
        let bias = self
            .store
            .add(format!("{name}.bias"), Array::zeros(&[fan_out]));
        Linear {
            weight,
            bias,
            fan_in,
            fan_out,
        }
    }

    /// `hidden_layers` hidden layers of width `hidden`, then a linear output.
    pub fn mlp(&mut self, name: &str, fan_in: usize, hidden: usize, hidden_layers: usize, fan_out: usize) -> Mlp {
        let mut layers = Vec::with_capacity(hidden_layers + 1);
        let mut width = fan_in;
        for i in 0..hidden_layers {
            layers.push(self.linear(&format!("{name}.{i}"), width, hidden));
            width = hidden;
        }
        layers.push(self.linear(&format!("{name}.{hidden_layers}"), width, fan_out));
        Mlp { layers }
    }
}
