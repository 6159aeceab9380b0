//! Central finite-difference gradient checks.
//!
//! The numerical side only ever evaluates forward values; it shares no code
//! with the backward pass it checks.

use rand::seq::index::sample;
use rand::Rng;

use crate::nn::{BoundModel, ModelParams};
use crate::tensor::{Array, Graph, ParamId, Tensor};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Floor on the denominator of the relative error, so coordinates the loss
/// does not depend on (both gradients ≈ 0) do not divide noise by noise.
pub const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖, floor)` over all checked coordinates.
    pub rel_error: f64,
    /// Largest `|analytic − numeric|` of a single coordinate.
    pub max_abs_error: f64,
    pub analytic_norm: f64,
    pub checked: usize,
}

impl GradCheck {
    fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        let diff = pairs.iter().map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let na = pairs.iter().map(|(a, _)| a * a).sum::<f64>().sqrt();
        let nn = pairs.iter().map(|(_, n)| n * n).sum::<f64>().sqrt();
        Self {
            rel_error: diff / na.max(nn).max(REL_FLOOR),
            max_abs_error: pairs.iter().map(|(a, n)| (a - n).abs()).fold(0.0, f64::max),
            analytic_norm: na,
            checked: pairs.len(),
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.rel_error <= tol
    }
}

/// Checks the gradient of a scalar function of free input arrays.
pub fn check_inputs<E, F>(inputs: &[Array<f64>], step: f64, f: F) -> Result<GradCheck, E>
where
    F: for<'g> Fn(&'g Graph<f64>, &[Tensor<'g, f64>]) -> Result<Tensor<'g, f64>, E>,
    E: From<crate::tensor::TensorError>,
{
    let graph = Graph::new();
    let vars: Vec<_> = inputs.iter().map(|a| graph.variable(a.clone())).collect();
    let loss = f(&graph, &vars)?;
    loss.backward()?;
    let analytic: Vec<Array<f64>> = vars.iter().map(|v| v.grad()).collect();

    let eval = |arrays: &[Array<f64>]| -> Result<f64, E> {
        let g = Graph::new();
        let vs: Vec<_> = arrays.iter().map(|a| g.constant(a.clone())).collect();
        Ok(f(&g, &vs)?.item())
    };
    let mut pairs = Vec::new();
    let mut work = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        for i in 0..input.len() {
            let orig = input.data()[i];
            work[k].data_mut()[i] = orig + step;
            let up = eval(&work)?;
            work[k].data_mut()[i] = orig - step;
            let down = eval(&work)?;
            work[k].data_mut()[i] = orig;
            pairs.push((analytic[k].data()[i], (up - down) / (2.0 * step)));
        }
    }
    Ok(GradCheck::from_pairs(&pairs))
}

/// One scalar entry of one parameter array.
pub type Coord = (ParamId, usize);

pub fn all_coords(params: &ModelParams<f64>) -> Vec<Coord> {
    params
        .store()
        .iter()
        .flat_map(|(id, _, a)| (0..a.len()).map(move |i| (id, i)))
        .collect()
}

/// Up to `k` distinct coordinates drawn uniformly.
pub fn sample_coords<R: Rng + ?Sized>(params: &ModelParams<f64>, k: usize, rng: &mut R) -> Vec<Coord> {
    let all = all_coords(params);
    let k = k.min(all.len());
    let mut picked: Vec<Coord> = sample(rng, all.len(), k).into_iter().map(|i| all[i]).collect();
    picked.sort();
    picked
}

/// Checks the parameter gradient of a scalar model loss at `coords`.
pub fn check_params<E, F>(params: &ModelParams<f64>, coords: &[Coord], step: f64, f: F) -> Result<GradCheck, E>
where
    F: for<'g, 'p> Fn(&BoundModel<'g, 'p, f64>) -> Result<Tensor<'g, f64>, E>,
    E: From<crate::tensor::TensorError>,
{
    let graph = Graph::new();
    let loss = f(&params.bind(&graph))?;
    loss.backward()?;
    let grads = graph.param_grads();
    let analytic = |c: &Coord| {
        grads
            .iter()
            .find(|(id, _)| *id == c.0)
            .map_or(0.0, |(_, g)| g.data()[c.1])
    };

    let eval = |p: &ModelParams<f64>| -> Result<f64, E> {
        let g = Graph::new();
        Ok(f(&p.bind(&g))?.item())
    };
    let mut work = params.clone();
    let mut pairs = Vec::with_capacity(coords.len());
    for c in coords {
        let orig = params.store().get(c.0).data()[c.1];
        work.store_mut().get_mut(c.0).data_mut()[c.1] = orig + step;
        let up = eval(&work)?;
        work.store_mut().get_mut(c.0).data_mut()[c.1] = orig - step;
        let down = eval(&work)?;
        work.store_mut().get_mut(c.0).data_mut()[c.1] = orig;
        pairs.push((analytic(c), (up - down) / (2.0 * step)));
    }
    Ok(GradCheck::from_pairs(&pairs))
}
