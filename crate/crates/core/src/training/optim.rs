//! Adaptive-moment optimizer.
//!
//! For step `t ≥ 1` and gradient `g`:
//!
//! ```text
//! m ← β₁ m + (1 − β₁) g
//! v ← β₂ v + (1 − β₂) g²
//! m̂ = m / (1 − β₁ᵗ)      v̂ = v / (1 − β₂ᵗ)
//! θ ← θ − lr · m̂ / (√v̂ + ε)
//! ```

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::nn::{ModelParams, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::{Array, ParamId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T: Scalar> {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Array<T>>,
    pub second: Vec<Array<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, store: &ParamStore<T>) -> Self {
        let zeros: Vec<Array<T>> = store.iter().map(|(_, _, a)| Array::zeros(a.shape())).collect();
        Self {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// Applies one update. Parameters absent from `grads` are left alone.
    /// A non-finite gradient aborts before anything is modified.
    pub fn update(&mut self, store: &mut ParamStore<T>, grads: &[(ParamId, Array<T>)]) -> Result<(), TrainError> {
        if let Some((id, _)) = grads.iter().find(|(_, g)| !g.all_finite()) {
            return Err(TrainError::NonFiniteGradient(store.name(*id).to_string()));
        }
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        let t = self.step as i32;
        let bias1 = T::one() - b1.powi(t);
        let bias2 = T::one() - b2.powi(t);
        let (lr, eps) = (T::of(c.lr), T::of(c.eps));
        for (id, g) in grads {
            let m = self.first[id.0].data_mut();
            let v = self.second[id.0].data_mut();
            let theta = store.get_mut(*id).data_mut();
            for k in 0..g.len() {
                let gk = g.data()[k];
                m[k] = b1 * m[k] + one_b1 * gk;
                v[k] = b2 * v[k] + one_b2 * gk * gk;
                let m_hat = m[k] / bias1;
                let v_hat = v[k] / bias2;
                theta[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Moment arrays as named checkpoint groups.
    pub fn to_groups(&self, params: &ModelParams<T>) -> Vec<(String, Array<T>)> {
        let store = params.store();
        let mut out = Vec::with_capacity(2 * store.len());
        for (id, name, _) in store.iter() {
            out.push((format!("adam.m/{name}"), self.first[id.0].clone()));
        }
        for (id, name, _) in store.iter() {
            out.push((format!("adam.v/{name}"), self.second[id.0].clone()));
        }
        out
    }

    pub fn from_groups(
        config: AdamConfig,
        step: u64,
        params: &ModelParams<T>,
        groups: &[(String, Array<T>)],
    ) -> Result<Self, TrainError> {
        let store = params.store();
        let n = store.len();
        if groups.len() != 2 * n {
            return Err(TrainError::Config(format!(
                "optimizer state has {} groups, expected {}",
                groups.len(),
                2 * n
            )));
        }
        for (id, name, a) in store.iter() {
            for (prefix, (gname, g)) in [("adam.m/", &groups[id.0]), ("adam.v/", &groups[n + id.0])] {
                if *gname != format!("{prefix}{name}") || g.shape() != a.shape() {
                    return Err(TrainError::Config(format!("optimizer group {gname} does not match {name}")));
                }
            }
        }
        Ok(Self {
            config,
            step,
            first: groups[..n].iter().map(|(_, a)| a.clone()).collect(),
            second: groups[n..].iter().map(|(_, a)| a.clone()).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(v: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("w", Array::full(&[2, 2], v));
        s
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = store(1.0);
        let mut opt = Adam::new(
            AdamConfig {
                lr: 0.1,
                ..Default::default()
            },
            &s,
        );
        opt.update(&mut s, &[(ParamId(0), Array::full(&[2, 2], 1.0))]).unwrap();
        for &x in s.get(ParamId(0)).data() {
            assert!((x - 0.9).abs() < 1e-6, "{x}");
        }
    }

    #[test]
    fn zero_gradient_or_zero_lr_is_a_no_op() {
        let mut s = store(0.37);
        let before = s.clone();
        let mut opt = Adam::new(AdamConfig::default(), &s);
        for _ in 0..5 {
            opt.update(&mut s, &[(ParamId(0), Array::zeros(&[2, 2]))]).unwrap();
        }
        assert_eq!(s, before);

        let mut opt = Adam::new(
            AdamConfig {
                lr: 0.0,
                ..Default::default()
            },
            &s,
        );
        for k in 0..20 {
            let g = Array::full(&[2, 2], (k as f64).sin() * 3.0);
            opt.update(&mut s, &[(ParamId(0), g)]).unwrap();
        }
        assert_eq!(s, before);
    }

    #[test]
    fn non_finite_gradient_is_rejected_untouched() {
        let mut s = store(1.0);
        let before = s.clone();
        let mut opt = Adam::new(AdamConfig::default(), &s);
        let err = opt
            .update(&mut s, &[(ParamId(0), Array::full(&[2, 2], f64::NAN))])
            .unwrap_err();
        assert!(err.to_string().contains('w'));
        assert_eq!(s, before);
        assert_eq!(opt.step, 0);
    }
}
