use serde::{Deserialize, Serialize};

use super::{check_len, Param, Parameterized, Result, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Tensor2,
    pub v: Tensor2,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, config: AdamConfig) -> Self {
        AdamState {
            m: Tensor2::zeros(rows, cols),
            v: Tensor2::zeros(rows, cols),
            t: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update of `param` in place.
pub fn adam_step(state: &mut AdamState, param: &mut Tensor2, grad: &Tensor2) -> Result<()> {
    check_len("adam_step", param.len(), grad.len())?;
    check_len("adam_step", param.len(), state.m.len())?;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.t += 1;
    let bias1 = 1.0 - beta1.powi(state.t as i32);
    let bias2 = 1.0 - beta2.powi(state.t as i32);
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for (k, (w, &g)) in param.data_mut().iter_mut().zip(grad.data()).enumerate() {
        m[k] = beta1 * m[k] + (1.0 - beta1) * g;
        v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
        let m_hat = m[k] / bias1;
        let v_hat = v[k] / bias2;
        *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

/// Scale all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(params: &mut [&mut Param], max_norm: f64) -> f64 {
    let norm = params.iter().map(|p| p.grad.sum_squares()).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let k = max_norm / norm;
        for p in params.iter_mut() {
            p.grad.scale(k);
        }
    }
    norm
}

/// Adam over every parameter of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new<M: Parameterized + ?Sized>(model: &M, config: AdamConfig) -> Self {
        let states = model
            .params()
            .iter()
            .map(|p| AdamState::new(p.value.rows(), p.value.cols(), config))
            .collect();
        Adam { config, states }
    }

    pub fn steps_taken(&self) -> u64 {
        self.states.first().map_or(0, |s| s.t)
    }

    pub fn step<M: Parameterized + ?Sized>(&mut self, model: &mut M) -> Result<()> {
        let mut params = model.params_mut();
        check_len("adam", self.states.len(), params.len())?;
        for (state, p) in self.states.iter_mut().zip(params.iter_mut()) {
            let Param { value, grad, .. } = &mut **p;
            adam_step(state, value, grad)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor2 {
        Tensor2::from_vec(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut state = AdamState::new(2, 2, AdamConfig::default());
        let mut p = Tensor2::from_vec(2, 2, vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let before = p.clone();
        for _ in 0..3 {
            adam_step(&mut state, &mut p, &Tensor2::zeros(2, 2)).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(state.t, 3);
    }

    #[test]
    fn shape_mismatch() {
        let mut state = AdamState::new(1, 1, AdamConfig::default());
        let mut p = scalar(0.0);
        assert!(adam_step(&mut state, &mut p, &Tensor2::zeros(2, 1)).is_err());
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let mut a = Param::zeros("a", 1, 2);
        a.grad = Tensor2::from_vec(1, 2, vec![3.0, 4.0]).unwrap();
        let mut params = vec![&mut a];
        assert_eq!(clip_global_norm(&mut params, 5.0), 5.0);
        assert_eq!(clip_global_norm(&mut params, 1.0), 5.0);
        assert!((a.grad.sum_squares().sqrt() - 1.0).abs() < 1e-15);
    }
}
