use rand::Rng;

use crate::neural::{relu_backward, relu_forward, FcLayer, Param, Parameterized, Result};

/// A chain of FC + ReLU layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluStack {
    pub layers: Vec<FcLayer>,
}

/// Inputs and pre-activations of every layer of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct StackCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ReluStack {
    pub fn zeros(name: &str, input: usize, widths: &[usize]) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(widths);
        ReluStack {
            layers: dims
                .windows(2)
                .enumerate()
                .map(|(k, d)| FcLayer::zeros(&format!("{name}.{k}"), d[0], d[1]))
                .collect(),
        }
    }

    pub fn glorot<R: Rng>(name: &str, input: usize, widths: &[usize], rng: &mut R) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(widths);
        ReluStack {
            layers: dims
                .windows(2)
                .enumerate()
                .map(|(k, d)| FcLayer::glorot(&format!("{name}.{k}"), d[0], d[1], rng))
                .collect(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut a = x.to_vec();
        for layer in &self.layers {
            a = relu_forward(&layer.forward(&a)?);
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<(Vec<f64>, StackCache)> {
        let mut cache = StackCache::default();
        let mut a = x.to_vec();
        for layer in &self.layers {
            let z = layer.forward(&a)?;
            let next = relu_forward(&z);
            cache.inputs.push(a);
            cache.pre.push(z);
            a = next;
        }
        Ok((a, cache))
    }

    pub fn backward(&mut self, cache: &StackCache, dy: Vec<f64>) -> Result<Vec<f64>> {
        let mut da = dy;
        for (k, layer) in self.layers.iter_mut().enumerate().rev() {
            let dz = relu_backward(&cache.pre[k], &da);
            da = layer.backward(&cache.inputs[k], &dz)?;
        }
        Ok(da)
    }
}

impl Parameterized for ReluStack {
    fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}
