use rand::Rng;

use super::{check_len, ensure_finite, Param, Parameterized, Result};

/// Fully connected layer, `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer {
    /// `out x in`.
    pub weight: Param,
    /// `out x 1`.
    pub bias: Param,
}

impl FcLayer {
    pub fn zeros(name: &str, input: usize, output: usize) -> Self {
        FcLayer {
            weight: Param::zeros(format!("{name}.weight"), output, input),
            bias: Param::zeros(format!("{name}.bias"), output, 1),
        }
    }

    pub fn glorot<R: Rng>(name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        FcLayer {
            weight: Param::glorot(format!("{name}.weight"), output, input, rng),
            bias: Param::zeros(format!("{name}.bias"), output, 1),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("fc_forward", self.input_dim(), x.len())?;
        let mut y = self.bias.value.data().to_vec();
        self.weight.value.matvec_acc(x, &mut y);
        ensure_finite(&y, "fc_forward")?;
        Ok(y)
    }

    /// Accumulate dW, db for upstream gradient `dy` and return dx.
    pub fn backward(&mut self, x: &[f64], dy: &[f64]) -> Result<Vec<f64>> {
        check_len("fc_backward", self.input_dim(), x.len())?;
        check_len("fc_backward", self.output_dim(), dy.len())?;
        self.weight.grad.add_outer(dy, x);
        for (g, d) in self.bias.grad.data_mut().iter_mut().zip(dy) {
            *g += d;
        }
        let mut dx = vec![0.0; x.len()];
        self.weight.value.matvec_t_acc(dy, &mut dx);
        Ok(dx)
    }
}

impl Parameterized for FcLayer {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub fn relu_forward(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Gradient passes where the input was strictly positive.
pub fn relu_backward(x: &[f64], dy: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(dy)
        .map(|(&v, &d)| if v > 0.0 { d } else { 0.0 })
        .collect()
}
