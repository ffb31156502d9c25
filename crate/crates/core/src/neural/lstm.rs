use rand::Rng;

use super::{check_len, ensure_finite, NeuralError, Param, Parameterized, Result};

/// Gate order used for every `[_; 4]` array below.
pub const GATE_NAMES: [&str; 4] = ["input", "forget", "output", "cell"];
const INPUT: usize = 0;
const FORGET: usize = 1;
const OUTPUT: usize = 2;
const CELL: usize = 3;

/// Standard LSTM cell without peepholes.
///
/// ```text
/// i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
/// o = σ(W_o x + U_o h + b_o)    g = tanh(W_g x + U_g h + b_g)
/// c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// Input weights, `hidden x in`.
    pub w: [Param; 4],
    /// Recurrent weights, `hidden x hidden`.
    pub u: [Param; 4],
    /// Biases, `hidden x 1`.
    pub b: [Param; 4],
}

/// Everything one step needs for its backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub gates: [Vec<f64>; 4],
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl LstmLayer {
    pub fn zeros(name: &str, input: usize, hidden: usize) -> Self {
        let gate = |kind: &str, k: usize, rows: usize, cols: usize| {
            Param::zeros(format!("{name}.{kind}_{}", GATE_NAMES[k]), rows, cols)
        };
        LstmLayer {
            w: std::array::from_fn(|k| gate("w", k, hidden, input)),
            u: std::array::from_fn(|k| gate("u", k, hidden, hidden)),
            b: std::array::from_fn(|k| gate("b", k, hidden, 1)),
        }
    }

    /// Glorot-uniform weights, forget bias 1, other biases 0.
    pub fn glorot<R: Rng>(name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut layer = LstmLayer::zeros(name, input, hidden);
        for k in 0..4 {
            layer.w[k] = Param::glorot(layer.w[k].name.clone(), hidden, input, rng);
        }
        for k in 0..4 {
            layer.u[k] = Param::glorot(layer.u[k].name.clone(), hidden, hidden, rng);
        }
        layer.b[FORGET].value.fill(1.0);
        layer
    }

    pub fn input_dim(&self) -> usize {
        self.w[0].value.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w[0].value.rows()
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<LstmStep> {
        let hidden = self.hidden_dim();
        check_len("lstm_step", self.input_dim(), x.len())?;
        check_len("lstm_step", hidden, h_prev.len())?;
        check_len("lstm_step", hidden, c_prev.len())?;

        let gates: [Vec<f64>; 4] = std::array::from_fn(|k| {
            let mut a = self.b[k].value.data().to_vec();
            self.w[k].value.matvec_acc(x, &mut a);
            self.u[k].value.matvec_acc(h_prev, &mut a);
            if k == CELL {
                a.iter_mut().for_each(|v| *v = v.tanh());
            } else {
                a.iter_mut().for_each(|v| *v = sigmoid(*v));
            }
            a
        });
        let c: Vec<f64> = (0..hidden)
            .map(|j| gates[FORGET][j] * c_prev[j] + gates[INPUT][j] * gates[CELL][j])
            .collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = (0..hidden).map(|j| gates[OUTPUT][j] * tanh_c[j]).collect();
        ensure_finite(&c, "lstm_step")?;
        ensure_finite(&h, "lstm_step")?;
        Ok(LstmStep {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            c,
            tanh_c,
            h,
        })
    }

    /// Run the cell over a whole sequence starting from (h0, c0).
    pub fn forward_sequence(
        &self,
        xs: &[Vec<f64>],
        h0: &[f64],
        c0: &[f64],
    ) -> Result<Vec<LstmStep>> {
        if xs.is_empty() {
            return Err(NeuralError::EmptySequence);
        }
        let mut steps: Vec<LstmStep> = Vec::with_capacity(xs.len());
        for x in xs {
            let step = match steps.last() {
                Some(prev) => self.step(x, &prev.h, &prev.c)?,
                None => self.step(x, h0, c0)?,
            };
            steps.push(step);
        }
        Ok(steps)
    }

    /// Full backpropagation through time.
    ///
    /// `dh[t]` is the loss gradient arriving at `h_t` from outside the
    /// recurrence. Parameter gradients are accumulated; returns the input
    /// gradients per step together with dL/dh0 and dL/dc0.
    pub fn backward_sequence(
        &mut self,
        steps: &[LstmStep],
        dh: &[Vec<f64>],
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
        check_len("lstm_backward", steps.len(), dh.len())?;
        let hidden = self.hidden_dim();
        let input = self.input_dim();
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let mut dxs = vec![Vec::new(); steps.len()];
        let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);

        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            check_len("lstm_backward", hidden, dh[t].len())?;
            let (i, f, o, g) = (
                &s.gates[INPUT],
                &s.gates[FORGET],
                &s.gates[OUTPUT],
                &s.gates[CELL],
            );
            for j in 0..hidden {
                let dh_j = dh[t][j] + dh_next[j];
                let d_o = dh_j * s.tanh_c[j];
                let dc = dc_next[j] + dh_j * o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
                let d_i = dc * g[j];
                let d_g = dc * i[j];
                let d_f = dc * s.c_prev[j];
                dc_next[j] = dc * f[j];
                da[INPUT][j] = d_i * i[j] * (1.0 - i[j]);
                da[FORGET][j] = d_f * f[j] * (1.0 - f[j]);
                da[OUTPUT][j] = d_o * o[j] * (1.0 - o[j]);
                da[CELL][j] = d_g * (1.0 - g[j] * g[j]);
            }
            let mut dx = vec![0.0; input];
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..4 {
                self.w[k].grad.add_outer(&da[k], &s.x);
                self.u[k].grad.add_outer(&da[k], &s.h_prev);
                for (gb, d) in self.b[k].grad.data_mut().iter_mut().zip(&da[k]) {
                    *gb += d;
                }
                self.w[k].value.matvec_t_acc(&da[k], &mut dx);
                self.u[k].value.matvec_t_acc(&da[k], &mut dh_next);
            }
            dxs[t] = dx;
        }
        Ok((dxs, dh_next, dc_next))
    }
}

impl Parameterized for LstmLayer {
    fn params(&self) -> Vec<&Param> {
        self.w.iter().chain(&self.u).chain(&self.b).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.w
            .iter_mut()
            .chain(self.u.iter_mut())
            .chain(self.b.iter_mut())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_zero_state() {
        let cell = LstmLayer::zeros("l", 3, 2);
        let s = cell.step(&[1.0, -4.0, 9.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(s.h, vec![0.0, 0.0]);
        assert_eq!(s.c, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_params_halve_the_cell() {
        let cell = LstmLayer::zeros("l", 1, 2);
        let s = cell.step(&[5.0], &[0.3, -0.1], &[2.0, -6.0]).unwrap();
        assert_eq!(s.c, vec![1.0, -3.0]);
    }

    #[test]
    fn length_one_sequence_is_a_step() {
        let mut rng = rand::rng();
        let cell = LstmLayer::glorot("l", 2, 3, &mut rng);
        let h0 = [0.1, 0.2, -0.3];
        let c0 = [0.5, 0.0, -1.0];
        let seq = cell.forward_sequence(&[vec![0.4, -0.7]], &h0, &c0).unwrap();
        assert_eq!(seq[0], cell.step(&[0.4, -0.7], &h0, &c0).unwrap());
        assert!(matches!(
            cell.forward_sequence(&[], &h0, &c0),
            Err(NeuralError::EmptySequence)
        ));
        assert!(cell.step(&[0.4], &h0, &c0).is_err());
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut rng = rand::rng();
        let cell = LstmLayer::glorot("l", 2, 3, &mut rng);
        assert!(cell.b[FORGET].value.data().iter().all(|&v| v == 1.0));
        assert!(cell.b[INPUT].value.data().iter().all(|&v| v == 0.0));
    }
}
