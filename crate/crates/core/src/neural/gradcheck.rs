use super::{Differentiable, NeuralError, Result};

/// Below this magnitude gradients are compared in absolute terms.
pub const ABSOLUTE_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// Compare analytic gradients with central differences
/// `(L(θ + h) - L(θ - h)) / 2h`, one parameter entry at a time.
///
/// The error for an entry is `|a - n| / max(|a|, |n|, ABSOLUTE_FLOOR)`.
pub fn gradient_check<M: Differentiable>(
    model: &mut M,
    input: &M::Input,
    target: &M::Target,
    h: f64,
) -> Result<GradCheck> {
    model.zero_grad();
    let loss = model.backprop(input, target)?;
    if !loss.is_finite() {
        return Err(NeuralError::NonFiniteLoss);
    }
    let analytic: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| p.grad.data().to_vec())
        .collect();

    let mut report = GradCheck {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (pi, grads) in analytic.iter().enumerate() {
        for (k, &a) in grads.iter().enumerate() {
            let original = model.params()[pi].value.data()[k];
            model.params_mut()[pi].value.data_mut()[k] = original + h;
            let plus = model.loss(input, target);
            model.params_mut()[pi].value.data_mut()[k] = original - h;
            let minus = model.loss(input, target);
            model.params_mut()[pi].value.data_mut()[k] = original;
            let (plus, minus) = (plus?, minus?);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(NeuralError::NonFiniteLoss);
            }
            let numeric = (plus - minus) / (2.0 * h);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(ABSOLUTE_FLOOR);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((model.params()[pi].name.clone(), k));
            }
        }
    }
    Ok(report)
}
