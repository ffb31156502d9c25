use super::{check_len, NeuralError, Result};

/// `(1 / 2N) Σ (pred - target)²`.
pub fn half_mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_len("half_mse_loss", pred.len(), target.len())?;
    if pred.is_empty() {
        return Err(NeuralError::ShapeMismatch {
            op: "half_mse_loss",
            expected: 1,
            found: 0,
        });
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    let loss = sum / (2.0 * pred.len() as f64);
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(NeuralError::NonFiniteLoss)
    }
}

/// `(pred - target) / N`.
pub fn half_mse_grad(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    check_len("half_mse_grad", pred.len(), target.len())?;
    let n = pred.len() as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) / n).collect())
}
