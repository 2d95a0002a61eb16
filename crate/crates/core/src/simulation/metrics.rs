use crate::error::{GaqqError, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b || a == 0 {
        return Err(GaqqError::invalid(format!(
            "metric inputs need equal nonzero lengths, got {a} and {b}"
        )));
    }
    Ok(())
}

/// Fraction of mismatched labels.
pub fn misclassification_error(truth: &[usize], pred: &[usize]) -> Result<f64> {
    check_lengths(truth.len(), pred.len())?;
    let wrong = truth.iter().zip(pred).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Root mean squared prediction error.
pub fn rmspe(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_lengths(truth.len(), pred.len())?;
    let sse: f64 = truth.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / truth.len() as f64).sqrt())
}

/// Sample mean and standard error `sd / √n` (sd with divisor `n − 1`).
/// The standard error is NaN for fewer than two values.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
