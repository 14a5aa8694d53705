use ndarray::Array2;

use crate::{Error, Result};

/// Probability floor inside the logarithm of the cross-entropy.
pub const LOG_CLIP: f64 = 1e-12;

/// Numerically stable row-wise softmax.
pub fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// One-hot encodes binary labels into an `n × 2` matrix.
pub fn one_hot(labels: &[u8]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((labels.len(), 2));
    for (i, &y) in labels.iter().enumerate() {
        if y > 1 {
            return Err(Error::InvalidLabels(format!("label {y} at row {i} is not binary")));
        }
        out[[i, y as usize]] = 1.0;
    }
    Ok(out)
}

fn check_one_hot(labels: &Array2<f64>) -> Result<()> {
    for (i, row) in labels.rows().into_iter().enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::InvalidLabels(format!("row {i} is not one-hot")));
        }
    }
    Ok(())
}

/// Mean categorical cross-entropy `-Σ y ln(p + ε)` over rows.
pub fn cross_entropy_loss(probs: &Array2<f64>, labels: &Array2<f64>) -> Result<f64> {
    if probs.dim() != labels.dim() {
        return Err(Error::DimensionMismatch {
            context: "cross entropy",
            expected: probs.nrows(),
            actual: labels.nrows(),
        });
    }
    if probs.nrows() == 0 {
        return Err(Error::Empty("cross entropy"));
    }
    check_one_hot(labels)?;
    let total: f64 = (labels * &probs.mapv(|p| (p + LOG_CLIP).ln())).sum();
    Ok(-total / probs.nrows() as f64)
}

/// Gradient of [`cross_entropy_loss`] with respect to the probabilities.
pub(crate) fn cross_entropy_grad(probs: &Array2<f64>, labels: &Array2<f64>) -> Array2<f64> {
    let n = probs.nrows() as f64;
    let mut g = labels / &probs.mapv(|p| p + LOG_CLIP);
    g.mapv_inplace(|v| -v / n);
    g
}
