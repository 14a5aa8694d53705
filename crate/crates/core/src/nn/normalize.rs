use log::warn;
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-column Z-score statistics fitted on one matrix and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Sample standard deviation (n - 1 denominator); 1 for constant columns.
    pub sd: Vec<f64>,
    pub constant_columns: Vec<usize>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        let (n, p) = x.dim();
        if n == 0 || p == 0 {
            return Err(Error::Empty("standardizer fit"));
        }
        super::ensure_finite(x, "standardizer input")?;
        let mean: Array1<f64> = x.mean_axis(Axis(0)).expect("nonempty");
        let mut sd = vec![1.0; p];
        let mut constant_columns = Vec::new();
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            let ss: f64 = col.iter().map(|v| (v - mean[j]).powi(2)).sum();
            let s = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
            if s > 0.0 && s.is_finite() {
                sd[j] = s;
            } else {
                constant_columns.push(j);
            }
        }
        if !constant_columns.is_empty() {
            warn!(
                "{} constant column(s) standardised to zero (first: {})",
                constant_columns.len(),
                constant_columns[0]
            );
        }
        Ok(Standardizer {
            mean: mean.to_vec(),
            sd,
            constant_columns,
        })
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                context: "standardizer columns",
                expected: self.mean.len(),
                actual: x.ncols(),
            });
        }
        let mut out = x.clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.sd[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }
}

/// Fits column statistics on `train` and applies them to both matrices.
pub fn zscore_fit_apply(train: &Array2<f64>, other: &Array2<f64>) -> Result<(Array2<f64>, Array2<f64>, Standardizer)> {
    let st = Standardizer::fit(train)?;
    Ok((st.transform(train)?, st.transform(other)?, st))
}
