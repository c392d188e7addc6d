//! Two-class Fisher discriminant used as a one-dimensional projection.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::linalg::{cholesky, cholesky_solve, dot, norm};
use super::{row, DatasetMatrix};
use crate::container::{ModelContainer, ModelKind, Persist};
use crate::error::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaProjector {
    /// Unit-norm discriminant direction; risk projects above control.
    pub w: Vec<f64>,
    pub lambda: f64,
}

/// Class means and the pooled within-class scatter `S_w` (row-major d × d).
pub fn class_statistics(data: &DatasetMatrix) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = data.d();
    let mut mu = [vec![0.0; d], vec![0.0; d]];
    let mut n = [0usize; 2];
    for i in 0..data.n() {
        let c = usize::from(data.y[i]);
        n[c] += 1;
        for (m, v) in mu[c].iter_mut().zip(data.row(i)) {
            *m += v;
        }
    }
    for c in 0..2 {
        let k = n[c].max(1) as f64;
        mu[c].iter_mut().for_each(|m| *m /= k);
    }
    let mut sw = vec![0.0; d * d];
    for i in 0..data.n() {
        let c = usize::from(data.y[i]);
        let diff: Vec<f64> = data.row(i).iter().zip(&mu[c]).map(|(x, m)| x - m).collect();
        for a in 0..d {
            for b in 0..d {
                sw[a * d + b] += diff[a] * diff[b];
            }
        }
    }
    let [mu0, mu1] = mu;
    (mu0, mu1, sw)
}

/// `w ∝ (S_w + λI)⁻¹ (μ₁ − μ₀)`, normalized to unit length.
pub fn fit_lda(data: &DatasetMatrix, lambda: f64) -> Result<LdaProjector> {
    data.require_both_classes()?;
    if data.d() == 0 {
        return Err(Error::Validation("LDA needs at least one feature".into()));
    }
    let d = data.d();
    let (mu0, mu1, sw) = class_statistics(data);
    let diff: Vec<f64> = mu1.iter().zip(&mu0).map(|(a, b)| a - b).collect();
    let mut reg = lambda;
    let w = loop {
        let mut a = sw.clone();
        for k in 0..d {
            a[k * d + k] += reg;
        }
        if cholesky(&mut a, d) {
            break cholesky_solve(&a, d, &diff);
        }
        // only reachable when the scatter is numerically singular at this ridge
        reg = if reg > 0.0 { reg * 10.0 } else { 1e-12 };
        log::warn!("within-class scatter not positive definite; retrying LDA with ridge {reg}");
        if reg > 1e6 {
            return Err(Error::Training("within-class scatter is degenerate".into()));
        }
    };
    let len = norm(&w);
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::Training("class means coincide; LDA direction undefined".into()));
    }
    Ok(LdaProjector {
        w: w.iter().map(|v| v / len).collect(),
        lambda,
    })
}

impl LdaProjector {
    /// `X w` as an `n × 1` matrix.
    pub fn project(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                got: x.ncols(),
            });
        }
        let x = x.as_standard_layout().into_owned();
        let col: Vec<f64> = (0..x.nrows()).map(|i| dot(row(&x, i), &self.w)).collect();
        Ok(Array2::from_shape_vec((col.len(), 1), col).expect("n × 1"))
    }
}

impl Persist for LdaProjector {
    fn to_container(&self) -> Result<ModelContainer> {
        let mut c = ModelContainer::new(ModelKind::Lda, &self.lambda)?;
        c.push_f64s("w", &self.w);
        Ok(c)
    }

    fn from_container(c: &ModelContainer) -> Result<LdaProjector> {
        c.expect_kind(ModelKind::Lda)?;
        Ok(LdaProjector {
            lambda: c.config()?,
            w: c.f64s("w")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shallow::Granularity;

    fn data(rows: &[[f64; 2]], y: &[bool]) -> DatasetMatrix {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        DatasetMatrix::from_rows(&rows, y.to_vec(), ids, Granularity::User).unwrap()
    }

    #[test]
    fn identity_scatter_gives_mean_difference() {
        // each class: points ±(1/√2) around its mean on both axes → S_w = I
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rows = [[-s, 0.0], [s, 0.0], [0.0, -s], [0.0, s], [1.0 - s, 0.0], [1.0 + s, 0.0], [1.0, -s], [1.0, s]];
        let y = [false, false, false, false, true, true, true, true];
        let p = fit_lda(&data(&rows, &y), 0.0).unwrap();
        assert!((p.w[0] - 1.0).abs() < 1e-12 && p.w[1].abs() < 1e-12);
        let flipped: Vec<bool> = y.iter().map(|v| !v).collect();
        let q = fit_lda(&data(&rows, &flipped), 0.0).unwrap();
        assert!((q.w[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_projects_to_zero() {
        let p = LdaProjector { w: vec![0.6, 0.8], lambda: 0.0 };
        let z = p.project(&Array2::zeros((3, 2))).unwrap();
        assert_eq!(z.shape(), [3, 1]);
        assert!(z.iter().all(|v| *v == 0.0));
        assert!(p.project(&Array2::zeros((1, 3))).is_err());
    }

    #[test]
    fn single_class_errors() {
        assert!(fit_lda(&data(&[[0.0, 1.0], [1.0, 0.0]], &[true, true]), 1e-6).is_err());
    }
}
