//! C-SVC solved by SMO with second-order working-set selection.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::linalg::{dot, sq_dist};
use super::{row, DatasetMatrix};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    /// RBF width; `None` uses `1 / (d · var(X))`.
    pub gamma: Option<f64>,
    /// KKT tolerance on the maximal violating pair.
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            eps: 1e-3,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => (-gamma * sq_dist(a, b)).exp(),
        }
    }
}

/// `1 / (d · var(X))` over all entries; 1 when the variance vanishes.
pub fn scale_gamma(x: &Array2<f64>) -> f64 {
    let n = x.len() as f64;
    if n == 0.0 {
        return 1.0;
    }
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (x.ncols() as f64 * var)
    } else {
        1.0
    }
}

/// Dual solution on the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    /// Final maximal KKT violation `m(α) − M(α)`.
    pub gap: f64,
}

/// Solves `min ½ αᵀQα − eᵀα` s.t. `0 ≤ α ≤ C`, `yᵀα = 0`.
pub fn solve(p: &SvmParams, kernel: Kernel, data: &DatasetMatrix) -> Result<SmoSolution> {
    if !(p.c > 0.0) || !(p.eps > 0.0) {
        return Err(Error::Config("svm c and eps must be positive".into()));
    }
    let n = data.n();
    let c = p.c;
    let y: Vec<f64> = data.y.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = y[i] * y[j] * kernel.eval(data.row(i), data.row(j));
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let gap = loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                let low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
                if !low {
                    continue;
                }
                let yg = y[t] * grad[t];
                gmax2 = gmax2.max(yg);
                let grad_diff = gmax + yg;
                if grad_diff > 0.0 {
                    let quad = q[i * n + i] + q[t * n + t] - 2.0 * y[i] * y[t] * q[i * n + t];
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let gap = gmax + gmax2;
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            break gap.max(0.0);
        };
        if gap < p.eps {
            break gap;
        }
        if iterations >= p.max_iter {
            return Err(Error::NoConvergence { iterations });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q[i * n + j];
        if y[i] != y[j] {
            let quad = (q[i * n + i] + q[j * n + j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q[i * n + i] + q[j * n + j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for k in 0..n {
            grad[k] += q[i * n + k] * di + q[j * n + k] * dj;
        }
    };

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    Ok(SmoSolution {
        alpha,
        rho,
        iterations,
        gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmState {
    pub kernel: Kernel,
    pub support: Array2<f64>,
    /// `αᵢ yᵢ` for each support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
}

impl SvmState {
    /// Signed decision value `Σ αᵢyᵢ K(xᵢ, x) − ρ`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        (0..self.support.nrows())
            .map(|i| self.coef[i] * self.kernel.eval(row(&self.support, i), x))
            .sum::<f64>()
            - self.rho
    }

    /// Primal weight vector of a linear kernel.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != Kernel::Linear {
            return None;
        }
        let mut w = vec![0.0; self.support.ncols()];
        for i in 0..self.support.nrows() {
            for (wk, xk) in w.iter_mut().zip(row(&self.support, i)) {
                *wk += self.coef[i] * xk;
            }
        }
        Some(w)
    }
}

pub fn fit(p: &SvmParams, kernel: Kernel, data: &DatasetMatrix) -> Result<SvmState> {
    let sol = solve(p, kernel, data)?;
    let sv: Vec<usize> = (0..data.n()).filter(|&i| sol.alpha[i] > 0.0).collect();
    let mut flat = Vec::with_capacity(sv.len() * data.d());
    for &i in &sv {
        flat.extend_from_slice(data.row(i));
    }
    Ok(SvmState {
        kernel,
        support: Array2::from_shape_vec((sv.len(), data.d()), flat).expect("support shape"),
        coef: sv.iter().map(|&i| if data.y[i] { sol.alpha[i] } else { -sol.alpha[i] }).collect(),
        rho: sol.rho,
    })
}
