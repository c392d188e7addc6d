//! L2-regularized logistic regression with a regularized bias term, minimizing
//! `½‖w‖² + C Σ log(1 + exp(−yᵢ wᵀxᵢ))` by Newton's method with backtracking.

use serde::{Deserialize, Serialize};

use super::linalg::{dot, sigmoid, solve_spd};
use super::DatasetMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegParams {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            c: 1.0,
            tol: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegState {
    pub w: Vec<f64>,
    pub bias: f64,
}

impl LogRegState {
    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.w, x) + self.bias)
    }
}

fn log1pexp(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

/// Objective and gradient over the augmented weights `[w, b]`.
pub fn objective(theta: &[f64], data: &DatasetMatrix, c: f64) -> (f64, Vec<f64>) {
    let d = data.d();
    let mut f = 0.5 * dot(theta, theta);
    let mut g = theta.to_vec();
    for i in 0..data.n() {
        let x = data.row(i);
        let y = if data.y[i] { 1.0 } else { -1.0 };
        let z = y * (dot(&theta[..d], x) + theta[d]);
        f += c * log1pexp(-z);
        let coef = c * (sigmoid(z) - 1.0) * y;
        for (gk, xk) in g.iter_mut().zip(x) {
            *gk += coef * xk;
        }
        g[d] += coef;
    }
    (f, g)
}

pub fn fit(p: &LogRegParams, data: &DatasetMatrix) -> Result<LogRegState> {
    if !(p.c > 0.0) {
        return Err(Error::Config("logreg c must be positive".into()));
    }
    let d = data.d();
    let m = d + 1;
    let mut theta = vec![0.0; m];
    let (mut f, mut g) = objective(&theta, data, p.c);
    for _ in 0..p.max_iter {
        if dot(&g, &g).sqrt() <= p.tol {
            return Ok(LogRegState {
                w: theta[..d].to_vec(),
                bias: theta[d],
            });
        }
        let mut h = vec![0.0; m * m];
        for k in 0..m {
            h[k * m + k] = 1.0;
        }
        for i in 0..data.n() {
            let mut xa = data.row(i).to_vec();
            xa.push(1.0);
            let s = sigmoid(dot(&theta, &xa));
            let w = p.c * s * (1.0 - s);
            for a in 0..m {
                for b in 0..m {
                    h[a * m + b] += w * xa[a] * xa[b];
                }
            }
        }
        let step = solve_spd(&h, m, &g).ok_or_else(|| Error::Training("logreg Hessian is not positive definite".into()))?;
        let slope = -dot(&g, &step);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let (fc, gc) = objective(&cand, data, p.c);
            if fc <= f + 1e-4 * t * slope || t < 1e-10 {
                theta = cand;
                f = fc;
                g = gc;
                break;
            }
            t *= 0.5;
        }
    }
    if dot(&g, &g).sqrt() <= p.tol {
        return Ok(LogRegState {
            w: theta[..d].to_vec(),
            bias: theta[d],
        });
    }
    Err(Error::NoConvergence { iterations: p.max_iter })
}
