//! Linear epsilon-insensitive support vector regression.
//!
//! The dual is solved by SMO with second-order working-set selection over the
//! 2n variables (alpha, alpha*). For a linear kernel the gradient is kept
//! implicitly through the primal weight vector. After convergence the bias is
//! recomputed exactly by minimizing the primal over b with w fixed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

const TAU: f64 = 1e-12;
const MAX_ITER_PER_SAMPLE: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    /// Stopping threshold on the maximal KKT violation, relative to max(1, C).
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            c: DEFAULT_C,
            epsilon: DEFAULT_EPSILON,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvr {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Primal objective at (weights, bias).
    pub objective: f64,
    pub iterations: usize,
}

impl LinearSvr {
    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// 0.5 |w|^2 + C * sum max(0, |w.x + b - y| - epsilon).
pub fn svr_objective(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[f64], c: f64, epsilon: f64) -> f64 {
    let reg = 0.5 * dot(weights, weights);
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| ((dot(weights, xi) + bias - yi).abs() - epsilon).max(0.0))
        .sum();
    reg + c * loss
}

/// Midpoint of the minimizer interval of sum max(0, |r_i - b| - epsilon).
pub fn optimal_bias(residuals: &[f64], epsilon: f64) -> f64 {
    let mut breaks: Vec<f64> = residuals
        .iter()
        .flat_map(|r| [r - epsilon, r + epsilon])
        .collect();
    breaks.sort_by(f64::total_cmp);
    let mut upper: Vec<f64> = residuals.iter().map(|r| r + epsilon).collect();
    let mut lower: Vec<f64> = residuals.iter().map(|r| r - epsilon).collect();
    upper.sort_by(f64::total_cmp);
    lower.sort_by(f64::total_cmp);
    // slope just right of t: #{r+eps <= t} - #{r-eps > t}
    let right_slope = |t: f64| -> i64 {
        let above = upper.partition_point(|&u| u <= t) as i64;
        let below = lower.len() as i64 - lower.partition_point(|&l| l <= t) as i64;
        above - below
    };
    let lo = breaks.iter().copied().find(|&t| right_slope(t) >= 0);
    let hi = breaks.iter().copied().find(|&t| right_slope(t) > 0);
    match (lo, hi) {
        (Some(lo), Some(hi)) => 0.5 * (lo + hi),
        (Some(lo), None) => lo,
        _ => 0.0,
    }
}

fn validate(x: &[Vec<f64>], y: &[f64], params: &SvrParams) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} feature rows, {} targets", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!("SVR needs at least 2 samples, got {}", x.len())));
    }
    if !(params.c > 0.0 && params.c.is_finite()) || !(params.epsilon >= 0.0 && params.epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need C > 0 and epsilon >= 0, got C={} epsilon={}",
            params.c, params.epsilon
        )));
    }
    let d = x[0].len();
    if let Some(i) = x.iter().position(|r| r.len() != d) {
        return Err(Error::DimensionMismatch(format!("sample {i} has {} features, expected {d}", x[i].len())));
    }
    let bad: Vec<usize> = (0..x.len())
        .filter(|&i| !y[i].is_finite() || x[i].iter().any(|v| !v.is_finite()))
        .collect();
    if !bad.is_empty() {
        return Err(Error::NonFiniteSamples(bad));
    }
    Ok(d)
}

/// Train a linear epsilon-SVR. Deterministic for a fixed sample order.
pub fn train_svr(x: &[Vec<f64>], y: &[f64], params: &SvrParams) -> Result<LinearSvr> {
    let d = validate(x, y, params)?;
    let n = x.len();
    let c = params.c;
    let eps = params.epsilon;
    let tol = params.tolerance * c.max(1.0);
    let kdiag: Vec<f64> = x.iter().map(|r| dot(r, r)).collect();

    // t < n: alpha_t with sign +1; t >= n: alpha*_{t-n} with sign -1
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let base = |t: usize| if t < n { t } else { t - n };
    let p: Vec<f64> = (0..2 * n)
        .map(|t| if t < n { eps - y[t] } else { eps + y[t - n] })
        .collect();
    let mut a = vec![0.0; 2 * n];
    let mut w = vec![0.0; d];
    let mut fx = vec![0.0; n];
    let grad = |t: usize, fx: &[f64]| sign(t) * fx[base(t)] + p[t];

    let max_iter = MAX_ITER_PER_SAMPLE.saturating_mul(n).max(1_000_000);
    let mut iterations = 0;
    loop {
        // i: maximal violating variable in I_up
        let (mut gmax, mut i_sel) = (f64::NEG_INFINITY, usize::MAX);
        for t in 0..2 * n {
            let up = if t < n { a[t] < c } else { a[t] > 0.0 };
            if up {
                let v = -sign(t) * grad(t, &fx);
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        // j: second-order choice in I_low
        let (mut gmin, mut j_sel, mut best_obj) = (f64::INFINITY, usize::MAX, f64::INFINITY);
        for t in 0..2 * n {
            let low = if t < n { a[t] > 0.0 } else { a[t] < c };
            if !low {
                continue;
            }
            let v = -sign(t) * grad(t, &fx);
            gmin = gmin.min(v);
            if i_sel != usize::MAX && v < gmax {
                let b = gmax - v;
                let (bi, bt) = (base(i_sel), base(t));
                let mut quad = kdiag[bi] + kdiag[bt] - 2.0 * dot(&x[bi], &x[bt]);
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -b * b / quad;
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = t;
                }
            }
        }
        if gmax - gmin < tol || i_sel == usize::MAX || j_sel == usize::MAX || iterations >= max_iter {
            if iterations >= max_iter {
                log::warn!("SVR stopped at iteration limit with KKT gap {:e}", gmax - gmin);
            }
            break;
        }
        iterations += 1;

        let (i, j) = (i_sel, j_sel);
        let (bi, bj) = (base(i), base(j));
        let kij = dot(&x[bi], &x[bj]);
        let qij = sign(i) * sign(j) * kij;
        let (gi, gj) = (grad(i, &fx), grad(j, &fx));
        let (old_i, old_j) = (a[i], a[j]);
        if sign(i) != sign(j) {
            let mut quad = kdiag[bi] + kdiag[bj] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-gi - gj) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let mut quad = kdiag[bi] + kdiag[bj] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (gi - gj) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }

        // w = sum (alpha - alpha*) x; keep f(x_t) = w.x_t in step
        let di = sign(i) * (a[i] - old_i);
        let dj = sign(j) * (a[j] - old_j);
        for k in 0..d {
            w[k] += di * x[bi][k] + dj * x[bj][k];
        }
        for (t, f) in fx.iter_mut().enumerate() {
            *f += di * dot(&x[bi], &x[t]) + dj * dot(&x[bj], &x[t]);
        }
    }

    let residuals: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| yi - dot(&w, xi)).collect();
    let bias = optimal_bias(&residuals, eps);
    let objective = svr_objective(&w, bias, x, y, c, eps);
    Ok(LinearSvr {
        weights: w,
        bias,
        objective,
        iterations,
    })
}
