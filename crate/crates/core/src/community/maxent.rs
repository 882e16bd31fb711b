//! Maximum-entropy (multinomial logistic) classifier.
//!
//! Training maximizes the L2-penalized log-likelihood
//! `Σ_i log p(y_i | x_i) − λ/2 · ‖W‖²` where the per-class intercepts are left
//! out of the penalty. The objective is concave, so gradient ascent from zero
//! weights reaches the unique optimum whenever `λ > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAD_TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 10_000;

/// Labelled training set with class indices `0..n_classes`.
#[derive(Debug, Clone)]
pub struct MaxEntProblem<'a> {
    pub features: &'a [Vec<f64>],
    pub targets: Vec<usize>,
    pub n_classes: usize,
    pub dim: usize,
    pub lambda: f64,
}

/// Flat parameter layout: `n_classes × dim` weights row-major, then `n_classes` intercepts.
pub type Params = Vec<f64>;

fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

impl MaxEntProblem<'_> {
    pub fn n_params(&self) -> usize {
        self.n_classes * (self.dim + 1)
    }

    fn scores(&self, params: &[f64], x: &[f64], out: &mut [f64]) {
        let bias = &params[self.n_classes * self.dim..];
        for (c, o) in out.iter_mut().enumerate() {
            let w = &params[c * self.dim..(c + 1) * self.dim];
            *o = bias[c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn objective(&self, params: &[f64]) -> f64 {
        let mut scores = vec![0.0; self.n_classes];
        let mut ll = 0.0;
        for (x, &y) in self.features.iter().zip(&self.targets) {
            self.scores(params, x, &mut scores);
            ll += scores[y] - log_sum_exp(&scores);
        }
        let penalty: f64 = params[..self.n_classes * self.dim]
            .iter()
            .map(|w| w * w)
            .sum();
        ll - 0.5 * self.lambda * penalty
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        let (k, d) = (self.n_classes, self.dim);
        let mut grad = vec![0.0; self.n_params()];
        let mut p = vec![0.0; k];
        for (x, &y) in self.features.iter().zip(&self.targets) {
            self.scores(params, x, &mut p);
            softmax_in_place(&mut p);
            for c in 0..k {
                let resid = if c == y { 1.0 } else { 0.0 } - p[c];
                grad[k * d + c] += resid;
                for (g, xv) in grad[c * d..(c + 1) * d].iter_mut().zip(x) {
                    *g += resid * xv;
                }
            }
        }
        for (g, w) in grad[..k * d].iter_mut().zip(&params[..k * d]) {
            *g -= self.lambda * w;
        }
        grad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntModel {
    /// Original label of each class index.
    pub classes: Vec<usize>,
    /// `classes.len() × dim` weights.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub lambda: f64,
    pub convergence: Convergence,
    /// Objective after every accepted step, starting from the zero model.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    /// Probability per entry of `MaxEntModel::classes`.
    pub probabilities: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Trains on `features` with community `labels`. Classes are the distinct labels present.
pub fn train_maxent(features: &[Vec<f64>], labels: &[usize], lambda: f64) -> Result<MaxEntModel> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            actual: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let dim = features[0].len();
    for (row, x) in features.iter().enumerate() {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: x.len(),
            });
        }
        if let Some(col) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let targets = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    let problem = MaxEntProblem {
        features,
        targets,
        n_classes: classes.len(),
        dim,
        lambda,
    };

    let mut params = vec![0.0; problem.n_params()];
    let mut objective = problem.objective(&params);
    let mut trace = vec![objective];
    let mut grad = problem.gradient(&params);
    let mut grad_norm = norm(&grad);
    let mut step = 1.0 / features.len() as f64;
    let mut iterations = 0;
    let mut candidate = vec![0.0; params.len()];

    while grad_norm >= GRAD_TOLERANCE && iterations < MAX_ITERATIONS {
        let g2 = grad_norm * grad_norm;
        let mut accepted = false;
        while step > 1e-30 {
            for ((c, p), g) in candidate.iter_mut().zip(&params).zip(&grad) {
                *c = p + step * g;
            }
            let cand_obj = problem.objective(&candidate);
            if cand_obj >= objective + 1e-4 * step * g2 {
                std::mem::swap(&mut params, &mut candidate);
                objective = cand_obj;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // objective flat to machine precision
            break;
        }
        iterations += 1;
        trace.push(objective);
        grad = problem.gradient(&params);
        grad_norm = norm(&grad);
    }

    let k = classes.len();
    let weights = (0..k)
        .map(|c| params[c * dim..(c + 1) * dim].to_vec())
        .collect();
    let intercepts = params[k * dim..].to_vec();
    Ok(MaxEntModel {
        classes,
        weights,
        intercepts,
        lambda,
        convergence: Convergence {
            iterations,
            gradient_norm: grad_norm,
            objective,
            converged: grad_norm < GRAD_TOLERANCE,
        },
        objective_trace: trace,
    })
}

impl MaxEntModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Softmax over class scores; ties in the argmax go to the lower class index.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let mut p: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .collect();
        softmax_in_place(&mut p);
        let mut best = 0;
        for (i, v) in p.iter().enumerate() {
            if *v > p[best] {
                best = i;
            }
        }
        Ok(Prediction {
            label: self.classes[best],
            probabilities: p,
        })
    }
}

/// Convenience wrapper matching the free-function form of the classifier API.
pub fn predict_community(model: &MaxEntModel, x: &[f64]) -> Result<Prediction> {
    model.predict(x)
}
