//! One-vs-rest linear SVMs trained by stochastic subgradient descent on the
//! L2-regularized hinge loss. Inputs are standardized first; the fitted
//! scaler is part of the model.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Classifier, Dataset, Standardizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            epochs: 60,
            learning_rate: 0.1,
            l2: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub(super) classes: Vec<String>,
    pub(super) scaler: Standardizer,
    /// One weight row and bias per class, in class order.
    pub(super) weights: Vec<Vec<f64>>,
    pub(super) biases: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SvmModel {
    /// Raw margins of every head for a feature row.
    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        let z = self.scaler.apply(x);
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, &z) + b)
            .collect()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }
}

impl Classifier for SvmModel {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn n_features(&self) -> usize {
        self.scaler.dims()
    }

    fn predict_index(&self, x: &[f64]) -> usize {
        let m = self.margins(x);
        let mut best = 0;
        for (i, &v) in m.iter().enumerate() {
            if v > m[best] {
                best = i;
            }
        }
        best
    }
}

fn sign(target: usize, class: usize) -> f64 {
    if target == class {
        1.0
    } else {
        -1.0
    }
}

/// Sum over heads of `l2/2 |w|^2 + mean hinge` on standardized rows.
pub fn svm_objective(model: &SvmModel, data: &Dataset, l2: f64) -> f64 {
    let rows: Vec<Vec<f64>> = data.features().iter().map(|x| model.scaler.apply(x)).collect();
    head_objectives(&rows, data.targets(), &model.weights, &model.biases, l2)
}

fn head_objectives(rows: &[Vec<f64>], targets: &[usize], w: &[Vec<f64>], b: &[f64], l2: f64) -> f64 {
    let n = rows.len() as f64;
    w.iter()
        .zip(b)
        .enumerate()
        .map(|(c, (wc, bc))| {
            let hinge: f64 = rows
                .iter()
                .zip(targets)
                .map(|(z, &t)| (1.0 - sign(t, c) * (dot(wc, z) + bc)).max(0.0))
                .sum();
            0.5 * l2 * dot(wc, wc) + hinge / n
        })
        .sum()
}

pub fn train_svm(data: &Dataset, params: &SvmParams) -> Result<SvmModel> {
    train_svm_with_history(data, params).map(|(m, _)| m)
}

/// Also returns the full training objective recomputed after every epoch.
pub fn train_svm_with_history(data: &Dataset, params: &SvmParams) -> Result<(SvmModel, Vec<f64>)> {
    data.check_trainable()?;
    if !(params.learning_rate > 0.0) || !(params.l2 > 0.0) {
        return Err(Error::Config("svm learning_rate and l2 must be > 0".into()));
    }
    let scaler = Standardizer::fit(data.features());
    let rows: Vec<Vec<f64>> = data.features().iter().map(|x| scaler.apply(x)).collect();
    let targets = data.targets();
    let k = data.classes().len();
    let d = data.n_features();
    let mut w = vec![vec![0.0; d]; k];
    let mut b = vec![0.0; k];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let (lr, lambda) = (params.learning_rate, params.l2);
    let mut history = Vec::with_capacity(params.epochs);
    let mut t = 0u64;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = lr / (1.0 + lr * lambda * t as f64);
            let z = &rows[i];
            for c in 0..k {
                let y = sign(targets[i], c);
                let violated = y * (dot(&w[c], z) + b[c]) < 1.0;
                let shrink = 1.0 - eta * lambda;
                for (wj, zj) in w[c].iter_mut().zip(z) {
                    *wj *= shrink;
                    if violated {
                        *wj += eta * y * zj;
                    }
                }
                if violated {
                    b[c] += eta * y;
                }
            }
        }
        history.push(head_objectives(&rows, targets, &w, &b, lambda));
    }
    Ok((
        SvmModel {
            classes: data.classes().to_vec(),
            scaler,
            weights: w,
            biases: b,
        },
        history,
    ))
}
