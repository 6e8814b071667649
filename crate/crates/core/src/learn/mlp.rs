//! One-hidden-layer perceptron: logistic hidden units, softmax output,
//! cross-entropy loss, per-sample SGD on standardized inputs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Classifier, Dataset, Standardizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub hidden_units: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_units: 32,
            epochs: 150,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

/// Parameters are stored flat as `[w1 (h x d), b1 (h), w2 (k x h), b2 (k)]`,
/// row-major, which is also the order of [`MlpModel::gradient`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub(super) classes: Vec<String>,
    pub(super) scaler: Standardizer,
    pub(super) hidden: usize,
    pub(super) params: Vec<f64>,
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn softmax(o: &mut [f64]) {
    let max = o.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in o.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    o.iter_mut().for_each(|v| *v /= sum);
}

struct Pass {
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, identity input scaling.
    pub fn init(classes: Vec<String>, n_features: usize, hidden: usize, seed: u64) -> Result<Self> {
        if classes.len() < 2 || n_features == 0 || hidden == 0 {
            return Err(Error::Config(
                "mlp needs >= 2 classes, >= 1 feature and >= 1 hidden unit".into(),
            ));
        }
        let (d, k) = (n_features, classes.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(hidden * d + hidden + k * hidden + k);
        let a1 = (6.0 / (d + hidden) as f64).sqrt();
        params.extend((0..hidden * d).map(|_| rng.random_range(-a1..a1)));
        params.extend(std::iter::repeat_n(0.0, hidden));
        let a2 = (6.0 / (hidden + k) as f64).sqrt();
        params.extend((0..k * hidden).map(|_| rng.random_range(-a2..a2)));
        params.extend(std::iter::repeat_n(0.0, k));
        Ok(MlpModel {
            classes,
            scaler: Standardizer {
                mean: vec![0.0; d],
                std: vec![1.0; d],
            },
            hidden,
            params,
        })
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                actual: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let (d, h, k) = (self.scaler.dims(), self.hidden, self.classes.len());
        let b1 = h * d;
        let w2 = b1 + h;
        let b2 = w2 + k * h;
        (b1, w2, b2)
    }

    fn forward(&self, z: &[f64]) -> Pass {
        let (d, h, k) = (self.scaler.dims(), self.hidden, self.classes.len());
        let (ob1, ow2, ob2) = self.offsets();
        let p = &self.params;
        let hidden: Vec<f64> = (0..h)
            .map(|j| {
                let row = &p[j * d..(j + 1) * d];
                logistic(row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + p[ob1 + j])
            })
            .collect();
        let mut probs: Vec<f64> = (0..k)
            .map(|c| {
                let row = &p[ow2 + c * h..ow2 + (c + 1) * h];
                row.iter().zip(&hidden).map(|(w, a)| w * a).sum::<f64>() + p[ob2 + c]
            })
            .collect();
        softmax(&mut probs);
        Pass { hidden, probs }
    }

    /// Softmax class probabilities for a raw feature row.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.forward(&self.scaler.apply(x)).probs
    }

    /// Cross-entropy of class `target` for a raw feature row.
    pub fn loss(&self, x: &[f64], target: usize) -> f64 {
        -self.probabilities(x)[target].ln()
    }

    /// Backpropagated gradient of [`MlpModel::loss`] in flat parameter order.
    pub fn gradient(&self, x: &[f64], target: usize) -> Vec<f64> {
        let z = self.scaler.apply(x);
        let mut g = vec![0.0; self.params.len()];
        self.accumulate_gradient(&z, target, &mut g);
        g
    }

    fn accumulate_gradient(&self, z: &[f64], target: usize, g: &mut [f64]) {
        let (d, h, k) = (self.scaler.dims(), self.hidden, self.classes.len());
        let (ob1, ow2, ob2) = self.offsets();
        let pass = self.forward(z);
        let mut dout = pass.probs;
        dout[target] -= 1.0;
        let mut dh = vec![0.0; h];
        for c in 0..k {
            g[ob2 + c] += dout[c];
            for j in 0..h {
                g[ow2 + c * h + j] += dout[c] * pass.hidden[j];
                dh[j] += dout[c] * self.params[ow2 + c * h + j];
            }
        }
        for j in 0..h {
            let a = pass.hidden[j];
            let dz = dh[j] * a * (1.0 - a);
            g[ob1 + j] += dz;
            for (gi, xi) in g[j * d..(j + 1) * d].iter_mut().zip(z) {
                *gi += dz * xi;
            }
        }
    }
}

impl Classifier for MlpModel {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn n_features(&self) -> usize {
        self.scaler.dims()
    }

    fn predict_index(&self, x: &[f64]) -> usize {
        let p = self.probabilities(x);
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        best
    }
}

pub fn train_mlp(data: &Dataset, params: &MlpParams) -> Result<MlpModel> {
    data.check_trainable()?;
    if !(params.learning_rate > 0.0) {
        return Err(Error::Config("mlp learning_rate must be > 0".into()));
    }
    let mut model = MlpModel::init(
        data.classes().to_vec(),
        data.n_features(),
        params.hidden_units,
        params.seed,
    )?;
    model.scaler = Standardizer::fit(data.features());
    let rows: Vec<Vec<f64>> = data.features().iter().map(|x| model.scaler.apply(x)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut g = vec![0.0; model.params.len()];
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            g.iter_mut().for_each(|v| *v = 0.0);
            model.accumulate_gradient(&rows[i], data.targets()[i], &mut g);
            for (p, gi) in model.params.iter_mut().zip(&g) {
                *p -= params.learning_rate * gi;
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn xor_with_four_hidden_units() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = ["even", "odd", "odd", "even"];
        let d = Dataset::new([x.clone(), x.clone()].concat(), &y.repeat(2)).unwrap();
        let p = MlpParams {
            hidden_units: 4,
            epochs: 4000,
            learning_rate: 0.5,
            seed: 3,
        };
        let m = train_mlp(&d, &p).unwrap();
        for (xi, yi) in x.iter().zip(y) {
            assert_eq!(m.predict(xi).unwrap(), yi);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..10 {
            let mut m = MlpModel::init(names(3), 4, 5, trial).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t = trial as usize % 3;
            let g = m.gradient(&x, t);
            let base = m.params().to_vec();
            let h = 1e-5;
            for i in 0..base.len() {
                let mut p = base.clone();
                p[i] += h;
                m.set_params(&p).unwrap();
                let up = m.loss(&x, t);
                p[i] -= 2.0 * h;
                m.set_params(&p).unwrap();
                let down = m.loss(&x, t);
                let num = (up - down) / (2.0 * h);
                let rel = (num - g[i]).abs() / num.abs().max(g[i].abs()).max(1e-6);
                assert!(rel < 1e-4, "param {i}: {num} vs {}", g[i]);
            }
            m.set_params(&base).unwrap();
        }
    }

    #[test]
    fn zero_epochs_gives_normalized_softmax() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64, 1.0]).collect();
        let d = Dataset::new(x.clone(), &["a", "b", "c", "a", "b", "c"]).unwrap();
        let m = train_mlp(&d, &MlpParams { epochs: 0, ..Default::default() }).unwrap();
        for xi in &x {
            let s: f64 = m.probabilities(xi).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y = ["a", "a", "a", "a", "b", "b", "b", "b"];
        let d = Dataset::new(x, &y).unwrap();
        let p = MlpParams { epochs: 20, seed: 9, ..Default::default() };
        assert_eq!(train_mlp(&d, &p).unwrap(), train_mlp(&d, &p).unwrap());
    }
}
