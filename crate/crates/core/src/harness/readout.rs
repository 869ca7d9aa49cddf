//! Multinomial logistic regression trained by mini-batch gradient descent.

use rand::seq::SliceRandom;

use super::config::ReadoutConfig;
use super::features::{FeatureMatrix, Row};
use crate::error::{Error, Result};
use crate::rng::make_rng;

/// Linear layer followed by softmax. Weights are stored feature-major:
/// `weights[j * classes + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxReadout {
    pub classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradient of the mean cross-entropy over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl SoftmaxReadout {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            classes,
            dim,
            weights: vec![0.0; classes * dim],
            bias: vec![0.0; classes],
        }
    }

    pub fn logits(&self, row: Row<'_>) -> Vec<f64> {
        let c = self.classes;
        let mut z = self.bias.clone();
        row.for_each_nonzero(|j, v| {
            let w = &self.weights[j * c..(j + 1) * c];
            z.iter_mut().zip(w).for_each(|(z, w)| *z += v * w);
        });
        z
    }

    /// Class probabilities, computed stably.
    pub fn probabilities(&self, row: Row<'_>) -> Vec<f64> {
        softmax(&self.logits(row))
    }

    /// Highest-scoring class; ties go to the lowest index.
    pub fn predict(&self, row: Row<'_>) -> usize {
        let z = self.logits(row);
        let mut best = 0;
        for (c, &v) in z.iter().enumerate() {
            if v > z[best] {
                best = c;
            }
        }
        best
    }

    pub fn accuracy(&self, features: &FeatureMatrix, labels: &[u8]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let correct = (0..features.rows())
            .filter(|&i| self.predict(features.row(i)) == labels[i] as usize)
            .count();
        correct as f64 / labels.len() as f64
    }

    /// Mean cross-entropy over the rows in `batch` and its gradient.
    pub fn gradient(&self, features: &FeatureMatrix, labels: &[u8], batch: &[usize]) -> Gradient {
        let c = self.classes;
        let mut g = Gradient {
            loss: 0.0,
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; c],
        };
        let scale = 1.0 / batch.len().max(1) as f64;
        for &i in batch {
            let row = features.row(i);
            let z = self.logits(row);
            let label = labels[i] as usize;
            g.loss += scale * (log_sum_exp(&z) - z[label]);
            let mut delta = softmax(&z);
            delta[label] -= 1.0;
            delta.iter_mut().for_each(|d| *d *= scale);
            g.bias.iter_mut().zip(&delta).for_each(|(b, d)| *b += d);
            row.for_each_nonzero(|j, v| {
                let w = &mut g.weights[j * c..(j + 1) * c];
                w.iter_mut().zip(&delta).for_each(|(w, d)| *w += v * d);
            });
        }
        g
    }

    pub fn mean_loss(&self, features: &FeatureMatrix, labels: &[u8]) -> f64 {
        let all: Vec<usize> = (0..features.rows()).collect();
        self.gradient(features, labels, &all).loss
    }

    fn apply(&mut self, g: &Gradient, step: f64) {
        self.weights
            .iter_mut()
            .zip(&g.weights)
            .for_each(|(w, d)| *w -= step * d);
        self.bias
            .iter_mut()
            .zip(&g.bias)
            .for_each(|(b, d)| *b -= step * d);
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| (v - lse).exp()).collect()
}

/// Mean training loss after each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutFit {
    pub readout: SoftmaxReadout,
    pub epoch_losses: Vec<f64>,
}

/// Fits a readout from zero weights. Rows are reshuffled every epoch from
/// the `"readout"` stream of `seed`; epoch `e` (1-based) steps by
/// `learning_rate / sqrt(e)`.
pub fn train_readout(
    features: &FeatureMatrix,
    labels: &[u8],
    classes: usize,
    config: &ReadoutConfig,
    seed: u64,
) -> Result<ReadoutFit> {
    if features.rows() != labels.len() {
        return Err(Error::Dimension {
            what: "label count",
            expected: features.rows(),
            got: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
        return Err(Error::Config(format!("label {bad} outside 0..{classes}")));
    }
    let mut readout = SoftmaxReadout::zeros(classes, features.cols());
    let mut rng = make_rng(seed, "readout");
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let step = config.learning_rate / (epoch as f64).sqrt();
        let mut total = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let g = readout.gradient(features, labels, batch);
            if !g.loss.is_finite() {
                let largest = readout.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
                return Err(Error::Numerical(format!(
                    "readout loss became {} at epoch {epoch}, batch {b} (step size {step}, \
                     largest |weight| {largest}); lower the learning rate",
                    g.loss
                )));
            }
            total += g.loss * batch.len() as f64;
            readout.apply(&g, step);
        }
        epoch_losses.push(total / labels.len().max(1) as f64);
    }
    Ok(ReadoutFit {
        readout,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_problem(
        rows: usize,
        cols: usize,
        seed: u64,
    ) -> (FeatureMatrix, Vec<u8>, SoftmaxReadout) {
        let mut rng = make_rng(seed, "problem");
        let data: Vec<Vec<f32>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels = (0..rows).map(|_| rng.random_range(0..3u8)).collect();
        let mut readout = SoftmaxReadout::zeros(3, cols);
        readout
            .weights
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-0.5..0.5));
        readout
            .bias
            .iter_mut()
            .for_each(|b| *b = rng.random_range(-0.5..0.5));
        (FeatureMatrix::dense(cols, data).unwrap(), labels, readout)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (f, labels, readout) = random_problem(10, 6, 1);
        let batch: Vec<usize> = (0..10).collect();
        let g = readout.gradient(&f, &labels, &batch);
        let h = 1e-5;
        let loss_at = |r: &SoftmaxReadout| r.gradient(&f, &labels, &batch).loss;
        for i in 0..readout.weights.len() {
            let (mut plus, mut minus) = (readout.clone(), readout.clone());
            plus.weights[i] += h;
            minus.weights[i] -= h;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let rel =
                (numeric - g.weights[i]).abs() / numeric.abs().max(g.weights[i].abs()).max(1e-8);
            assert!(
                rel < 1e-5,
                "weight {i}: analytic {} numeric {numeric}",
                g.weights[i]
            );
        }
        for c in 0..3 {
            let (mut plus, mut minus) = (readout.clone(), readout.clone());
            plus.bias[c] += h;
            minus.bias[c] -= h;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            assert!((numeric - g.bias[c]).abs() / numeric.abs().max(1e-8) < 1e-5);
        }
    }

    #[test]
    fn binary_and_dense_rows_agree() {
        let dense = FeatureMatrix::dense(4, vec![vec![0.0, 1.0, 0.0, 1.0]]).unwrap();
        let binary = FeatureMatrix::binary(4, vec![vec![1, 3]]).unwrap();
        let mut r = SoftmaxReadout::zeros(2, 4);
        r.weights = vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6, 0.7, -0.8];
        assert_eq!(r.logits(dense.row(0)), r.logits(binary.row(0)));
        let labels = [1u8];
        assert_eq!(
            r.gradient(&dense, &labels, &[0]),
            r.gradient(&binary, &labels, &[0])
        );
    }

    #[test]
    fn separable_blobs_are_learned_perfectly() {
        let mut rng = make_rng(2, "blobs");
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let class = (i % 2) as u8;
            let centre = if class == 0 { -2.0 } else { 2.0 };
            rows.push(vec![
                centre + rng.random_range(-1.0f32..1.0),
                rng.random_range(-1.0f32..1.0),
            ]);
            labels.push(class);
        }
        let f = FeatureMatrix::dense(2, rows).unwrap();
        let fit = train_readout(&f, &labels, 2, &ReadoutConfig::default(), 3).unwrap();
        assert_eq!(fit.readout.accuracy(&f, &labels), 1.0);
        assert!(fit.epoch_losses.last().unwrap() < &fit.epoch_losses[0]);
    }

    #[test]
    fn divergence_is_reported() {
        let f = FeatureMatrix::dense(1, vec![vec![f32::MAX], vec![-f32::MAX]]).unwrap();
        let config = ReadoutConfig {
            learning_rate: 1e300,
            ..ReadoutConfig::default()
        };
        let r = train_readout(&f, &[0, 1], 2, &config, 4);
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn training_is_deterministic() {
        let (f, labels, _) = random_problem(50, 5, 5);
        let a = train_readout(&f, &labels, 3, &ReadoutConfig::default(), 9).unwrap();
        let b = train_readout(&f, &labels, 3, &ReadoutConfig::default(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mismatched_labels_are_rejected() {
        let (f, _, _) = random_problem(4, 2, 6);
        assert!(train_readout(&f, &[0, 1], 3, &ReadoutConfig::default(), 0).is_err());
        assert!(train_readout(&f, &[0, 1, 2, 7], 3, &ReadoutConfig::default(), 0).is_err());
    }
}
