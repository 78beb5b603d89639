//! One-class extreme learning machine.
//!
//! Features are standardized with the training statistics and mapped through
//! a fixed random sigmoid layer whose weights are uniform in
//! `[-1/sqrt(d), 1/sqrt(d)]` for `d` inputs; output weights are the ridge solution that
//! maps every training sample to the constant target `1`. The anomaly score
//! of a sample is `|1 - y|`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LatentFeatures;
use crate::error::{Error, Result};
use crate::network::sigmoid;

pub const DEFAULT_NEURONS: usize = 50;
pub const DEFAULT_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassElm {
    /// `input_dim` rows of `neurons` weights.
    pub hidden_weights: Vec<Vec<f64>>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub neurons: usize,
    pub ridge_lambda: f64,
    pub feature_scaler: Vec<Standardization>,
}

impl OneClassElm {
    pub fn input_dimension(&self) -> usize {
        self.feature_scaler.len()
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = x
            .iter()
            .zip(&self.feature_scaler)
            .map(|(v, s)| (v - s.mean) / s.stddev)
            .collect();
        (0..self.neurons)
            .map(|j| {
                let pre = self.hidden_bias[j]
                    + z.iter()
                        .zip(&self.hidden_weights)
                        .map(|(zi, row)| zi * row[j])
                        .sum::<f64>();
                sigmoid(pre)
            })
            .collect()
    }

    /// Network output `y` for a raw feature vector.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dimension() {
            return Err(Error::InvalidInput(format!(
                "expected {} features, got {}",
                self.input_dimension(),
                x.len()
            )));
        }
        Ok(self
            .hidden(x)
            .iter()
            .zip(&self.output_weights)
            .map(|(h, b)| h * b)
            .sum())
    }

    pub fn score_vector(&self, x: &[f64]) -> Result<f64> {
        Ok((1.0 - self.predict(x)?).abs())
    }
}

/// Fits the one-class machine to raw feature vectors.
pub fn elm_fit_vectors(
    samples: &[Vec<f64>],
    neurons: usize,
    ridge_lambda: f64,
    seed: u64,
) -> Result<OneClassElm> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Config("no training features".into()))?;
    let dim = first.len();
    if dim == 0 || samples.iter().any(|s| s.len() != dim) {
        return Err(Error::InvalidInput(
            "feature vectors differ in length".into(),
        ));
    }
    if neurons == 0 {
        return Err(Error::Config(
            "at least one hidden neuron is required".into(),
        ));
    }
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(Error::Config(format!(
            "ridge lambda must be >= 0, got {ridge_lambda}"
        )));
    }

    let n = samples.len() as f64;
    let feature_scaler = (0..dim)
        .map(|i| {
            let mean = samples.iter().map(|s| s[i]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[i] - mean).powi(2)).sum::<f64>() / n;
            let stddev = var.sqrt();
            Standardization {
                mean,
                stddev: if stddev > 0.0 && stddev.is_finite() {
                    stddev
                } else {
                    1.0
                },
            }
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fan_in = (dim as f64).sqrt().recip();
    let hidden_weights = (0..dim)
        .map(|_| {
            (0..neurons)
                .map(|_| fan_in * rng.random_range(-1.0..=1.0))
                .collect()
        })
        .collect();
    let hidden_bias = (0..neurons).map(|_| rng.random_range(-1.0..=1.0)).collect();

    let mut elm = OneClassElm {
        hidden_weights,
        hidden_bias,
        output_weights: vec![0.0; neurons],
        neurons,
        ridge_lambda,
        feature_scaler,
    };

    let h = DMatrix::from_fn(samples.len(), neurons, |_, _| 0.0);
    let h = samples.iter().enumerate().fold(h, |mut h, (r, s)| {
        for (c, v) in elm.hidden(s).into_iter().enumerate() {
            h[(r, c)] = v;
        }
        h
    });
    let mut gram = h.transpose() * &h;
    for i in 0..neurons {
        gram[(i, i)] += ridge_lambda;
    }
    let rhs = h.transpose() * DVector::from_element(samples.len(), 1.0);
    let beta = match gram.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::InvalidInput(format!("ridge system is singular: {e}")))?,
    };
    elm.output_weights = beta.iter().copied().collect();
    Ok(elm)
}

pub fn elm_fit(
    features: &[LatentFeatures],
    neurons: usize,
    ridge_lambda: f64,
    seed: u64,
) -> Result<OneClassElm> {
    let vectors: Vec<Vec<f64>> = features.iter().map(LatentFeatures::to_vec).collect();
    elm_fit_vectors(&vectors, neurons, ridge_lambda, seed)
}

/// Anomaly score `|1 - y|`; larger is more anomalous.
pub fn elm_score(model: &OneClassElm, features: &LatentFeatures) -> Result<f64> {
    model.score_vector(&features.to_vec())
}
