use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::DespawnModel;

/// Residual and per-level coefficient statistics of one signal, `2 + 2L`
/// values in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentFeatures {
    pub res_mean: f64,
    pub res_max: f64,
    pub l1_mean: Vec<f64>,
    pub l1_max: Vec<f64>,
}

impl LatentFeatures {
    pub fn dimension(&self) -> usize {
        2 + self.l1_mean.len() + self.l1_max.len()
    }

    /// `[res_mean, res_max, l1_mean.., l1_max..]`
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dimension());
        v.push(self.res_mean);
        v.push(self.res_max);
        v.extend_from_slice(&self.l1_mean);
        v.extend_from_slice(&self.l1_max);
        v
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() < 4 || !values.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "feature vector of length {} is not 2 + 2L",
                values.len()
            )));
        }
        let levels = (values.len() - 2) / 2;
        Ok(Self {
            res_mean: values[0],
            res_max: values[1],
            l1_mean: values[2..2 + levels].to_vec(),
            l1_max: values[2 + levels..].to_vec(),
        })
    }
}

fn mean_and_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut sum, mut max, mut n) = (0.0, 0.0f64, 0usize);
    for v in values {
        sum += v;
        max = max.max(v);
        n += 1;
    }
    (if n == 0 { 0.0 } else { sum / n as f64 }, max)
}

pub fn extract_features(signal: &[f64], model: &DespawnModel) -> Result<LatentFeatures> {
    let record = model.forward(signal)?;
    let (res_mean, res_max) = mean_and_max(
        signal
            .iter()
            .zip(&record.reconstruction)
            .map(|(f, r)| (f - r).abs()),
    );
    let (l1_mean, l1_max) = record
        .pyramid
        .details
        .iter()
        .map(|d| mean_and_max(d.iter().map(|c| c.abs())))
        .unzip();
    Ok(LatentFeatures {
        res_mean,
        res_max,
        l1_mean,
        l1_max,
    })
}
