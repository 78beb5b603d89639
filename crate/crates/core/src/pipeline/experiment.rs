//! End-to-end drivers shared by the command line and the acceptance suite.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::analysis::{
    dict_classify, dict_train, elm_fit, elm_score, extract_features, roc_auc, DictionaryModel,
    LatentFeatures, OneClassElm, DEFAULT_NEURONS, DEFAULT_RIDGE,
};
use crate::error::Result;
use crate::network::{DespawnModel, SharingMode};
use crate::training::{train, TrainConfig, TrainReport};

/// Latent features of every `(id, signal)` pair, in input order.
pub fn feature_rows<'a, I>(
    model: &DespawnModel,
    signals: I,
) -> Result<Vec<(String, LatentFeatures)>>
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let items: Vec<(&str, &[f64])> = signals.into_iter().collect();
    items
        .par_iter()
        .map(|(id, s)| Ok((id.to_string(), extract_features(s, model)?)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct DetectionConfig {
    pub mode: SharingMode,
    pub train: TrainConfig,
    pub neurons: usize,
    pub ridge: f64,
    pub elm_seed: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            mode: SharingMode::PerLevelCqfHt,
            train: TrainConfig::default(),
            neurons: DEFAULT_NEURONS,
            ridge: DEFAULT_RIDGE,
            elm_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectionOutcome {
    pub report: TrainReport,
    pub elm: OneClassElm,
    pub train_features: Vec<(String, LatentFeatures)>,
    pub test_features: Vec<(String, LatentFeatures)>,
    pub test_scores: Vec<f64>,
    pub auc: f64,
}

/// Train on normal windows, fit the one-class head on their features, then
/// score and rank the labelled test windows (`true` = anomalous).
pub fn run_detection(
    train_set: &[(String, Vec<f64>)],
    test_set: &[(String, Vec<f64>, bool)],
    config: &DetectionConfig,
) -> Result<DetectionOutcome> {
    let signals: Vec<Vec<f64>> = train_set.iter().map(|(_, s)| s.clone()).collect();
    let report = train(&signals, config.mode, &config.train)?;
    let model = &report.final_model;
    let train_features = feature_rows(
        model,
        train_set.iter().map(|(id, s)| (id.as_str(), s.as_slice())),
    )?;
    let features: Vec<LatentFeatures> = train_features.iter().map(|(_, f)| f.clone()).collect();
    let elm = elm_fit(&features, config.neurons, config.ridge, config.elm_seed)?;
    let test_features = feature_rows(
        model,
        test_set
            .iter()
            .map(|(id, s, _)| (id.as_str(), s.as_slice())),
    )?;
    let test_scores = test_features
        .iter()
        .map(|(_, f)| elm_score(&elm, f))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<bool> = test_set.iter().map(|(_, _, a)| *a).collect();
    let auc = roc_auc(&test_scores, &labels)?;
    Ok(DetectionOutcome {
        report,
        elm,
        train_features,
        test_features,
        test_scores,
        auc,
    })
}

#[derive(Debug, Clone)]
pub struct ClassificationOutcome {
    pub dictionary: DictionaryModel,
    /// `(true label, predicted label, per-class losses)` per test signal.
    pub predictions: Vec<(String, String, BTreeMap<String, f64>)>,
    pub accuracy: f64,
}

pub fn classification_accuracy(predictions: &[(String, String, BTreeMap<String, f64>)]) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    let correct = predictions.iter().filter(|(t, p, _)| t == p).count();
    correct as f64 / predictions.len() as f64
}

pub fn run_classification(
    train_sets: &BTreeMap<String, Vec<Vec<f64>>>,
    test_set: &[(String, Vec<f64>)],
    mode: SharingMode,
    config: &TrainConfig,
) -> Result<ClassificationOutcome> {
    let dictionary = dict_train(train_sets, mode, config)?;
    let predictions = test_set
        .par_iter()
        .map(|(label, s)| {
            let (pred, losses) = dict_classify(s, &dictionary)?;
            Ok((label.clone(), pred, losses))
        })
        .collect::<Result<Vec<_>>>()?;
    let accuracy = classification_accuracy(&predictions);
    Ok(ClassificationOutcome {
        dictionary,
        predictions,
        accuracy,
    })
}
