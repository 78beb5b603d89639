//! Classification by per-class reconstruction models: one network is trained
//! on each class and a signal is assigned to the class whose network scores
//! it with the lowest objective.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::{default_levels, DespawnModel, SharingMode};
use crate::training::{train, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryModel {
    pub class_models: BTreeMap<String, DespawnModel>,
    pub gamma: f64,
}

impl DictionaryModel {
    pub fn new(class_models: BTreeMap<String, DespawnModel>, gamma: f64) -> Result<Self> {
        if class_models.len() < 2 {
            return Err(Error::Config(format!(
                "a dictionary needs at least 2 classes, got {}",
                class_models.len()
            )));
        }
        let mut shapes = class_models
            .values()
            .map(|m| (m.levels(), m.kernel_size(), m.mode()));
        let first = shapes.next().expect("non-empty");
        if shapes.any(|s| s != first) {
            return Err(Error::Config(
                "class models differ in depth, kernel size or mode".into(),
            ));
        }
        Ok(Self {
            class_models,
            gamma,
        })
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.class_models.keys().map(String::as_str)
    }
}

/// Trains one model per class with the same configuration and seed.
pub fn dict_train(
    class_datasets: &BTreeMap<String, Vec<Vec<f64>>>,
    mode: SharingMode,
    config: &TrainConfig,
) -> Result<DictionaryModel> {
    if class_datasets.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 classes, got {}",
            class_datasets.len()
        )));
    }
    if let Some((label, _)) = class_datasets.iter().find(|(_, s)| s.is_empty()) {
        return Err(Error::Config(format!(
            "class {label:?} has no training signals"
        )));
    }
    let levels = config.levels.unwrap_or_else(|| {
        let first = class_datasets.values().next().expect("non-empty");
        default_levels(first[0].len())
    });
    let config = TrainConfig {
        levels: Some(levels),
        ..config.clone()
    };
    let trained: Vec<(String, DespawnModel)> = class_datasets
        .par_iter()
        .map(|(label, signals)| {
            train(signals, mode, &config).map(|r| (label.clone(), r.final_model))
        })
        .collect::<Result<_>>()?;
    DictionaryModel::new(trained.into_iter().collect(), config.gamma)
}

/// Label with the lowest objective, and the objective under every class.
/// Ties go to the lexicographically first label.
pub fn dict_classify(
    signal: &[f64],
    dictionary: &DictionaryModel,
) -> Result<(String, BTreeMap<String, f64>)> {
    let mut losses = BTreeMap::new();
    let mut best: Option<(&str, f64)> = None;
    for (label, model) in &dictionary.class_models {
        let record = model.forward(signal)?;
        let value = crate::network::loss(&record, signal, dictionary.gamma)?.total;
        if best.is_none_or(|(_, b)| value < b) {
            best = Some((label, value));
        }
        losses.insert(label.clone(), value);
    }
    let (label, _) = best.expect("dictionary has at least two classes");
    Ok((label.to_string(), losses))
}
