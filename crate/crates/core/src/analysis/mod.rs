//! Downstream heads built on a trained network: latent features, one-class
//! anomaly scoring, ROC-AUC and dictionary classification.

mod auc;
mod dictionary;
mod elm;
mod features;

pub use auc::roc_auc;
pub use dictionary::{dict_classify, dict_train, DictionaryModel};
pub use elm::{
    elm_fit, elm_fit_vectors, elm_score, OneClassElm, Standardization, DEFAULT_NEURONS,
    DEFAULT_RIDGE,
};
pub use features::{extract_features, LatentFeatures};
