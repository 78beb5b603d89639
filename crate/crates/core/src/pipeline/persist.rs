//! JSON model files and CSV feature/score tables.
//!
//! Floats are written in shortest round-trip form, so loading a saved model
//! reproduces it bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{DictionaryModel, LatentFeatures, OneClassElm};
use crate::error::{Error, Result};
use crate::network::{DespawnModel, KernelRole, SharingMode, ThresholdPair};
use crate::wavelet::Kernel;

pub const FORMAT_VERSION: u32 = 1;

/// Learned kernels of one level (only those the mode learns) and its
/// thresholds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_bar: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_bar: Option<Vec<f64>>,
    pub b_plus: f64,
    pub b_minus: f64,
}

impl LevelRecord {
    fn slot(&mut self, role: KernelRole) -> &mut Option<Vec<f64>> {
        match role {
            KernelRole::H => &mut self.h,
            KernelRole::G => &mut self.g,
            KernelRole::HBar => &mut self.h_bar,
            KernelRole::GBar => &mut self.g_bar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub mode: SharingMode,
    pub levels: usize,
    pub kernel_size: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// Kernels shared by every level (shared-kernel modes only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared: Option<LevelRecord>,
    pub level_records: Vec<LevelRecord>,
}

impl From<&DespawnModel> for ModelFile {
    fn from(model: &DespawnModel) -> Self {
        let mut level_records: Vec<LevelRecord> = model
            .thresholds()
            .iter()
            .map(|t| LevelRecord {
                b_plus: t.b_plus,
                b_minus: t.b_minus,
                ..LevelRecord::default()
            })
            .collect();
        let mut shared: Option<LevelRecord> = None;
        let layout = model.scheme().slot_layout(model.levels());
        for (slot, kernel) in layout.iter().zip(model.kernels()) {
            let record = match slot.level {
                Some(l) => &mut level_records[l],
                None => shared.get_or_insert_with(LevelRecord::default),
            };
            *record.slot(slot.role) = Some(kernel.taps().to_vec());
        }
        ModelFile {
            format_version: FORMAT_VERSION,
            mode: model.mode(),
            levels: model.levels(),
            kernel_size: model.kernel_size(),
            alpha: model.alpha(),
            gamma: model.gamma(),
            shared,
            level_records,
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<DespawnModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        if self.level_records.len() != self.levels {
            return Err(Error::Config(format!(
                "{} level records for {} levels",
                self.level_records.len(),
                self.levels
            )));
        }
        let mut level_records = self.level_records;
        let mut shared = self.shared;
        let layout = self.mode.scheme().slot_layout(self.levels);
        let kernels = layout
            .iter()
            .map(|slot| {
                let record = match slot.level {
                    Some(l) => Some(&mut level_records[l]),
                    None => shared.as_mut(),
                };
                let taps = record
                    .and_then(|r| r.slot(slot.role).take())
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "mode {} needs kernel {:?} at level {:?}",
                            self.mode, slot.role, slot.level
                        ))
                    })?;
                Kernel::new(taps)
            })
            .collect::<Result<Vec<_>>>()?;
        let thresholds = level_records
            .iter()
            .map(|r| ThresholdPair::new(r.b_plus, r.b_minus, self.alpha))
            .collect();
        DespawnModel::from_parts(
            self.levels,
            self.kernel_size,
            self.mode,
            self.alpha,
            self.gamma,
            kernels,
            thresholds,
        )
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

pub fn save_model(path: impl AsRef<Path>, model: &DespawnModel) -> Result<()> {
    write_json(path.as_ref(), &ModelFile::from(model))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DespawnModel> {
    read_json::<ModelFile>(path.as_ref())?.into_model()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ElmFile {
    format_version: u32,
    #[serde(flatten)]
    model: OneClassElm,
}

pub fn save_elm(path: impl AsRef<Path>, model: &OneClassElm) -> Result<()> {
    write_json(
        path.as_ref(),
        &ElmFile {
            format_version: FORMAT_VERSION,
            model: model.clone(),
        },
    )
}

pub fn load_elm(path: impl AsRef<Path>) -> Result<OneClassElm> {
    let file: ElmFile = read_json(path.as_ref())?;
    let m = &file.model;
    let dim = m.feature_scaler.len();
    if m.hidden_weights.len() != dim
        || m.hidden_weights.iter().any(|r| r.len() != m.neurons)
        || m.hidden_bias.len() != m.neurons
        || m.output_weights.len() != m.neurons
    {
        return Err(Error::Config("inconsistent ELM dimensions".into()));
    }
    Ok(file.model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DictionaryFile {
    format_version: u32,
    gamma: f64,
    classes: BTreeMap<String, ModelFile>,
}

pub fn save_dictionary(path: impl AsRef<Path>, dict: &DictionaryModel) -> Result<()> {
    let file = DictionaryFile {
        format_version: FORMAT_VERSION,
        gamma: dict.gamma,
        classes: dict
            .class_models
            .iter()
            .map(|(label, m)| (label.clone(), ModelFile::from(m)))
            .collect(),
    };
    write_json(path.as_ref(), &file)
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<DictionaryModel> {
    let file: DictionaryFile = read_json(path.as_ref())?;
    let models = file
        .classes
        .into_iter()
        .map(|(label, m)| Ok((label, m.into_model()?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    DictionaryModel::new(models, file.gamma)
}

/// `id,res_mean,res_max,l1_mean_1..L,l1_max_1..L`
pub fn features_header(levels: usize) -> Vec<String> {
    let mut header = vec!["id".to_string(), "res_mean".into(), "res_max".into()];
    header.extend((1..=levels).map(|l| format!("l1_mean_{l}")));
    header.extend((1..=levels).map(|l| format!("l1_max_{l}")));
    header
}

pub fn write_features_csv(path: impl AsRef<Path>, rows: &[(String, LatentFeatures)]) -> Result<()> {
    let levels = rows.first().map_or(0, |(_, f)| f.l1_mean.len());
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(features_header(levels))?;
    for (id, f) in rows {
        if f.l1_mean.len() != levels || f.l1_max.len() != levels {
            return Err(Error::InvalidInput(format!(
                "row {id:?} has a different depth"
            )));
        }
        let mut record = vec![id.clone()];
        record.extend(f.to_vec().iter().map(f64::to_string));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv(path: impl AsRef<Path>) -> Result<Vec<(String, LatentFeatures)>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 5 || header.len() % 2 == 0 || header.get(0) != Some("id") {
        return Err(Error::InvalidInput(format!(
            "feature CSV header has {} columns; expected id plus 2 + 2L features",
            header.len()
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let values = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| Error::InvalidInput(format!("bad feature value {v:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((rec[0].to_string(), LatentFeatures::from_slice(&values)?))
        })
        .collect()
}

pub fn write_scores_csv(path: impl AsRef<Path>, rows: &[(String, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "score"])?;
    for (id, score) in rows {
        w.write_record([id.as_str(), &score.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_csv(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let score = rec
                .get(1)
                .ok_or_else(|| Error::InvalidInput("score row without a score".into()))?;
            let score = score
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad score {score:?}: {e}")))?;
            Ok((rec[0].to_string(), score))
        })
        .collect()
}
