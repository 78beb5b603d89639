use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::preprocess::{decimate, window_split};
use super::wav::read_wav;
use crate::error::{Error, Result};

/// Label used for normal (negative) samples in anomaly-detection manifests.
pub const NORMAL_LABEL: &str = "normal";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub sample_rate: u32,
    pub window_size: usize,
    #[serde(default = "one")]
    pub decimate: usize,
    pub entries: Vec<ManifestEntry>,
}

fn one() -> usize {
    1
}

/// One analysis window cut from a manifest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// `<path>#<index>`
    pub id: String,
    pub label: Option<String>,
    pub split: Split,
    pub samples: Vec<f64>,
}

impl Window {
    /// Anomaly ground truth: anything labelled other than `normal`.
    pub fn is_anomalous(&self) -> bool {
        self.label.as_deref().is_some_and(|l| l != NORMAL_LABEL)
    }
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 {
            return Err(Error::Config(format!(
                "window size must be >= 2, got {}",
                self.window_size
            )));
        }
        if self.decimate == 0 {
            return Err(Error::Config("decimation factor must be >= 1".into()));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.path.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate manifest path {:?}",
                    e.path
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let manifest: Self = serde_json::from_slice(&fs::read(path)?)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// Reads, decimates and windows every entry of `split` (all entries when
    /// `None`). Relative paths resolve against `base_dir`. Output follows
    /// manifest order.
    pub fn windows(&self, base_dir: &Path, split: Option<Split>) -> Result<Vec<Window>> {
        self.validate()?;
        let entries: Vec<&ManifestEntry> = self
            .entries
            .iter()
            .filter(|e| split.is_none_or(|s| e.split == s))
            .collect();
        let per_entry: Vec<Vec<Window>> = entries
            .par_iter()
            .map(|e| self.entry_windows(base_dir, e))
            .collect::<Result<_>>()?;
        Ok(per_entry.into_iter().flatten().collect())
    }

    fn entry_windows(&self, base_dir: &Path, entry: &ManifestEntry) -> Result<Vec<Window>> {
        let path = resolve(base_dir, &entry.path);
        let audio = read_wav(&path)?;
        if audio.sample_rate != self.sample_rate {
            return Err(Error::Config(format!(
                "{} has sample rate {} but the manifest expects {}",
                path.display(),
                audio.sample_rate,
                self.sample_rate
            )));
        }
        let samples = decimate(&audio.samples, self.decimate)?;
        Ok(window_split(&samples, self.window_size)?
            .into_iter()
            .enumerate()
            .map(|(i, samples)| Window {
                id: format!("{}#{}", entry.path, i),
                label: entry.label.clone(),
                split: entry.split,
                samples,
            })
            .collect())
    }
}

fn resolve(base_dir: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Loads a manifest and its windows, resolving paths next to the manifest.
pub fn load_manifest_windows(
    manifest_path: impl AsRef<Path>,
    split: Option<Split>,
) -> Result<(DatasetManifest, Vec<Window>)> {
    let manifest_path = manifest_path.as_ref();
    let manifest = DatasetManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let windows = manifest.windows(base, split)?;
    Ok((manifest, windows))
}
