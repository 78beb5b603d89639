//! Seeded synthetic signals standing in for machine-sound recordings.
//!
//! A "normal" window is two sinusoid bursts plus white Gaussian noise. The
//! "impulse" anomaly adds a few isolated high-amplitude clicks; the "shift"
//! anomaly moves the upper tone to a different frequency. For classification,
//! class `A` uses the normal tone pair and class `B` a different pair.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestEntry, Split, NORMAL_LABEL};
use super::wav::write_wav;
use crate::error::{Error, Result};

pub const IMPULSE_LABEL: &str = "impulse";
pub const SHIFT_LABEL: &str = "shift";
pub const CLASS_A_LABEL: &str = "A";
pub const CLASS_B_LABEL: &str = "B";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub window: usize,
    pub sample_rate: u32,
    /// Standard deviation of the additive noise.
    pub sigma: f64,
    pub n_normal_train: usize,
    pub n_normal_test: usize,
    /// Test windows per anomaly type.
    pub n_anomalous: usize,
    pub n_class_train: usize,
    pub n_class_test: usize,
    /// Tone frequencies in cycles per sample.
    pub normal_freqs: [f64; 2],
    pub class_b_freqs: [f64; 2],
    pub amplitudes: [f64; 2],
    /// Multiplier applied to the upper tone of "shift" anomalies.
    pub shift_factor: f64,
    pub impulse_count: usize,
    pub impulse_amplitude: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            window: 1024,
            sample_rate: 16_000,
            sigma: 0.1,
            n_normal_train: 200,
            n_normal_test: 50,
            n_anomalous: 50,
            n_class_train: 30,
            n_class_test: 20,
            normal_freqs: [0.012, 0.05],
            class_b_freqs: [0.025, 0.045],
            amplitudes: [0.45, 0.45],
            shift_factor: 1.6,
            impulse_count: 4,
            impulse_amplitude: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Normal,
    Impulse,
    Shift,
    ClassB,
}

impl SignalKind {
    fn stream(self) -> u64 {
        match self {
            SignalKind::Normal => 1,
            SignalKind::Impulse => 2,
            SignalKind::Shift => 3,
            SignalKind::ClassB => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSignal {
    pub id: String,
    pub label: String,
    pub split: Split,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub detection: Vec<LabeledSignal>,
    pub classification: Vec<LabeledSignal>,
}

impl SyntheticDataset {
    pub fn signals<'a>(
        items: &'a [LabeledSignal],
        split: Split,
        label: Option<&'a str>,
    ) -> impl Iterator<Item = &'a LabeledSignal> + 'a {
        items
            .iter()
            .filter(move |s| s.split == split && label.is_none_or(|l| s.label == l))
    }
}

/// Smooth on/off envelope: zero outside `[start, end)`, raised-cosine ramps.
fn burst_envelope(t: usize, start: usize, end: usize, ramp: usize) -> f64 {
    if t < start || t >= end {
        return 0.0;
    }
    let from_edge = (t - start).min(end - 1 - t);
    if from_edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (std::f64::consts::PI * from_edge as f64 / ramp as f64).cos()
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Config("synthetic window must be >= 2".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Window `index` of `kind`; every (seed, kind, index) has its own stream.
    pub fn window(&self, kind: SignalKind, index: u64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((kind.stream() << 40) | index);
        let n = self.window;
        let mut freqs = match kind {
            SignalKind::ClassB => self.class_b_freqs,
            _ => self.normal_freqs,
        };
        if kind == SignalKind::Shift {
            freqs[1] *= self.shift_factor;
        }

        let ramp = (n / 16).max(1);
        let mut x = vec![0.0; n];
        for (f, a) in freqs.iter().zip(self.amplitudes) {
            let phase: f64 = rng.random_range(0.0..TAU);
            let len = rng.random_range(n * 5 / 8..=n);
            let start = rng.random_range(0..=n - len);
            for (t, v) in x.iter_mut().enumerate() {
                *v += a
                    * burst_envelope(t, start, start + len, ramp)
                    * (TAU * f * t as f64 + phase).sin();
            }
        }
        if self.sigma > 0.0 {
            let noise = Normal::new(0.0, self.sigma).expect("sigma validated");
            x.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
        }
        if kind == SignalKind::Impulse {
            for _ in 0..self.impulse_count {
                let at = rng.random_range(0..n);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                x[at] += sign * self.impulse_amplitude * rng.random_range(0.75..=1.0);
            }
        }
        x.iter_mut()
            .for_each(|v| *v = v.clamp(-1.0, 32767.0 / 32768.0));
        x
    }
}

fn batch(
    spec: &SyntheticSpec,
    seed: u64,
    kind: SignalKind,
    label: &str,
    split: Split,
    offset: u64,
    count: usize,
) -> Vec<LabeledSignal> {
    let split_name = match split {
        Split::Train => "train",
        Split::Test => "test",
    };
    (0..count as u64)
        .map(|i| LabeledSignal {
            id: format!("{label}_{split_name}_{i:04}"),
            label: label.to_string(),
            split,
            samples: spec.window(kind, offset + i, seed),
        })
        .collect()
}

/// Builds the detection and classification sets described by `spec`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticDataset> {
    spec.validate()?;
    use SignalKind::*;
    let test_offset = 1 << 20;
    let mut detection = batch(
        spec,
        seed,
        Normal,
        NORMAL_LABEL,
        Split::Train,
        0,
        spec.n_normal_train,
    );
    detection.extend(batch(
        spec,
        seed,
        Normal,
        NORMAL_LABEL,
        Split::Test,
        test_offset,
        spec.n_normal_test,
    ));
    detection.extend(batch(
        spec,
        seed,
        Impulse,
        IMPULSE_LABEL,
        Split::Test,
        0,
        spec.n_anomalous,
    ));
    detection.extend(batch(
        spec,
        seed,
        Shift,
        SHIFT_LABEL,
        Split::Test,
        0,
        spec.n_anomalous,
    ));

    // Classification draws from separate streams so it does not reuse the
    // detection windows.
    let class_offset = 2 << 20;
    let mut classification = batch(
        spec,
        seed,
        Normal,
        CLASS_A_LABEL,
        Split::Train,
        class_offset,
        spec.n_class_train,
    );
    classification.extend(batch(
        spec,
        seed,
        Normal,
        CLASS_A_LABEL,
        Split::Test,
        class_offset + spec.n_class_train as u64,
        spec.n_class_test,
    ));
    classification.extend(batch(
        spec,
        seed,
        ClassB,
        CLASS_B_LABEL,
        Split::Train,
        0,
        spec.n_class_train,
    ));
    classification.extend(batch(
        spec,
        seed,
        ClassB,
        CLASS_B_LABEL,
        Split::Test,
        spec.n_class_train as u64,
        spec.n_class_test,
    ));
    Ok(SyntheticDataset {
        detection,
        classification,
    })
}

/// Writes every window as a mono PCM16 file under `dir`, plus
/// `detection.json` and `classification.json` manifests.
pub fn write_synthetic(dir: &Path, spec: &SyntheticSpec, dataset: &SyntheticDataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, items) in [
        ("detection.json", &dataset.detection),
        ("classification.json", &dataset.classification),
    ] {
        let prefix = name.trim_end_matches(".json");
        let mut entries = Vec::with_capacity(items.len());
        for item in items {
            let file = format!("{prefix}_{}.wav", item.id);
            write_wav(dir.join(&file), &item.samples, spec.sample_rate)?;
            entries.push(ManifestEntry {
                path: file,
                label: Some(item.label.clone()),
                split: item.split,
            });
        }
        DatasetManifest {
            sample_rate: spec.sample_rate,
            window_size: spec.window,
            decimate: 1,
            entries,
        }
        .save(dir.join(name))?;
    }
    Ok(())
}
