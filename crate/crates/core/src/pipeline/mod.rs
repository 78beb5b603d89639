//! Data in and out of the models: WAV ingestion, preprocessing, manifests,
//! synthetic data, persistence, and end-to-end experiment drivers.

mod experiment;
mod manifest;
mod persist;
mod preprocess;
mod synth;
mod wav;

pub use experiment::{
    classification_accuracy, feature_rows, run_classification, run_detection,
    ClassificationOutcome, DetectionConfig, DetectionOutcome,
};
pub use manifest::{
    load_manifest_windows, DatasetManifest, ManifestEntry, Split, Window, NORMAL_LABEL,
};
pub use persist::{
    features_header, load_dictionary, load_elm, load_model, read_features_csv, read_scores_csv,
    save_dictionary, save_elm, save_model, write_features_csv, write_scores_csv, LevelRecord,
    ModelFile, FORMAT_VERSION,
};
pub use preprocess::{decimate, lowpass_kernel, window_split, DECIMATION_TAPS};
pub use synth::{
    generate_synthetic, write_synthetic, LabeledSignal, SignalKind, SyntheticDataset,
    SyntheticSpec, CLASS_A_LABEL, CLASS_B_LABEL, IMPULSE_LABEL, SHIFT_LABEL,
};
pub use wav::{encode_wav, parse_wav, read_wav, write_wav, WavAudio};
